// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rasp_forge/runtime/model.hpp"
#include "rasp_forge/runtime/trace_export.hpp"

namespace rasp_forge::compression {

// A projection W is D x d. Row-vector residuals compress as s = x W and
// decompress as x = s W^T, so the round-trip operator is W W^T.

/// What the layer loss compares at each sublayer: the residual state after
/// it, or the sublayer's own output (its residual update).
enum class LayerTarget { residual, sublayer_output };

LayerTarget parse_layer_target(const std::string& name);

struct CompressionConfig {
  int d = 6;
  long steps = 20000;
  int batch_size = 256;
  double lr_start = 1e-3;
  double lr_end = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.1;
  std::uint64_t seed = 0;
  double layer_loss_weight = 1.0;
  LayerTarget layer_target = LayerTarget::residual;
  int metrics_every = 100;
};

/// The long schedule: 3e5 steps at batch 256.
CompressionConfig full_schedule(CompressionConfig base);

/// What the uncompressed model does on one input.
struct Reference {
  ValueSeq tokens;
  std::vector<Eigen::MatrixXd> residuals;  // h_0 (embedding) .. h_K
  std::vector<int> target_class;           // per non-BOS position; -1 is None
  std::vector<double> target_value;        // numerical outputs
  ValueSeq output;
};

Reference make_reference(const CompiledModel& model, std::span<const Value> tokens);

struct CompressedRun {
  std::vector<Eigen::MatrixXd> residuals;  // decompressed h-hat_0 .. h-hat_K
  ValueSeq output;
};

/// Runs the frozen model on a compressed residual stream.
CompressedRun compressed_forward(const CompiledModel& model, const Eigen::MatrixXd& w, std::span<const Value> tokens);

struct LossParts {
  double total = 0.0;
  double l_out = 0.0;
  double l_layer = 0.0;
};

struct LossAndGrad {
  LossParts loss;
  Eigen::MatrixXd grad;  // D x d
};

LossParts loss(const CompiledModel& model, const Eigen::MatrixXd& w, std::span<const Reference> batch,
               double layer_loss_weight = 1.0, LayerTarget target = LayerTarget::residual);

/// Loss plus its exact gradient with respect to W.
LossAndGrad loss_and_grad(const CompiledModel& model, const Eigen::MatrixXd& w, std::span<const Reference> batch,
                          double layer_loss_weight = 1.0, LayerTarget target = LayerTarget::residual);

/// Numerical outputs count as matching within this absolute tolerance.
inline constexpr double kNumericalMatchTolerance = 1e-2;

bool outputs_match(const CompiledModel& model, const Value& a, const Value& b);

// ---- training ----

struct MetricRow {
  long step = 0;
  double l_out = 0.0;
  double l_layer = 0.0;
  double accuracy = 0.0;
  double lr = 0.0;
};

struct CompressionState {
  Eigen::MatrixXd w;
  Eigen::MatrixXd m;  // AdamW first moment
  Eigen::MatrixXd v;  // AdamW second moment
  long step = 0;
  std::vector<MetricRow> history;
};

/// Seeded uniform draw in [-1/sqrt(D), 1/sqrt(D)].
CompressionState init_state(const CompiledModel& model, const CompressionConfig& config);

double learning_rate(const CompressionConfig& config, long step);

/// Uniform length in [1, max_seq_len - 1], uniform tokens.
ValueSeq sample_input(const CompiledModel& model, std::mt19937_64& rng);

/// Every input if there are at most 4096 of them, else 1000 seeded samples.
std::vector<ValueSeq> eval_inputs(const CompiledModel& model, std::uint64_t seed);

/// Trains W with the model frozen. Throws ModelError on a non-finite loss.
CompressionState train(const CompiledModel& model, const CompressionConfig& config);

std::string metrics_csv(const std::vector<MetricRow>& history);

void save_projection(const Eigen::MatrixXd& w, const std::vector<std::string>& labels,
                     const std::filesystem::path& path);
Eigen::MatrixXd load_projection(const std::filesystem::path& path, const std::vector<std::string>& labels);

// ---- PCA ----

/// Top-d principal directions (D x d, orthonormal columns) of the rows.
Eigen::MatrixXd pca_components(const Eigen::MatrixXd& samples, int d);

/// PCA over every uncompressed residual vector the inputs produce.
Eigen::MatrixXd pca_baseline(const CompiledModel& model, const std::vector<ValueSeq>& inputs, int d);

// ---- diagnostics ----

struct DiagnosticsReport {
  Eigen::MatrixXd round_trip;  // W W^T
  std::vector<std::string> labels;
  std::vector<std::string> layer_names;
  std::vector<double> per_layer_cosine;
  double accuracy = 0.0;

  double row_norm(const std::string& label) const;
};

DiagnosticsReport diagnostics(const CompiledModel& model, const Eigen::MatrixXd& w,
                              const std::vector<ValueSeq>& inputs);

std::string diagnostics_csv(const DiagnosticsReport& report);
std::string round_trip_heatmap(const DiagnosticsReport& report, TraceFormat format);

}  // namespace rasp_forge::compression
