// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "rasp_forge/runtime/model.hpp"

namespace rasp_forge {

/// Token ids with BOS prepended. Throws ModelError for unknown tokens or
/// inputs longer than max_seq_len - 1.
std::vector<int> encode_tokens(const ModelConfig& config, std::span<const Value> tokens);

/// token_embed[id] + pos_embed[position] for every position, BOS first.
Eigen::MatrixXd embed(const CompiledModel& model, std::span<const Value> tokens);

/// Residual stream after the embedding and after every sublayer.
struct Trace {
  std::vector<Eigen::MatrixXd> residuals;  // 2 * num_layers + 1 entries
  std::vector<Eigen::MatrixXd> deltas;     // deltas[k] was added to residuals[k]
  std::vector<std::string> names;          // "embed", "attn_1", "mlp_1", ...

  /// Entries of sublayer k (k >= 1) that its delta changed by more than 1e-9.
  std::vector<std::vector<bool>> changed(std::size_t k) const;
};

Eigen::MatrixXd attention_delta(const AttentionLayer& layer, const Eigen::MatrixXd& x, bool causal);
Eigen::MatrixXd mlp_delta(const MlpLayer& layer, const Eigen::MatrixXd& x);

/// Runs every block on an embedded residual.
Eigen::MatrixXd forward_embedded(const CompiledModel& model, Eigen::MatrixXd x, Trace* trace = nullptr);
Eigen::MatrixXd forward(const CompiledModel& model, std::span<const Value> tokens, Trace* trace = nullptr);

/// Reads the output s-op from every non-BOS row: argmax for categorical
/// outputs (None when no column reaches 0.5), the raw value for numerical.
ValueSeq decode(const CompiledModel& model, const Eigen::MatrixXd& residual);

ValueSeq run(const CompiledModel& model, std::span<const Value> tokens);

}  // namespace rasp_forge
