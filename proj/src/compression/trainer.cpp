// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "rasp_forge/compression/compression.hpp"
#include "rasp_forge/errors.hpp"
#include "rasp_forge/runtime/forward.hpp"

namespace rasp_forge::compression {

using Eigen::Index;
using Eigen::MatrixXd;

namespace {

constexpr std::size_t kExhaustiveEvalLimit = 4096;
constexpr std::size_t kSampledEvalSize = 1000;

std::size_t input_count(const CompiledModel& model) {
  std::size_t total = 0;
  std::size_t layer = 1;
  for (int len = 1; len < model.config.max_seq_len; ++len) {
    layer *= model.config.vocab.size();
    total += layer;
    if (total > kExhaustiveEvalLimit) break;
  }
  return total;
}

// Frozen-model results are reused across steps; inputs repeat often.
class ReferenceCache {
 public:
  explicit ReferenceCache(const CompiledModel& model) : model_(model) {}

  const Reference& get(const ValueSeq& tokens) {
    auto it = cache_.find(tokens);
    if (it == cache_.end()) it = cache_.emplace(tokens, make_reference(model_, tokens)).first;
    return it->second;
  }

 private:
  const CompiledModel& model_;
  std::map<ValueSeq, Reference> cache_;
};

MetricRow measure(const CompiledModel& model, const MatrixXd& w, const std::vector<Reference>& eval,
                  const CompressionConfig& config, long step) {
  MetricRow row;
  row.step = step;
  const LossParts parts = loss(model, w, eval, config.layer_loss_weight, config.layer_target);
  row.l_out = parts.l_out;
  row.l_layer = parts.l_layer;
  row.lr = learning_rate(config, step);
  std::size_t hits = 0, total = 0;
  for (const auto& ref : eval) {
    const auto got = compressed_forward(model, w, ref.tokens).output;
    for (std::size_t i = 0; i < got.size(); ++i) {
      hits += outputs_match(model, got[i], ref.output[i]) ? 1 : 0;
      ++total;
    }
  }
  row.accuracy = total ? static_cast<double>(hits) / static_cast<double>(total) : 1.0;
  return row;
}

}  // namespace

CompressionConfig full_schedule(CompressionConfig base) {
  base.steps = 300000;
  base.batch_size = 256;
  return base;
}

CompressionState init_state(const CompiledModel& model, const CompressionConfig& config) {
  const int big_d = model.config.residual_dim;
  if (config.d < 1 || config.d > big_d) {
    throw ModelError("compressed width d = " + std::to_string(config.d) + " must lie in [1, " + std::to_string(big_d) + "]");
  }
  std::mt19937_64 rng(config.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(big_d));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  CompressionState state;
  state.w.resize(big_d, config.d);
  for (Index j = 0; j < state.w.cols(); ++j) {
    for (Index i = 0; i < state.w.rows(); ++i) state.w(i, j) = uniform(rng);
  }
  state.m = MatrixXd::Zero(big_d, config.d);
  state.v = MatrixXd::Zero(big_d, config.d);
  return state;
}

double learning_rate(const CompressionConfig& config, long step) {
  const double half = static_cast<double>(config.steps) / 2.0;
  if (half <= 0.0 || static_cast<double>(step) >= half) return config.lr_end;
  return config.lr_start + (config.lr_end - config.lr_start) * static_cast<double>(step) / half;
}

ValueSeq sample_input(const CompiledModel& model, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> length(1, model.config.max_seq_len - 1);
  std::uniform_int_distribution<std::size_t> token(0, model.config.vocab.size() - 1);
  ValueSeq out(static_cast<std::size_t>(length(rng)));
  for (auto& t : out) t = model.config.vocab[token(rng)];
  return out;
}

std::vector<ValueSeq> eval_inputs(const CompiledModel& model, std::uint64_t seed) {
  std::vector<ValueSeq> out;
  if (input_count(model) <= kExhaustiveEvalLimit) {
    std::vector<ValueSeq> frontier{ValueSeq{}};
    for (int len = 1; len < model.config.max_seq_len; ++len) {
      std::vector<ValueSeq> next;
      for (const auto& prefix : frontier) {
        for (const auto& t : model.config.vocab) {
          next.push_back(prefix);
          next.back().push_back(t);
        }
      }
      out.insert(out.end(), next.begin(), next.end());
      frontier = std::move(next);
    }
    return out;
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < kSampledEvalSize; ++i) out.push_back(sample_input(model, rng));
  return out;
}

CompressionState train(const CompiledModel& model, const CompressionConfig& config) {
  if (config.batch_size < 1 || config.steps < 0) throw ModelError("batch size must be positive and steps non-negative");
  CompressionState state = init_state(model, config);
  // Batches come from their own stream so W's draw does not shift them.
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  ReferenceCache cache(model);
  std::vector<Reference> eval;
  for (const auto& in : eval_inputs(model, config.seed + 1)) eval.push_back(cache.get(in));

  const int every = std::max(1, config.metrics_every);
  std::vector<Reference> batch;
  for (long step = 0; step < config.steps; ++step) {
    if (step % every == 0) state.history.push_back(measure(model, state.w, eval, config, step));
    batch.clear();
    for (int b = 0; b < config.batch_size; ++b) batch.push_back(cache.get(sample_input(model, rng)));
    const LossAndGrad lg = loss_and_grad(model, state.w, batch, config.layer_loss_weight, config.layer_target);
    if (!std::isfinite(lg.loss.total) || !lg.grad.allFinite()) {
      throw ModelError("training diverged at step " + std::to_string(step) + ": loss is not finite");
    }
    // AdamW with decoupled weight decay, scaled by the learning rate.
    const double t = static_cast<double>(step + 1);
    state.m = config.beta1 * state.m + (1.0 - config.beta1) * lg.grad;
    state.v = config.beta2 * state.v + (1.0 - config.beta2) * lg.grad.cwiseProduct(lg.grad);
    const MatrixXd m_hat = state.m / (1.0 - std::pow(config.beta1, t));
    const MatrixXd v_hat = state.v / (1.0 - std::pow(config.beta2, t));
    const MatrixXd update = m_hat.array() / (v_hat.array().sqrt() + config.eps);
    state.w -= learning_rate(config, step) * (update + config.weight_decay * state.w);
    state.step = step + 1;
  }
  state.history.push_back(measure(model, state.w, eval, config, state.step));
  if (!std::isfinite(state.history.back().l_out)) {
    throw ModelError("training diverged: final loss is not finite");
  }
  return state;
}

std::string metrics_csv(const std::vector<MetricRow>& history) {
  std::ostringstream out;
  out << "step,l_out,l_layer,accuracy,lr\n";
  for (const auto& r : history) {
    out << r.step << ',' << format_number(r.l_out) << ',' << format_number(r.l_layer) << ','
        << format_number(r.accuracy) << ',' << format_number(r.lr) << '\n';
  }
  return out.str();
}

void save_projection(const MatrixXd& w, const std::vector<std::string>& labels, const std::filesystem::path& path) {
  nlohmann::json j;
  j["version"] = 1;
  j["residual_labels"] = labels;
  j["d"] = w.cols();
  auto rows = nlohmann::json::array();
  for (Index i = 0; i < w.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Index k = 0; k < w.cols(); ++k) row.push_back(w(i, k));
    rows.push_back(std::move(row));
  }
  j["w"] = std::move(rows);
  std::ofstream file(path);
  if (!file) throw ModelError("cannot write projection file " + path.string());
  file << j.dump(1) << '\n';
}

MatrixXd load_projection(const std::filesystem::path& path, const std::vector<std::string>& labels) {
  std::ifstream file(path);
  if (!file) throw ModelError("cannot read projection file " + path.string());
  try {
    const auto j = nlohmann::json::parse(file);
    if (j.at("version").get<int>() != 1) throw ModelError("unsupported projection file version");
    if (j.at("residual_labels").get<std::vector<std::string>>() != labels) {
      throw ModelError("projection file was trained for a different residual layout");
    }
    const auto& rows = j.at("w");
    const auto d = j.at("d").get<Index>();
    MatrixXd w(static_cast<Index>(rows.size()), d);
    for (Index i = 0; i < w.rows(); ++i) {
      const auto& row = rows.at(static_cast<std::size_t>(i));
      if (static_cast<Index>(row.size()) != d) throw ModelError("malformed projection file: ragged rows");
      for (Index k = 0; k < d; ++k) w(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed projection file: ") + e.what());
  }
}

}  // namespace rasp_forge::compression
