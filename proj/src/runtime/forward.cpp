// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rasp_forge/runtime/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rasp_forge/errors.hpp"

namespace rasp_forge {

using Eigen::Index;
using Eigen::MatrixXd;

std::vector<std::vector<bool>> Trace::changed(std::size_t k) const {
  const MatrixXd& r = residuals.at(k);
  std::vector<std::vector<bool>> out(static_cast<std::size_t>(r.rows()),
                                     std::vector<bool>(static_cast<std::size_t>(r.cols()), false));
  if (k == 0) return out;
  const MatrixXd& delta = deltas.at(k - 1);
  for (Index i = 0; i < delta.rows(); ++i) {
    for (Index j = 0; j < delta.cols(); ++j) {
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = std::abs(delta(i, j)) > 1e-9;
    }
  }
  return out;
}

std::vector<int> encode_tokens(const ModelConfig& config, std::span<const Value> tokens) {
  if (static_cast<int>(tokens.size()) > config.max_seq_len - 1) {
    throw ModelError("input has " + std::to_string(tokens.size()) + " tokens; the model accepts at most " +
                     std::to_string(config.max_seq_len - 1));
  }
  std::vector<int> ids{static_cast<int>(config.vocab.size())};
  for (const auto& t : tokens) {
    auto it = std::find(config.vocab.begin(), config.vocab.end(), t);
    if (it == config.vocab.end()) {
      throw ModelError("token not in vocabulary: '" + t.to_string() + "' (vocabulary " + format_values(config.vocab) + ")");
    }
    ids.push_back(static_cast<int>(it - config.vocab.begin()));
  }
  return ids;
}

MatrixXd embed(const CompiledModel& model, std::span<const Value> tokens) {
  const auto ids = encode_tokens(model.config, tokens);
  MatrixXd x(static_cast<Index>(ids.size()), model.config.residual_dim);
  for (std::size_t p = 0; p < ids.size(); ++p) {
    x.row(static_cast<Index>(p)) = model.weights.token_embed.row(ids[p]) + model.weights.pos_embed.row(static_cast<Index>(p));
  }
  return x;
}

MatrixXd attention_delta(const AttentionLayer& layer, const MatrixXd& x, bool causal) {
  MatrixXd delta = MatrixXd::Zero(x.rows(), x.cols());
  const Index n = x.rows();
  for (const auto& head : layer.heads) {
    const MatrixXd q = x * head.w_q;
    const MatrixXd k = x * head.w_k;
    const MatrixXd v = x * head.w_v;
    MatrixXd logits = q * k.transpose() / std::sqrt(static_cast<double>(head.w_k.cols()));
    MatrixXd attn(n, n);
    for (Index i = 0; i < n; ++i) {
      const Index visible = causal ? i + 1 : n;
      const double m = logits.row(i).head(visible).maxCoeff();
      double total = 0.0;
      for (Index j = 0; j < n; ++j) {
        const double e = j < visible ? std::exp(logits(i, j) - m) : 0.0;
        attn(i, j) = e;
        total += e;
      }
      attn.row(i) /= total;
    }
    delta += attn * v * head.w_o;
  }
  return delta;
}

MatrixXd mlp_delta(const MlpLayer& layer, const MatrixXd& x) {
  return (x * layer.w1).cwiseMax(0.0) * layer.w2;
}

MatrixXd forward_embedded(const CompiledModel& model, MatrixXd x, Trace* trace) {
  if (trace) {
    *trace = Trace{};
    trace->residuals.push_back(x);
    trace->names.emplace_back("embed");
  }
  for (int l = 0; l < model.config.num_layers; ++l) {
    for (int half = 0; half < 2; ++half) {
      MatrixXd delta = half == 0 ? attention_delta(model.weights.attention[static_cast<std::size_t>(l)], x, model.config.causal)
                                 : mlp_delta(model.weights.mlp[static_cast<std::size_t>(l)], x);
      x += delta;
      if (trace) {
        trace->residuals.push_back(x);
        trace->deltas.push_back(std::move(delta));
        trace->names.push_back((half == 0 ? "attn_" : "mlp_") + std::to_string(l + 1));
      }
    }
  }
  return x;
}

MatrixXd forward(const CompiledModel& model, std::span<const Value> tokens, Trace* trace) {
  return forward_embedded(model, embed(model, tokens), trace);
}

ValueSeq decode(const CompiledModel& model, const MatrixXd& residual) {
  const MatrixXd out = residual * model.weights.unembed;
  ValueSeq values;
  for (Index i = 1; i < out.rows(); ++i) {
    if (model.config.output_encoding == Encoding::numerical) {
      values.emplace_back(out(i, 0));
      continue;
    }
    Index best = 0;
    const double m = out.cols() ? out.row(i).maxCoeff(&best) : 0.0;
    values.push_back(m < 0.5 ? Value() : model.config.output_values[static_cast<std::size_t>(best)]);
  }
  return values;
}

ValueSeq run(const CompiledModel& model, std::span<const Value> tokens) { return decode(model, forward(model, tokens)); }

}  // namespace rasp_forge
