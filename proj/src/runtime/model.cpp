// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rasp_forge/runtime/model.hpp"

#include <algorithm>

#include "rasp_forge/errors.hpp"

namespace rasp_forge {

namespace {

void expect_shape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ModelError(what + " has shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace

std::vector<int> heads_per_layer(const CompiledModel& model) {
  std::vector<int> out;
  for (const auto& layer : model.weights.attention) out.push_back(static_cast<int>(layer.heads.size()));
  return out;
}

std::vector<int> key_sizes(const CompiledModel& model) {
  std::vector<int> out;
  for (const auto& layer : model.weights.attention) {
    out.push_back(layer.heads.empty() ? 0 : static_cast<int>(layer.heads.front().w_k.cols()));
  }
  return out;
}

std::vector<int> value_sizes(const CompiledModel& model) {
  std::vector<int> out;
  for (const auto& layer : model.weights.attention) {
    out.push_back(layer.heads.empty() ? 0 : static_cast<int>(layer.heads.front().w_v.cols()));
  }
  return out;
}

std::vector<int> mlp_hidden_sizes(const CompiledModel& model) {
  std::vector<int> out;
  for (const auto& layer : model.weights.mlp) out.push_back(static_cast<int>(layer.w1.cols()));
  return out;
}

void check_consistent(const CompiledModel& model) {
  const auto& c = model.config;
  const auto& w = model.weights;
  const Eigen::Index d = c.residual_dim;
  if (c.num_layers < 0 || c.residual_dim <= 0 || c.max_seq_len < 2 || c.vocab.empty()) {
    throw ModelError("config: invalid sizes");
  }
  if (static_cast<Eigen::Index>(model.residual_labels.size()) != d) {
    throw ModelError("residual_labels has " + std::to_string(model.residual_labels.size()) + " entries, expected " +
                     std::to_string(d));
  }
  expect_shape(w.token_embed, static_cast<Eigen::Index>(c.vocab.size()) + 1, d, "token embedding");
  expect_shape(w.pos_embed, c.max_seq_len, d, "position embedding");
  if (static_cast<int>(w.attention.size()) != c.num_layers || static_cast<int>(w.mlp.size()) != c.num_layers) {
    throw ModelError("expected " + std::to_string(c.num_layers) + " attention and MLP layers");
  }
  for (std::size_t l = 0; l < w.attention.size(); ++l) {
    const auto& heads = w.attention[l].heads;
    for (std::size_t h = 0; h < heads.size(); ++h) {
      const auto& hd = heads[h];
      const std::string at = "layer " + std::to_string(l) + " head " + std::to_string(h);
      expect_shape(hd.w_q, d, heads[0].w_k.cols(), at + " W_q");
      expect_shape(hd.w_k, d, heads[0].w_k.cols(), at + " W_k");
      expect_shape(hd.w_v, d, heads[0].w_v.cols(), at + " W_v");
      expect_shape(hd.w_o, heads[0].w_v.cols(), d, at + " W_o");
    }
  }
  for (std::size_t l = 0; l < w.mlp.size(); ++l) {
    expect_shape(w.mlp[l].w1, d, w.mlp[l].w1.cols(), "MLP " + std::to_string(l) + " W1");
    expect_shape(w.mlp[l].w2, w.mlp[l].w1.cols(), d, "MLP " + std::to_string(l) + " W2");
  }
  if (w.unembed.rows() != d) {
    throw ModelError("unembedding must have one row per residual dimension");
  }
  if (c.output_encoding == Encoding::categorical &&
      static_cast<Eigen::Index>(c.output_values.size()) != w.unembed.cols()) {
    throw ModelError("categorical output needs one label per unembedding column");
  }
  if (c.output_encoding == Encoding::numerical && w.unembed.cols() != 1) {
    throw ModelError("numerical output needs exactly one unembedding column");
  }
}

int residual_index(const CompiledModel& model, const std::string& label) {
  auto it = std::find(model.residual_labels.begin(), model.residual_labels.end(), label);
  return it == model.residual_labels.end() ? -1 : static_cast<int>(it - model.residual_labels.begin());
}

}  // namespace rasp_forge
