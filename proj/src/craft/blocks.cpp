// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rasp_forge/craft/blocks.hpp"

#include <cmath>
#include <limits>

#include "rasp_forge/errors.hpp"

namespace rasp_forge::craft {

Eigen::MatrixXd mlp_apply(const CraftMLP& block, const Eigen::MatrixXd& residual, const VectorSpace& space) {
  const Eigen::MatrixXd hidden = block.w1.apply(residual, space, block.w1.output).cwiseMax(0.0);
  return block.w2.apply(hidden, block.w2.input, space);
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    double total = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const double e = logits(i, j) == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(logits(i, j) - m);
      out(i, j) = e;
      total += e;
    }
    out.row(i) /= total;
  }
  return out;
}

Eigen::MatrixXd attn_apply(const CraftAttentionHead& head, const Eigen::MatrixXd& residual, const VectorSpace& space,
                           bool causal) {
  if (residual.cols() != static_cast<Eigen::Index>(space.size())) {
    throw CompileError("shape mismatch in attention");
  }
  const Eigen::MatrixXd qk = head.w_qk.embedded(space, space);
  Eigen::MatrixXd logits = residual * qk * residual.transpose();
  if (causal) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < logits.cols(); ++j) {
        logits(i, j) = -std::numeric_limits<double>::infinity();
      }
    }
  }
  const Eigen::MatrixXd attn = softmax_rows(logits);
  return attn * residual * head.w_ov.embedded(space, space);
}

CraftMLP combine_parallel(const std::vector<CraftMLP>& mlps) {
  if (mlps.size() == 1) {
    return mlps.front();
  }
  std::vector<VectorSpace> inputs;
  std::vector<VectorSpace> outputs;
  std::vector<BasisDirection> hidden;
  std::string name;
  for (const auto& m : mlps) {
    inputs.push_back(m.w1.input);
    outputs.push_back(m.w2.output);
    for (const auto& d : m.w1.output.basis()) {
      // Hidden labels are only unique within a block.
      hidden.push_back({m.name + "/" + d.label(), std::nullopt});
    }
    name += (name.empty() ? "" : "+") + m.name;
  }
  CraftMLP out;
  out.name = name;
  out.w1.input = direct_sum(inputs);
  out.w1.output = VectorSpace(hidden);
  out.w2.input = out.w1.output;
  out.w2.output = direct_sum(outputs);
  out.w1.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out.w1.input.size()),
                                        static_cast<Eigen::Index>(hidden.size()));
  out.w2.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(hidden.size()),
                                        static_cast<Eigen::Index>(out.w2.output.size()));
  Eigen::Index offset = 0;
  for (const auto& m : mlps) {
    const auto h = static_cast<Eigen::Index>(m.hidden_size());
    out.w1.matrix.middleCols(offset, h) = injection(m.w1.input, out.w1.input).transpose() * m.w1.matrix;
    out.w2.matrix.middleRows(offset, h) = m.w2.matrix * injection(m.w2.output, out.w2.output);
    offset += h;
  }
  return out;
}

std::vector<Eigen::MatrixXd> CraftModel::forward(const Eigen::MatrixXd& embedded, bool causal) const {
  std::vector<Eigen::MatrixXd> states{embedded};
  for (const auto& layer : layers) {
    Eigen::MatrixXd x = states.back();
    if (const auto* heads = std::get_if<std::vector<CraftAttentionHead>>(&layer.block)) {
      Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(x.rows(), x.cols());
      for (const auto& h : *heads) delta += attn_apply(h, x, residual, causal);
      x += delta;
    } else {
      x += mlp_apply(std::get<CraftMLP>(layer.block), x, residual);
    }
    states.push_back(std::move(x));
  }
  return states;
}

CraftModel assemble_layers(const VectorSpace& residual,
                           const std::vector<std::pair<int, std::variant<CraftAttentionHead, CraftMLP>>>& blocks,
                           int num_slots) {
  std::vector<std::vector<CraftAttentionHead>> heads(static_cast<std::size_t>(num_slots));
  std::vector<std::vector<CraftMLP>> mlps(static_cast<std::size_t>(num_slots));
  for (const auto& [slot, block] : blocks) {
    if (slot < 0 || slot >= num_slots) {
      throw CompileError("block slot " + std::to_string(slot) + " out of range");
    }
    const bool attention = block.index() == 0;
    if (attention != (slot % 2 == 0)) {
      throw CompileError("mixed block kinds at slot " + std::to_string(slot));
    }
    if (attention) {
      heads[static_cast<std::size_t>(slot)].push_back(std::get<CraftAttentionHead>(block));
    } else {
      mlps[static_cast<std::size_t>(slot)].push_back(std::get<CraftMLP>(block));
    }
  }
  CraftModel model;
  model.residual = residual;
  for (int slot = 0; slot < num_slots; ++slot) {
    const auto s = static_cast<std::size_t>(slot);
    if (slot % 2 == 0) {
      model.layers.push_back({heads[s]});
    } else if (mlps[s].empty()) {
      CraftMLP noop;
      noop.name = "noop";
      noop.w1.matrix = Eigen::MatrixXd::Zero(0, 0);
      noop.w2.matrix = Eigen::MatrixXd::Zero(0, 0);
      model.layers.push_back({noop});
    } else {
      model.layers.push_back({combine_parallel(mlps[s])});
    }
  }
  return model;
}

}  // namespace rasp_forge::craft
