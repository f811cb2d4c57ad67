// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <variant>
#include <vector>

#include "rasp_forge/craft/vector_space.hpp"

namespace rasp_forge::craft {

inline const BasisDirection kOne{"one", std::nullopt};
inline const BasisDirection kBos{"tokens", Value("bos")};

/// ReLU(x W1) W2, with no biases; constants come in through `one`.
struct CraftMLP {
  std::string name;
  LinearMap w1;  // input -> hidden
  LinearMap w2;  // hidden -> output

  std::size_t hidden_size() const { return w1.output.size(); }
};

/// A head defined by its bilinear form and OV map. `w_qk` already includes
/// the BOS update (one -> tokens:bos, scaled by bos_beta) and the
/// inverse temperature.
struct CraftAttentionHead {
  std::string name;
  LinearMap w_qk;  // query space x key space
  LinearMap w_ov;  // value space -> output space
  double bos_beta = 0.5;
  double inv_temperature = 100.0;
};

/// Additive residual update of an MLP on residual rows over `space`.
Eigen::MatrixXd mlp_apply(const CraftMLP& block, const Eigen::MatrixXd& residual, const VectorSpace& space);

/// Additive residual update of one head; row 0 is BOS.
Eigen::MatrixXd attn_apply(const CraftAttentionHead& head, const Eigen::MatrixXd& residual, const VectorSpace& space,
                           bool causal);

/// Row-wise softmax with max subtraction; masked entries are -infinity.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

/// Block-diagonal merge of MLPs that share a layer slot.
CraftMLP combine_parallel(const std::vector<CraftMLP>& mlps);

struct CraftLayer {
  std::variant<std::vector<CraftAttentionHead>, CraftMLP> block;
  bool is_attention() const { return block.index() == 0; }
};

/// Blocks merged by layer slot. Layer 2k is attention, 2k + 1 is MLP.
struct CraftModel {
  VectorSpace residual;
  std::vector<CraftLayer> layers;

  /// Residual after every layer; element 0 is the input.
  std::vector<Eigen::MatrixXd> forward(const Eigen::MatrixXd& embedded, bool causal) const;
};

/// Groups blocks by slot, merging parallel MLPs. Throws CompileError if a
/// slot mixes kinds or an attention block sits at an odd slot.
CraftModel assemble_layers(const VectorSpace& residual,
                           const std::vector<std::pair<int, std::variant<CraftAttentionHead, CraftMLP>>>& blocks,
                           int num_slots);

}  // namespace rasp_forge::craft
