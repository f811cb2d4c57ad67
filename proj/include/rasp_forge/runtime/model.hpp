// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rasp_forge/rasp/program.hpp"

namespace rasp_forge {

struct ModelConfig {
  int num_layers = 0;    // transformer blocks; each is attention then MLP
  int residual_dim = 0;
  int max_seq_len = 0;   // positions, BOS included
  bool causal = false;
  double inv_temperature = 100.0;
  std::vector<Value> vocab;  // token ids follow this order; BOS is id vocab.size()
  std::string output_name;
  Encoding output_encoding = Encoding::categorical;
  std::vector<Value> output_values;  // label per unembedding column (categorical)
  std::string source;                // program text the model was compiled from
  std::map<std::string, std::string> options;  // compile options, informational
};

struct AttentionHead {
  Eigen::MatrixXd w_q;  // D x d_k
  Eigen::MatrixXd w_k;  // D x d_k
  Eigen::MatrixXd w_v;  // D x d_v
  Eigen::MatrixXd w_o;  // d_v x D
};

struct AttentionLayer {
  std::vector<AttentionHead> heads;
};

struct MlpLayer {
  Eigen::MatrixXd w1;  // D x H
  Eigen::MatrixXd w2;  // H x D
};

struct TransformerWeights {
  Eigen::MatrixXd token_embed;  // (|vocab| + 1) x D, last row is BOS
  Eigen::MatrixXd pos_embed;    // max_seq_len x D
  std::vector<AttentionLayer> attention;
  std::vector<MlpLayer> mlp;
  Eigen::MatrixXd unembed;  // D x |output columns|
};

struct CompiledModel {
  ModelConfig config;
  TransformerWeights weights;
  std::vector<std::string> residual_labels;
};

// Shape summary derived from the weights.
std::vector<int> heads_per_layer(const CompiledModel& model);
std::vector<int> key_sizes(const CompiledModel& model);
std::vector<int> value_sizes(const CompiledModel& model);
std::vector<int> mlp_hidden_sizes(const CompiledModel& model);

/// Checks shapes and label counts; throws ModelError.
void check_consistent(const CompiledModel& model);

/// Index of the residual dimension with this label, or -1.
int residual_index(const CompiledModel& model, const std::string& label);

}  // namespace rasp_forge
