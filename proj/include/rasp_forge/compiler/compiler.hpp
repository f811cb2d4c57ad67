// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rasp_forge/craft/blocks.hpp"
#include "rasp_forge/rasp/validate.hpp"
#include "rasp_forge/runtime/model.hpp"

namespace rasp_forge::compiler {

struct CompileOptions {
  std::vector<Value> vocab;
  int max_seq_len = 5;  // positions including BOS
  bool causal = false;
  double inv_temperature = 100.0;
  // Discretizing MLPs use ramps of width (smallest input gap) / divisor.
  double ramp_divisor = 100.0;
  std::size_t max_hidden = 10000;
  // Categorical aggregates without a static single-selection proof are
  // checked by running the interpreter on every input up to this count.
  std::size_t max_exhaustive_inputs = 200000;
};

/// Sorted, duplicate-free set of values. Numerical sets hold plain numbers.
using ValueSet = std::vector<Value>;

struct GraphNode {
  NodeRef ref;
  std::string name;
  std::vector<NodeRef> operands;
  std::vector<NodeRef> consumers;
  ValueSet values;  // s-ops only, after infer_values
};

/// The program after elementwise fusion plus per-node bookkeeping, in
/// topological order (sources first, output last).
struct CompGraph {
  Program program;
  std::vector<GraphNode> nodes;

  const GraphNode& node(NodeRef ref) const;
  GraphNode& node(NodeRef ref);
  const GraphNode& node(const std::string& name) const;
  const ValueSet& values(SOpId id) const { return node(NodeRef{id}).values; }
  SOpId output() const { return *program.output(); }
};

/// Validates, fuses Map-after-Map chains (and Map after a categorical
/// SequenceMap) whose inner node has no other consumer.
CompGraph build_graph(const Program& program);

/// Annotates every s-op node with a superset of its possible values.
void infer_values(CompGraph& graph, const CompileOptions& options);

// Residual directions.
craft::VectorSpace sop_space(const CompGraph& graph, SOpId id);
craft::BasisDirection numerical_direction(const std::string& name);

craft::CraftMLP lower_map(const CompGraph& graph, SOpId id, const CompileOptions& options);
craft::CraftAttentionHead lower_selector_aggregate(const CompGraph& graph, SOpId aggregate,
                                                   const CompileOptions& options);
std::pair<craft::CraftAttentionHead, craft::CraftMLP> lower_selector_width(const CompGraph& graph, SOpId id,
                                                                           const CompileOptions& options);
/// Scratch direction that the selector_width head writes 1/(1+w) into.
craft::BasisDirection selector_width_scratch(const std::string& name);

/// Numerical-input MLP exact at each (x, f(x)) sample and zero at BOS, where
/// the input reads `input_at_bos`.
craft::CraftMLP discretizing_mlp(const std::string& name, const craft::BasisDirection& input,
                                 const std::vector<std::pair<double, Value>>& samples, const craft::VectorSpace& output,
                                 Encoding output_encoding, const CompileOptions& options, double input_at_bos = 0.0);

/// Slot per s-op node producing a block: attention at even slots, MLPs at
/// odd. Sources are absent. selector_width maps to its MLP slot.
struct Allocation {
  std::map<std::uint32_t, int> slot;            // s-op index -> slot of its last block
  std::map<std::uint32_t, int> attention_slot;  // selector_width s-ops: slot of the head
  int num_slots = 0;                            // even: a whole number of blocks
  int num_layers() const { return num_slots / 2; }
};

Allocation allocate_layers(const CompGraph& graph);

struct CompileResult {
  CompiledModel model;
  CompGraph graph;
  Allocation allocation;
  craft::CraftModel craft;
};

CompileResult compile_detailed(const Program& program, const CompileOptions& options);
CompiledModel compile(const Program& program, const CompileOptions& options);

/// Residual-space embedding of a token sequence at craft level (row 0 BOS).
Eigen::MatrixXd craft_embed(const CompileResult& result, std::span<const Value> tokens);

}  // namespace rasp_forge::compiler
