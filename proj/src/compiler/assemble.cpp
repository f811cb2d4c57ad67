// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <set>

#include "rasp_forge/compiler/compiler.hpp"
#include "rasp_forge/errors.hpp"
#include "rasp_forge/frontend/parser.hpp"
#include "rasp_forge/runtime/forward.hpp"

namespace rasp_forge::compiler {

using craft::BasisDirection;
using craft::CraftAttentionHead;
using craft::CraftMLP;
using craft::VectorSpace;
using Eigen::Index;
using Eigen::MatrixXd;

namespace {

void check_options(const CompileOptions& options) {
  if (options.vocab.empty()) {
    throw CompileError("vocabulary is empty");
  }
  if (options.max_seq_len < 2) {
    throw CompileError("max_seq_len must be at least 2 (one position is BOS)");
  }
  if (!(options.inv_temperature > 0.0) || !(options.ramp_divisor > 0.0)) {
    throw CompileError("inv_temperature and ramp divisor must be positive");
  }
  std::set<Value> seen;
  for (const auto& v : options.vocab) {
    if (v.is_none() || v == Value("bos")) {
      throw CompileError("vocabulary may not contain the reserved token 'bos'");
    }
    if (!seen.insert(v).second) {
      throw CompileError("vocabulary lists '" + v.to_string() + "' twice");
    }
  }
}

MatrixXd selection(const VectorSpace& sub, const VectorSpace& space) { return craft::injection(sub, space).transpose(); }

AttentionLayer factor_heads(const std::vector<CraftAttentionHead>& heads, const VectorSpace& residual) {
  AttentionLayer layer;
  Index dk = 0;
  Index dv = 0;
  for (const auto& h : heads) {
    dk = std::max(dk, static_cast<Index>(h.w_qk.output.size()));
    dv = std::max(dv, static_cast<Index>(h.w_ov.input.size()));
  }
  const auto d = static_cast<Index>(residual.size());
  for (const auto& h : heads) {
    AttentionHead out;
    const MatrixXd qk = h.w_qk.embedded(residual, residual);
    const MatrixXd ov = h.w_ov.embedded(residual, residual);
    MatrixXd ek = MatrixXd::Zero(d, dk);
    ek.leftCols(static_cast<Index>(h.w_qk.output.size())) = selection(h.w_qk.output, residual);
    MatrixXd ev = MatrixXd::Zero(d, dv);
    ev.leftCols(static_cast<Index>(h.w_ov.input.size())) = selection(h.w_ov.input, residual);
    out.w_k = ek;
    out.w_q = qk * ek * std::sqrt(static_cast<double>(dk));
    out.w_v = ev;
    out.w_o = ev.transpose() * ov;
    layer.heads.push_back(std::move(out));
  }
  return layer;
}

}  // namespace

CompileResult compile_detailed(const Program& program, const CompileOptions& options) {
  check_options(options);
  CompileResult result{{}, build_graph(program), {}, {}};
  CompGraph& graph = result.graph;
  infer_values(graph, options);
  const Program& p = graph.program;

  // Step 3: one block (or a head/MLP pair) per operation.
  std::vector<std::pair<SOpId, std::variant<CraftAttentionHead, CraftMLP>>> lowered;
  for (const auto& gn : graph.nodes) {
    const auto* id = std::get_if<SOpId>(&gn.ref);
    if (!id) continue;
    switch (p.sop(*id).kind) {
      case SOpKind::map:
      case SOpKind::sequence_map:
        lowered.emplace_back(*id, lower_map(graph, *id, options));
        break;
      case SOpKind::aggregate:
        lowered.emplace_back(*id, lower_selector_aggregate(graph, *id, options));
        break;
      case SOpKind::selector_width: {
        auto [head, mlp] = lower_selector_width(graph, *id, options);
        lowered.emplace_back(*id, std::move(head));
        lowered.emplace_back(*id, std::move(mlp));
        break;
      }
      default:
        break;
    }
  }

  // Step 4.
  result.allocation = allocate_layers(graph);
  const Allocation& alloc = result.allocation;

  // Step 5: the residual space; every label has exactly one owner.
  std::vector<Value> sorted_vocab = options.vocab;
  std::sort(sorted_vocab.begin(), sorted_vocab.end());
  std::vector<BasisDirection> basis;
  for (const auto& v : sorted_vocab) basis.push_back({"tokens", v});
  basis.push_back(craft::kBos);
  for (int i = 0; i < options.max_seq_len; ++i) basis.push_back({"indices", Value(i)});
  basis.push_back(craft::kOne);
  std::vector<SOpId> constants;
  for (const auto& gn : graph.nodes) {
    if (const auto* id = std::get_if<SOpId>(&gn.ref); id && p.sop(*id).kind == SOpKind::constant) {
      constants.push_back(*id);
      const VectorSpace space = sop_space(graph, *id);
      basis.insert(basis.end(), space.basis().begin(), space.basis().end());
    }
  }
  for (const auto& gn : graph.nodes) {
    const auto* id = std::get_if<SOpId>(&gn.ref);
    if (!id) continue;
    const SOpKind kind = p.sop(*id).kind;
    if (kind == SOpKind::tokens || kind == SOpKind::indices || kind == SOpKind::constant) continue;
    if (kind == SOpKind::selector_width) basis.push_back(selector_width_scratch(p.sop(*id).name));
    const VectorSpace space = sop_space(graph, *id);
    basis.insert(basis.end(), space.basis().begin(), space.basis().end());
  }
  VectorSpace residual;
  try {
    residual = VectorSpace(std::move(basis));
  } catch (const CompileError& e) {
    throw CompileError(std::string("residual space: ") + e.what() + " (an s-op name clashes with a reserved name)");
  }

  std::vector<std::pair<int, std::variant<CraftAttentionHead, CraftMLP>>> placed;
  for (auto& [id, block] : lowered) {
    int slot = alloc.slot.at(id.index);
    if (block.index() == 0 && alloc.attention_slot.count(id.index)) slot = alloc.attention_slot.at(id.index);
    placed.emplace_back(slot, std::move(block));
  }
  result.craft = craft::assemble_layers(residual, placed, alloc.num_slots);

  // Step 6: concrete weights.
  CompiledModel& model = result.model;
  ModelConfig& config = model.config;
  const SOpNode& out = p.sop(graph.output());
  config.num_layers = alloc.num_layers();
  config.residual_dim = static_cast<int>(residual.size());
  config.max_seq_len = options.max_seq_len;
  config.causal = options.causal;
  config.inv_temperature = options.inv_temperature;
  config.vocab = options.vocab;
  config.output_name = out.name;
  config.output_encoding = out.encoding;
  if (out.encoding == Encoding::categorical) config.output_values = graph.values(graph.output());
  config.source = frontend::pretty_print(program);
  config.options = {{"ramp_divisor", format_number(options.ramp_divisor)},
                    {"max_hidden", std::to_string(options.max_hidden)}};
  model.residual_labels = residual.labels();

  const auto d = static_cast<Index>(residual.size());
  auto& w = model.weights;
  const Index one = static_cast<Index>(residual.index_of(craft::kOne));
  w.token_embed = MatrixXd::Zero(static_cast<Index>(options.vocab.size()) + 1, d);
  for (std::size_t t = 0; t < options.vocab.size(); ++t) {
    w.token_embed(static_cast<Index>(t), static_cast<Index>(residual.index_of({"tokens", options.vocab[t]}))) = 1.0;
  }
  w.token_embed(static_cast<Index>(options.vocab.size()), static_cast<Index>(residual.index_of(craft::kBos))) = 1.0;
  w.token_embed.col(one).setOnes();
  w.pos_embed = MatrixXd::Zero(options.max_seq_len, d);
  for (int pos = 1; pos < options.max_seq_len; ++pos) {
    const int i = pos - 1;
    w.pos_embed(pos, static_cast<Index>(residual.index_of({"indices", Value(i)}))) = 1.0;
    for (SOpId c : constants) {
      const SOpNode& node = p.sop(c);
      const std::size_t n = node.constant.size();
      if (n != 1 && static_cast<std::size_t>(i) >= n) continue;
      const Value& v = node.constant[n == 1 ? 0 : static_cast<std::size_t>(i)];
      if (node.encoding == Encoding::numerical) {
        w.pos_embed(pos, static_cast<Index>(residual.index_of(numerical_direction(node.name)))) = v.as_number();
      } else {
        w.pos_embed(pos, static_cast<Index>(residual.index_of({node.name, v}))) = 1.0;
      }
    }
  }
  for (std::size_t slot = 0; slot < result.craft.layers.size(); ++slot) {
    const auto& layer = result.craft.layers[slot];
    if (layer.is_attention()) {
      w.attention.push_back(factor_heads(std::get<std::vector<CraftAttentionHead>>(layer.block), residual));
    } else {
      const CraftMLP& mlp = std::get<CraftMLP>(layer.block);
      MlpLayer m;
      m.w1 = mlp.w1.embedded(residual, mlp.w1.output);
      m.w2 = mlp.w2.embedded(mlp.w2.input, residual);
      w.mlp.push_back(std::move(m));
    }
  }
  w.unembed = selection(sop_space(graph, graph.output()), residual);
  check_consistent(model);
  return result;
}

CompiledModel compile(const Program& program, const CompileOptions& options) {
  return compile_detailed(program, options).model;
}

Eigen::MatrixXd craft_embed(const CompileResult& result, std::span<const Value> tokens) {
  return embed(result.model, tokens);
}

}  // namespace rasp_forge::compiler
