// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "rasp_forge/compiler/compiler.hpp"
#include "rasp_forge/errors.hpp"

namespace rasp_forge::compiler {

namespace {

std::vector<NodeRef> operands_of(const Program& p, NodeRef ref) {
  std::vector<NodeRef> out;
  if (const auto* id = std::get_if<SOpId>(&ref)) {
    const auto& node = p.sop(*id);
    if (node.selector) out.emplace_back(*node.selector);
    for (SOpId op : node.operands) out.emplace_back(op);
  } else {
    const auto& node = p.selector(std::get<SelectorId>(ref));
    out.emplace_back(node.keys);
    if (node.queries != node.keys) out.emplace_back(node.queries);
  }
  return out;
}

bool fusable_inner(const Program& p, SOpId inner) {
  const auto& node = p.sop(inner);
  if (node.kind == SOpKind::map) return true;
  if (node.kind != SOpKind::sequence_map) return false;
  return std::all_of(node.operands.begin(), node.operands.end(),
                     [&](SOpId op) { return p.sop(op).encoding == Encoding::categorical; });
}

// One pass of Map(f, Map/SequenceMap(g, ...)) -> Map/SequenceMap(f . g, ...).
bool fuse_once(Program& p) {
  const auto order = topological_order(p);
  std::map<NodeRef, int> uses;
  for (const auto& ref : order) {
    for (const auto& op : operands_of(p, ref)) ++uses[op];
  }
  for (const auto& ref : order) {
    const auto* id = std::get_if<SOpId>(&ref);
    if (!id || p.sop(*id).kind != SOpKind::map) continue;
    const SOpId inner = p.sop(*id).operands[0];
    if (inner == *p.output() || uses[NodeRef{inner}] != 1 || !fusable_inner(p, inner)) continue;
    const SOpNode inner_node = p.sop(inner);
    SOpNode& outer = p.mutable_sop(*id);
    outer.fn = ScalarFn{inner_node.fn->params, outer.fn->body.substitute(0, inner_node.fn->body)};
    outer.kind = inner_node.kind;
    outer.operands = inner_node.operands;
    return true;
  }
  return false;
}

}  // namespace

const GraphNode& CompGraph::node(NodeRef ref) const {
  for (const auto& n : nodes) {
    if (n.ref == ref) return n;
  }
  throw CompileError("node is not part of the computational graph");
}

GraphNode& CompGraph::node(NodeRef ref) { return const_cast<GraphNode&>(std::as_const(*this).node(ref)); }

const GraphNode& CompGraph::node(const std::string& name) const {
  for (const auto& n : nodes) {
    if (n.name == name) return n;
  }
  throw CompileError("no node named '" + name + "'");
}

CompGraph build_graph(const Program& program) {
  CompGraph graph{validate(program), {}};
  while (fuse_once(graph.program)) {
  }
  // tokens and indices are always graph sources, used or not.
  std::vector<NodeRef> order{NodeRef{graph.program.tokens()}, NodeRef{graph.program.indices()}};
  for (const auto& ref : topological_order(graph.program)) {
    if (std::find(order.begin(), order.end(), ref) == order.end()) order.push_back(ref);
  }
  const Program& p = graph.program;
  for (const auto& ref : order) {
    GraphNode n;
    n.ref = ref;
    n.name = std::holds_alternative<SOpId>(ref) ? p.sop(std::get<SOpId>(ref)).name
                                                : p.selector(std::get<SelectorId>(ref)).name;
    n.operands = operands_of(p, ref);
    graph.nodes.push_back(std::move(n));
  }
  for (const auto& n : graph.nodes) {
    for (const auto& op : n.operands) graph.node(op).consumers.push_back(n.ref);
  }
  return graph;
}

}  // namespace rasp_forge::compiler
