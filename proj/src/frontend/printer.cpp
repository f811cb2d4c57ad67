// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include "rasp_forge/frontend/parser.hpp"
#include "rasp_forge/rasp/validate.hpp"

namespace rasp_forge::frontend {

namespace {

std::string literal_source(const Value& v) { return ScalarExpr::literal(v).to_source({}); }

std::string sop_source(const Program& program, const SOpNode& node) {
  const auto name_of = [&](SOpId id) { return program.sop(id).name; };
  std::string body;
  switch (node.kind) {
    case SOpKind::tokens:
    case SOpKind::indices:
      return node.name;
    case SOpKind::constant: {
      body = "[";
      for (std::size_t i = 0; i < node.constant.size(); ++i) {
        body += (i ? ", " : "") + literal_source(node.constant[i]);
      }
      body += "]";
      break;
    }
    case SOpKind::map:
      body = "map(" + node.fn->to_source() + ", " + name_of(node.operands[0]) + ")";
      break;
    case SOpKind::sequence_map:
      body = "map2(" + node.fn->to_source() + ", " + name_of(node.operands[0]) + ", " + name_of(node.operands[1]) + ")";
      break;
    case SOpKind::aggregate:
      body = "aggregate(" + program.selector(*node.selector).name + ", " + name_of(node.operands[0]) + ")";
      break;
    case SOpKind::selector_width:
      body = "selector_width(" + program.selector(*node.selector).name + ")";
      break;
  }
  if (node.encoding == Encoding::numerical) {
    return "numerical(" + body + ")";
  }
  if (node.annotated) {
    return "categorical(" + body + ")";
  }
  return body;
}

std::string selector_source(const Program& program, const SelectorNode& node) {
  switch (node.kind) {
    case SelectorKind::select:
      return "select(" + program.sop(node.keys).name + ", " + program.sop(node.queries).name + ", " +
             node.predicate.to_source() + ")";
    case SelectorKind::conjunction:
      return program.selector(node.lhs).name + " and " + program.selector(node.rhs).name;
    case SelectorKind::disjunction:
      return program.selector(node.lhs).name + " or " + program.selector(node.rhs).name;
    case SelectorKind::negation:
      return "not " + program.selector(node.lhs).name;
  }
  return {};
}

}  // namespace

std::string pretty_print(const Program& program) {
  std::ostringstream out;
  for (const NodeRef& ref : topological_order(program)) {
    if (const auto* id = std::get_if<SOpId>(&ref)) {
      const SOpNode& node = program.sop(*id);
      if (node.kind == SOpKind::tokens || node.kind == SOpKind::indices) {
        continue;
      }
      out << node.name << " = " << sop_source(program, node) << ";\n";
    } else {
      const SelectorNode& node = program.selector(std::get<SelectorId>(ref));
      out << node.name << " = " << selector_source(program, node) << ";\n";
    }
  }
  out << "return " << program.sop(*program.output()).name << ";\n";
  return out.str();
}

}  // namespace rasp_forge::frontend
