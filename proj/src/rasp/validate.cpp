// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rasp_forge/rasp/validate.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>

#include "rasp_forge/errors.hpp"

namespace rasp_forge {

namespace {

enum class Mark : std::uint8_t { fresh, active, done };

class TopoSorter {
 public:
  explicit TopoSorter(const Program& p)
      : program_(p), sop_marks_(p.sop_count(), Mark::fresh), sel_marks_(p.selector_count(), Mark::fresh) {}

  void visit(SOpId id) {
    if (id.index >= sop_marks_.size()) {
      errors_.push_back("reference to undefined s-op #" + std::to_string(id.index));
      return;
    }
    if (sop_marks_[id.index] == Mark::done) return;
    if (sop_marks_[id.index] == Mark::active) {
      errors_.push_back("cycle through s-op '" + program_.sop(id).name + "'");
      return;
    }
    sop_marks_[id.index] = Mark::active;
    const auto& node = program_.sop(id);
    if (node.selector) {
      visit(*node.selector);
    }
    for (auto operand : node.operands) {
      visit(operand);
    }
    sop_marks_[id.index] = Mark::done;
    order_.emplace_back(id);
  }

  void visit(SelectorId id) {
    if (id.index >= sel_marks_.size()) {
      errors_.push_back("reference to undefined selector #" + std::to_string(id.index));
      return;
    }
    if (sel_marks_[id.index] == Mark::done) return;
    if (sel_marks_[id.index] == Mark::active) {
      errors_.push_back("cycle through selector '" + program_.selector(id).name + "'");
      return;
    }
    sel_marks_[id.index] = Mark::active;
    const auto& node = program_.selector(id);
    if (node.kind == SelectorKind::select) {
      visit(node.keys);
      visit(node.queries);
    } else {
      visit(node.lhs);
      if (node.kind != SelectorKind::negation) {
        visit(node.rhs);
      }
    }
    sel_marks_[id.index] = Mark::done;
    order_.emplace_back(id);
  }

  std::vector<NodeRef> order_;
  std::vector<std::string> errors_;

 private:
  const Program& program_;
  std::vector<Mark> sop_marks_;
  std::vector<Mark> sel_marks_;
};

struct FlatSelector {
  SOpId keys;
  SOpId queries;
  ScalarExpr predicate;  // over (key, query)
};

std::optional<FlatSelector> flatten(const Program& p, SelectorId id, std::string& error) {
  const auto& node = p.selector(id);
  switch (node.kind) {
    case SelectorKind::select:
      return FlatSelector{node.keys, node.queries, node.predicate.as_expr()};
    case SelectorKind::negation: {
      auto inner = flatten(p, node.lhs, error);
      if (!inner) return std::nullopt;
      inner->predicate = ScalarExpr::unary(ScalarOp::logical_not, inner->predicate);
      return inner;
    }
    case SelectorKind::conjunction:
    case SelectorKind::disjunction: {
      auto a = flatten(p, node.lhs, error);
      auto b = flatten(p, node.rhs, error);
      if (!a || !b) return std::nullopt;
      if (a->keys != b->keys || a->queries != b->queries) {
        error = "compound selector unsupported: '" + node.name + "' combines selectors over different s-ops (" +
                p.sop(a->keys).name + ", " + p.sop(a->queries).name + ") and (" + p.sop(b->keys).name + ", " +
                p.sop(b->queries).name + "); only selectors with two input s-ops can be compiled";
        return std::nullopt;
      }
      const auto op = node.kind == SelectorKind::conjunction ? ScalarOp::logical_and : ScalarOp::logical_or;
      return FlatSelector{a->keys, a->queries, ScalarExpr::binary(op, a->predicate, b->predicate)};
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<NodeRef> topological_order(const Program& program) {
  if (!program.output()) {
    throw ValidationError({"no return statement: program has no output s-op"});
  }
  TopoSorter sorter(program);
  sorter.visit(*program.output());
  if (!sorter.errors_.empty()) {
    throw ValidationError(sorter.errors_);
  }
  return sorter.order_;
}

Program validate(const Program& input) {
  const auto order = topological_order(input);
  Program program = input;
  std::vector<std::string> errors;

  std::map<std::string, int> name_uses;
  for (const auto& ref : order) {
    std::visit([&](auto id) {
      if constexpr (std::is_same_v<decltype(id), SOpId>) {
        ++name_uses[program.sop(id).name];
      } else {
        ++name_uses[program.selector(id).name];
      }
    }, ref);
  }
  for (const auto& [name, uses] : name_uses) {
    if (uses > 1) {
      errors.push_back("name '" + name + "' is used by " + std::to_string(uses) + " different nodes");
    }
  }

  for (const auto& ref : order) {
    if (const auto* sel_id = std::get_if<SelectorId>(&ref)) {
      auto& node = program.mutable_selector(*sel_id);
      if (node.kind == SelectorKind::select) {
        if (node.predicate.op == Comparison::lambda &&
            (!node.predicate.fn || node.predicate.fn->arity() != 2 || node.predicate.fn->body.max_var() > 1)) {
          errors.push_back("selector '" + node.name + "': predicate must be a function of (key, query)");
        }
        continue;
      }
      std::string error;
      auto flat = flatten(program, *sel_id, error);
      if (!flat) {
        errors.push_back(error);
        continue;
      }
      node.kind = SelectorKind::select;
      node.keys = flat->keys;
      node.queries = flat->queries;
      node.predicate = Predicate::table(ScalarFn{{"k", "q"}, flat->predicate});
      continue;
    }

    const SOpId id = std::get<SOpId>(ref);
    auto& node = program.mutable_sop(id);
    const std::string where = "s-op '" + node.name + "'";
    switch (node.kind) {
      case SOpKind::tokens:
      case SOpKind::indices:
        if (node.encoding == Encoding::numerical) {
          errors.push_back(where + ": tokens and indices are always categorical");
        }
        break;
      case SOpKind::constant:
        if (node.constant.empty()) {
          errors.push_back(where + ": constant sequence is empty");
        }
        break;
      case SOpKind::map:
      case SOpKind::sequence_map: {
        const std::size_t arity = node.kind == SOpKind::map ? 1 : 2;
        if (node.operands.size() != arity || !node.fn || node.fn->arity() != arity ||
            node.fn->body.max_var() >= static_cast<int>(arity)) {
          errors.push_back(where + ": expected a " + std::to_string(arity) + "-argument function over " +
                           std::to_string(arity) + " operand(s)");
        }
        break;
      }
      case SOpKind::aggregate: {
        if (!node.selector || node.operands.size() != 1) {
          errors.push_back(where + ": aggregate needs exactly one selector and one s-op");
          break;
        }
        auto& value = program.mutable_sop(node.operands[0]);
        if (!node.annotated) {
          const bool boolean_map = !value.annotated && value.fn &&
                                   (value.kind == SOpKind::map || value.kind == SOpKind::sequence_map) &&
                                   value.fn->body.returns_boolean();
          if (boolean_map) {
            value.encoding = Encoding::numerical;
            node.encoding = Encoding::numerical;
          } else {
            node.encoding = value.encoding;
          }
        }
        if (node.encoding != value.encoding) {
          errors.push_back(where + ": " + to_string(node.encoding) + " aggregate over " + to_string(value.encoding) +
                           " s-op '" + value.name + "' (numerical/categorical mismatch)");
        }
        break;
      }
      case SOpKind::selector_width:
        if (!node.selector || !node.operands.empty()) {
          errors.push_back(where + ": selector_width needs exactly one selector");
        }
        break;
    }
  }

  if (!errors.empty()) {
    throw ValidationError(errors);
  }
  return program;
}

}  // namespace rasp_forge
