// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rasp_forge/rasp/program.hpp"

#include <map>

#include "rasp_forge/errors.hpp"

namespace rasp_forge {

bool Predicate::operator()(const Value& key, const Value& query) const {
  if (key.is_none() || query.is_none()) {
    return false;
  }
  switch (op) {
    case Comparison::eq: return compare_values(key, query) == 0;
    case Comparison::neq: return compare_values(key, query) != 0;
    case Comparison::lt: return compare_values(key, query) < 0;
    case Comparison::leq: return compare_values(key, query) <= 0;
    case Comparison::gt: return compare_values(key, query) > 0;
    case Comparison::geq: return compare_values(key, query) >= 0;
    case Comparison::always_true: return true;
    case Comparison::lambda: return (*fn)(key, query).as_bool();
  }
  return false;
}

ScalarExpr Predicate::as_expr() const {
  const auto k = ScalarExpr::var(0);
  const auto q = ScalarExpr::var(1);
  switch (op) {
    case Comparison::eq: return ScalarExpr::binary(ScalarOp::eq, k, q);
    case Comparison::neq: return ScalarExpr::binary(ScalarOp::ne, k, q);
    case Comparison::lt: return ScalarExpr::binary(ScalarOp::lt, k, q);
    case Comparison::leq: return ScalarExpr::binary(ScalarOp::le, k, q);
    case Comparison::gt: return ScalarExpr::binary(ScalarOp::gt, k, q);
    case Comparison::geq: return ScalarExpr::binary(ScalarOp::ge, k, q);
    case Comparison::always_true: return ScalarExpr::literal(Value(true));
    case Comparison::lambda: return fn->body;
  }
  return ScalarExpr::literal(Value(false));
}

std::string Predicate::to_source() const {
  if (op == Comparison::lambda) {
    return fn->to_source();
  }
  return comparison_symbol(op);
}

bool Predicate::structurally_equal(const Predicate& other) const {
  if (op != other.op) {
    return false;
  }
  return op != Comparison::lambda || fn->structurally_equal(*other.fn);
}

const char* to_string(SOpKind kind) {
  switch (kind) {
    case SOpKind::tokens: return "tokens";
    case SOpKind::indices: return "indices";
    case SOpKind::constant: return "constant";
    case SOpKind::map: return "map";
    case SOpKind::sequence_map: return "sequence_map";
    case SOpKind::aggregate: return "aggregate";
    case SOpKind::selector_width: return "selector_width";
  }
  return "?";
}

const char* to_string(Encoding encoding) {
  return encoding == Encoding::numerical ? "numerical" : "categorical";
}

const char* comparison_symbol(Comparison op) {
  switch (op) {
    case Comparison::eq: return "==";
    case Comparison::neq: return "!=";
    case Comparison::lt: return "<";
    case Comparison::leq: return "<=";
    case Comparison::gt: return ">";
    case Comparison::geq: return ">=";
    case Comparison::always_true: return "true";
    case Comparison::lambda: return "lambda";
  }
  return "?";
}

SOpId Program::add(SOpNode node, const char* prefix) {
  const SOpId id{static_cast<std::uint32_t>(sops_.size())};
  if (node.name.empty()) {
    node.name = std::string(prefix) + "_" + std::to_string(sops_.size() + selectors_.size());
  }
  sops_.push_back(std::move(node));
  return id;
}

SelectorId Program::add(SelectorNode node, const char* prefix) {
  const SelectorId id{static_cast<std::uint32_t>(selectors_.size())};
  if (node.name.empty()) {
    node.name = std::string(prefix) + "_" + std::to_string(sops_.size() + selectors_.size());
  }
  selectors_.push_back(std::move(node));
  return id;
}

SOpId Program::tokens() {
  if (!tokens_) {
    SOpNode n;
    n.kind = SOpKind::tokens;
    n.name = "tokens";
    tokens_ = add(std::move(n), "tokens");
  }
  return *tokens_;
}

SOpId Program::indices() {
  if (!indices_) {
    SOpNode n;
    n.kind = SOpKind::indices;
    n.name = "indices";
    indices_ = add(std::move(n), "indices");
  }
  return *indices_;
}

SOpId Program::constant(std::vector<Value> values, std::string name) {
  SOpNode n;
  n.kind = SOpKind::constant;
  n.name = std::move(name);
  n.constant = std::move(values);
  return add(std::move(n), "constant");
}

SOpId Program::map(ScalarFn fn, SOpId operand, std::string name) {
  SOpNode n;
  n.kind = SOpKind::map;
  n.name = std::move(name);
  n.fn = std::move(fn);
  n.operands = {operand};
  return add(std::move(n), "map");
}

SOpId Program::sequence_map(ScalarFn fn, SOpId lhs, SOpId rhs, std::string name) {
  SOpNode n;
  n.kind = SOpKind::sequence_map;
  n.name = std::move(name);
  n.fn = std::move(fn);
  n.operands = {lhs, rhs};
  return add(std::move(n), "sequence_map");
}

SOpId Program::aggregate(SelectorId selector, SOpId values, std::string name) {
  SOpNode n;
  n.kind = SOpKind::aggregate;
  n.name = std::move(name);
  n.selector = selector;
  n.operands = {values};
  return add(std::move(n), "aggregate");
}

SOpId Program::selector_width(SelectorId selector, std::string name) {
  SOpNode n;
  n.kind = SOpKind::selector_width;
  n.name = std::move(name);
  n.selector = selector;
  return add(std::move(n), "selector_width");
}

SelectorId Program::select(SOpId keys, SOpId queries, Predicate predicate, std::string name) {
  SelectorNode n;
  n.kind = SelectorKind::select;
  n.name = std::move(name);
  n.keys = keys;
  n.queries = queries;
  n.predicate = std::move(predicate);
  return add(std::move(n), "select");
}

SelectorId Program::selector_and(SelectorId lhs, SelectorId rhs, std::string name) {
  SelectorNode n;
  n.kind = SelectorKind::conjunction;
  n.name = std::move(name);
  n.lhs = lhs;
  n.rhs = rhs;
  return add(std::move(n), "selector_and");
}

SelectorId Program::selector_or(SelectorId lhs, SelectorId rhs, std::string name) {
  SelectorNode n;
  n.kind = SelectorKind::disjunction;
  n.name = std::move(name);
  n.lhs = lhs;
  n.rhs = rhs;
  return add(std::move(n), "selector_or");
}

SelectorId Program::selector_not(SelectorId operand, std::string name) {
  SelectorNode n;
  n.kind = SelectorKind::negation;
  n.name = std::move(name);
  n.lhs = operand;
  n.rhs = operand;
  return add(std::move(n), "selector_not");
}

SOpId Program::numerical(SOpId id) {
  sops_.at(id.index).encoding = Encoding::numerical;
  sops_.at(id.index).annotated = true;
  return id;
}

SOpId Program::categorical(SOpId id) {
  sops_.at(id.index).encoding = Encoding::categorical;
  sops_.at(id.index).annotated = true;
  return id;
}

void Program::rename(SOpId id, std::string name) { sops_.at(id.index).name = std::move(name); }

void Program::rename(SelectorId id, std::string name) { selectors_.at(id.index).name = std::move(name); }

std::optional<SOpId> Program::find_sop(const std::string& name) const {
  for (std::size_t i = 0; i < sops_.size(); ++i) {
    if (sops_[i].name == name) {
      return SOpId{static_cast<std::uint32_t>(i)};
    }
  }
  return std::nullopt;
}

std::optional<SelectorId> Program::find_selector(const std::string& name) const {
  for (std::size_t i = 0; i < selectors_.size(); ++i) {
    if (selectors_[i].name == name) {
      return SelectorId{static_cast<std::uint32_t>(i)};
    }
  }
  return std::nullopt;
}

namespace {

class StructuralComparer {
 public:
  StructuralComparer(const Program& a, const Program& b) : a_(a), b_(b) {}

  bool sops(SOpId x, SOpId y) {
    if (auto it = sop_pairs_.find(x.index); it != sop_pairs_.end()) {
      return it->second == y.index;
    }
    sop_pairs_[x.index] = y.index;
    const auto& p = a_.sop(x);
    const auto& q = b_.sop(y);
    if (p.kind != q.kind || p.name != q.name || p.encoding != q.encoding || p.constant != q.constant ||
        p.operands.size() != q.operands.size() || p.fn.has_value() != q.fn.has_value() ||
        p.selector.has_value() != q.selector.has_value()) {
      return false;
    }
    if (p.fn && !p.fn->structurally_equal(*q.fn)) {
      return false;
    }
    if (p.selector && !selectors(*p.selector, *q.selector)) {
      return false;
    }
    for (std::size_t i = 0; i < p.operands.size(); ++i) {
      if (!sops(p.operands[i], q.operands[i])) {
        return false;
      }
    }
    return true;
  }

  bool selectors(SelectorId x, SelectorId y) {
    if (auto it = sel_pairs_.find(x.index); it != sel_pairs_.end()) {
      return it->second == y.index;
    }
    sel_pairs_[x.index] = y.index;
    const auto& p = a_.selector(x);
    const auto& q = b_.selector(y);
    if (p.kind != q.kind || p.name != q.name) {
      return false;
    }
    if (p.kind == SelectorKind::select) {
      return p.predicate.structurally_equal(q.predicate) && sops(p.keys, q.keys) && sops(p.queries, q.queries);
    }
    return selectors(p.lhs, q.lhs) && selectors(p.rhs, q.rhs);
  }

 private:
  const Program& a_;
  const Program& b_;
  std::map<std::uint32_t, std::uint32_t> sop_pairs_;
  std::map<std::uint32_t, std::uint32_t> sel_pairs_;
};

}  // namespace

bool structurally_equal(const Program& a, const Program& b) {
  if (!a.output() || !b.output()) {
    return a.output().has_value() == b.output().has_value();
  }
  StructuralComparer cmp(a, b);
  return cmp.sops(*a.output(), *b.output());
}

}  // namespace rasp_forge
