// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rasp_forge/rasp/scalar_expr.hpp"
#include "rasp_forge/rasp/value.hpp"

namespace rasp_forge {

enum class Encoding { categorical, numerical };

enum class SOpKind { tokens, indices, constant, map, sequence_map, aggregate, selector_width };

// Comparisons read as `key OP query`, so select(indices, [1,0,2], <) selects
// the keys strictly below each query value.
enum class Comparison { eq, neq, lt, leq, gt, geq, always_true, lambda };

struct SOpId {
  std::uint32_t index = 0;
  friend auto operator<=>(const SOpId&, const SOpId&) = default;
};

struct SelectorId {
  std::uint32_t index = 0;
  friend auto operator<=>(const SelectorId&, const SelectorId&) = default;
};

struct Predicate {
  Comparison op = Comparison::eq;
  // Only for Comparison::lambda; parameters are (key, query).
  std::optional<ScalarFn> fn;

  static Predicate compare(Comparison op) { return Predicate{op, std::nullopt}; }
  static Predicate table(ScalarFn fn) { return Predicate{Comparison::lambda, std::move(fn)}; }

  bool operator()(const Value& key, const Value& query) const;
  /// The predicate as a two-variable function (key is var 0, query var 1).
  ScalarExpr as_expr() const;
  std::string to_source() const;
  bool structurally_equal(const Predicate& other) const;
};

enum class SelectorKind { select, conjunction, disjunction, negation };

struct SelectorNode {
  SelectorKind kind = SelectorKind::select;
  std::string name;
  SOpId keys;
  SOpId queries;
  Predicate predicate;
  SelectorId lhs;
  SelectorId rhs;  // unused for negation
};

struct SOpNode {
  SOpKind kind = SOpKind::tokens;
  std::string name;
  Encoding encoding = Encoding::categorical;
  bool annotated = false;  // encoding was set explicitly
  std::vector<SOpId> operands;
  std::optional<SelectorId> selector;
  std::optional<ScalarFn> fn;
  std::vector<Value> constant;
};

const char* to_string(SOpKind kind);
const char* to_string(Encoding encoding);
const char* comparison_symbol(Comparison op);

/// A RASP program: an id-addressed expression graph plus its output s-op.
/// Nodes are appended by the builder methods below and never removed.
class Program {
 public:
  SOpId tokens();
  SOpId indices();
  SOpId constant(std::vector<Value> values, std::string name = {});
  SOpId map(ScalarFn fn, SOpId operand, std::string name = {});
  SOpId sequence_map(ScalarFn fn, SOpId lhs, SOpId rhs, std::string name = {});
  SOpId aggregate(SelectorId selector, SOpId values, std::string name = {});
  SOpId selector_width(SelectorId selector, std::string name = {});

  SelectorId select(SOpId keys, SOpId queries, Predicate predicate, std::string name = {});
  SelectorId selector_and(SelectorId lhs, SelectorId rhs, std::string name = {});
  SelectorId selector_or(SelectorId lhs, SelectorId rhs, std::string name = {});
  SelectorId selector_not(SelectorId operand, std::string name = {});

  SOpId numerical(SOpId id);
  SOpId categorical(SOpId id);
  void rename(SOpId id, std::string name);
  void rename(SelectorId id, std::string name);

  void set_output(SOpId id) { output_ = id; }
  std::optional<SOpId> output() const { return output_; }

  const SOpNode& sop(SOpId id) const { return sops_.at(id.index); }
  SOpNode& mutable_sop(SOpId id) { return sops_.at(id.index); }
  const SelectorNode& selector(SelectorId id) const { return selectors_.at(id.index); }
  SelectorNode& mutable_selector(SelectorId id) { return selectors_.at(id.index); }
  std::size_t sop_count() const { return sops_.size(); }
  std::size_t selector_count() const { return selectors_.size(); }

  std::optional<SOpId> find_sop(const std::string& name) const;
  std::optional<SelectorId> find_selector(const std::string& name) const;

 private:
  SOpId add(SOpNode node, const char* prefix);
  SelectorId add(SelectorNode node, const char* prefix);

  std::vector<SOpNode> sops_;
  std::vector<SelectorNode> selectors_;
  std::optional<SOpId> output_;
  std::optional<SOpId> tokens_;
  std::optional<SOpId> indices_;
};

/// Structural equality of the output-reachable graphs: kinds, names,
/// encodings, functions, predicates and constants, ignoring node ids.
bool structurally_equal(const Program& a, const Program& b);

}  // namespace rasp_forge
