// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rasp_forge/rasp/value.hpp"

namespace rasp_forge {

enum class ScalarOp {
  literal,
  var,
  neg,
  logical_not,
  add,
  sub,
  mul,
  div,
  eq,
  ne,
  lt,
  le,
  gt,
  ge,
  logical_and,
  logical_or,
  if_then_else,
};

/// Immutable expression tree over up to two bound variables. This is the
/// whole language available to elementwise RASP operations.
class ScalarExpr {
 public:
  static ScalarExpr literal(Value v);
  static ScalarExpr var(int index);
  static ScalarExpr unary(ScalarOp op, ScalarExpr operand);
  static ScalarExpr binary(ScalarOp op, ScalarExpr lhs, ScalarExpr rhs);
  static ScalarExpr if_then_else(ScalarExpr cond, ScalarExpr then_branch, ScalarExpr else_branch);

  ScalarOp op() const { return node_->op; }
  const Value& literal_value() const { return node_->literal; }
  int var_index() const { return node_->var; }
  const std::vector<ScalarExpr>& children() const { return node_->children; }

  Value evaluate(std::span<const Value> args) const;
  /// Static result type: comparisons and connectives always yield booleans.
  bool returns_boolean() const;
  /// Replace variable `index` by `replacement`; used to fuse chained maps.
  ScalarExpr substitute(int index, const ScalarExpr& replacement) const;
  /// Rebind variable i to variable mapping[i].
  ScalarExpr rebind(std::span<const int> mapping) const;
  int max_var() const;

  std::string to_source(std::span<const std::string> var_names) const;
  bool structurally_equal(const ScalarExpr& other) const;

 private:
  struct Node {
    ScalarOp op = ScalarOp::literal;
    Value literal;
    int var = 0;
    std::vector<ScalarExpr> children;
  };
  explicit ScalarExpr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  std::shared_ptr<const Node> node_;
};

/// A lambda: named parameters plus a body over them.
struct ScalarFn {
  std::vector<std::string> params;
  ScalarExpr body;

  std::size_t arity() const { return params.size(); }
  Value operator()(std::span<const Value> args) const { return body.evaluate(args); }
  Value operator()(const Value& a) const;
  Value operator()(const Value& a, const Value& b) const;
  std::string to_source() const;
  bool structurally_equal(const ScalarFn& other) const;
};

/// Total order used by every comparison: numbers (booleans as 0/1)
/// numerically, strings lexicographically. Mixed kinds throw EvalError.
int compare_values(const Value& a, const Value& b);

}  // namespace rasp_forge
