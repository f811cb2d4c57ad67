// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rasp_forge/rasp/scalar_expr.hpp"

#include <algorithm>
#include <array>

#include "rasp_forge/errors.hpp"

namespace rasp_forge {

namespace {

const char* op_symbol(ScalarOp op) {
  switch (op) {
    case ScalarOp::add: return "+";
    case ScalarOp::sub: return "-";
    case ScalarOp::mul: return "*";
    case ScalarOp::div: return "/";
    case ScalarOp::eq: return "==";
    case ScalarOp::ne: return "!=";
    case ScalarOp::lt: return "<";
    case ScalarOp::le: return "<=";
    case ScalarOp::gt: return ">";
    case ScalarOp::ge: return ">=";
    case ScalarOp::logical_and: return "and";
    case ScalarOp::logical_or: return "or";
    default: return "?";
  }
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
    }
    out += c;
  }
  return out + "\"";
}

}  // namespace

int compare_values(const Value& a, const Value& b) {
  if (a.is_numeric() && b.is_numeric()) {
    const double x = a.as_number();
    const double y = b.as_number();
    return x < y ? -1 : (y < x ? 1 : 0);
  }
  if (a.is_string() && b.is_string()) {
    const int c = a.as_string().compare(b.as_string());
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
  }
  throw EvalError("cannot compare " + a.to_string() + " with " + b.to_string());
}

ScalarExpr ScalarExpr::literal(Value v) {
  auto n = std::make_shared<Node>();
  n->op = ScalarOp::literal;
  n->literal = std::move(v);
  return ScalarExpr(std::move(n));
}

ScalarExpr ScalarExpr::var(int index) {
  auto n = std::make_shared<Node>();
  n->op = ScalarOp::var;
  n->var = index;
  return ScalarExpr(std::move(n));
}

ScalarExpr ScalarExpr::unary(ScalarOp op, ScalarExpr operand) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->children = {std::move(operand)};
  return ScalarExpr(std::move(n));
}

ScalarExpr ScalarExpr::binary(ScalarOp op, ScalarExpr lhs, ScalarExpr rhs) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->children = {std::move(lhs), std::move(rhs)};
  return ScalarExpr(std::move(n));
}

ScalarExpr ScalarExpr::if_then_else(ScalarExpr cond, ScalarExpr then_branch, ScalarExpr else_branch) {
  auto n = std::make_shared<Node>();
  n->op = ScalarOp::if_then_else;
  n->children = {std::move(cond), std::move(then_branch), std::move(else_branch)};
  return ScalarExpr(std::move(n));
}

Value ScalarExpr::evaluate(std::span<const Value> args) const {
  const auto& c = node_->children;
  switch (node_->op) {
    case ScalarOp::literal:
      return node_->literal;
    case ScalarOp::var:
      if (node_->var < 0 || static_cast<std::size_t>(node_->var) >= args.size()) {
        throw EvalError("unbound variable in elementwise function");
      }
      return args[node_->var];
    case ScalarOp::neg:
      return Value(-c[0].evaluate(args).as_number());
    case ScalarOp::logical_not:
      return Value(!c[0].evaluate(args).as_bool());
    case ScalarOp::add:
    case ScalarOp::sub:
    case ScalarOp::mul:
    case ScalarOp::div: {
      const double a = c[0].evaluate(args).as_number();
      const double b = c[1].evaluate(args).as_number();
      switch (node_->op) {
        case ScalarOp::add: return Value(a + b);
        case ScalarOp::sub: return Value(a - b);
        case ScalarOp::mul: return Value(a * b);
        default:
          if (b == 0.0) {
            throw EvalError("division by zero in elementwise function");
          }
          return Value(a / b);
      }
    }
    case ScalarOp::eq:
    case ScalarOp::ne:
    case ScalarOp::lt:
    case ScalarOp::le:
    case ScalarOp::gt:
    case ScalarOp::ge: {
      const int cmp = compare_values(c[0].evaluate(args), c[1].evaluate(args));
      switch (node_->op) {
        case ScalarOp::eq: return Value(cmp == 0);
        case ScalarOp::ne: return Value(cmp != 0);
        case ScalarOp::lt: return Value(cmp < 0);
        case ScalarOp::le: return Value(cmp <= 0);
        case ScalarOp::gt: return Value(cmp > 0);
        default: return Value(cmp >= 0);
      }
    }
    case ScalarOp::logical_and:
      return Value(c[0].evaluate(args).as_bool() && c[1].evaluate(args).as_bool());
    case ScalarOp::logical_or:
      return Value(c[0].evaluate(args).as_bool() || c[1].evaluate(args).as_bool());
    case ScalarOp::if_then_else:
      return c[0].evaluate(args).as_bool() ? c[1].evaluate(args) : c[2].evaluate(args);
  }
  throw EvalError("corrupt elementwise function");
}

bool ScalarExpr::returns_boolean() const {
  switch (node_->op) {
    case ScalarOp::literal:
      return node_->literal.is_bool();
    case ScalarOp::logical_not:
    case ScalarOp::eq:
    case ScalarOp::ne:
    case ScalarOp::lt:
    case ScalarOp::le:
    case ScalarOp::gt:
    case ScalarOp::ge:
    case ScalarOp::logical_and:
    case ScalarOp::logical_or:
      return true;
    case ScalarOp::if_then_else:
      return node_->children[1].returns_boolean() && node_->children[2].returns_boolean();
    default:
      return false;
  }
}

ScalarExpr ScalarExpr::substitute(int index, const ScalarExpr& replacement) const {
  if (node_->op == ScalarOp::var) {
    return node_->var == index ? replacement : *this;
  }
  if (node_->children.empty()) {
    return *this;
  }
  auto n = std::make_shared<Node>(*node_);
  for (auto& child : n->children) {
    child = child.substitute(index, replacement);
  }
  return ScalarExpr(std::move(n));
}

ScalarExpr ScalarExpr::rebind(std::span<const int> mapping) const {
  if (node_->op == ScalarOp::var) {
    return var(mapping[node_->var]);
  }
  if (node_->children.empty()) {
    return *this;
  }
  auto n = std::make_shared<Node>(*node_);
  for (auto& child : n->children) {
    child = child.rebind(mapping);
  }
  return ScalarExpr(std::move(n));
}

int ScalarExpr::max_var() const {
  int m = node_->op == ScalarOp::var ? node_->var : -1;
  for (const auto& child : node_->children) {
    m = std::max(m, child.max_var());
  }
  return m;
}

std::string ScalarExpr::to_source(std::span<const std::string> var_names) const {
  const auto& c = node_->children;
  switch (node_->op) {
    case ScalarOp::literal:
      return node_->literal.is_string() ? quote(node_->literal.as_string()) : node_->literal.to_string();
    case ScalarOp::var:
      return var_names[node_->var];
    case ScalarOp::neg:
      return "(-" + c[0].to_source(var_names) + ")";
    case ScalarOp::logical_not:
      return "(not " + c[0].to_source(var_names) + ")";
    case ScalarOp::if_then_else:
      return "(if " + c[0].to_source(var_names) + " then " + c[1].to_source(var_names) + " else " +
             c[2].to_source(var_names) + ")";
    default:
      return "(" + c[0].to_source(var_names) + " " + op_symbol(node_->op) + " " + c[1].to_source(var_names) + ")";
  }
}

bool ScalarExpr::structurally_equal(const ScalarExpr& other) const {
  if (node_ == other.node_) {
    return true;
  }
  if (node_->op != other.node_->op || node_->children.size() != other.node_->children.size()) {
    return false;
  }
  if (node_->op == ScalarOp::literal) {
    return node_->literal == other.node_->literal;
  }
  if (node_->op == ScalarOp::var) {
    return node_->var == other.node_->var;
  }
  for (std::size_t i = 0; i < node_->children.size(); ++i) {
    if (!node_->children[i].structurally_equal(other.node_->children[i])) {
      return false;
    }
  }
  return true;
}

Value ScalarFn::operator()(const Value& a) const {
  const std::array<Value, 1> args{a};
  return body.evaluate(args);
}

Value ScalarFn::operator()(const Value& a, const Value& b) const {
  const std::array<Value, 2> args{a, b};
  return body.evaluate(args);
}

std::string ScalarFn::to_source() const {
  std::string out = "(";
  for (std::size_t i = 0; i < params.size(); ++i) {
    out += (i ? ", " : "") + params[i];
  }
  return out + ") -> " + body.to_source(params);
}

bool ScalarFn::structurally_equal(const ScalarFn& other) const {
  return params.size() == other.params.size() && body.structurally_equal(other.body);
}

}  // namespace rasp_forge
