// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rasp_forge/frontend/parser.hpp"

#include <map>
#include <optional>
#include <set>

#include "rasp_forge/errors.hpp"
#include "rasp_forge/frontend/lexer.hpp"
#include "rasp_forge/rasp/validate.hpp"

namespace rasp_forge::frontend {

namespace {

const std::set<std::string> kKeywords{"and", "or", "not", "if", "then", "else", "true", "false", "return"};

struct Term {
  enum class Kind { sop, selector, literal, list };
  Kind kind = Kind::literal;
  SOpId sop;
  SelectorId selector;
  Value literal;
  std::vector<Value> list;
};

std::optional<ScalarOp> binary_op(const std::string& s) {
  static const std::map<std::string, ScalarOp> ops{
      {"+", ScalarOp::add},        {"-", ScalarOp::sub},        {"*", ScalarOp::mul},
      {"/", ScalarOp::div},        {"==", ScalarOp::eq},        {"!=", ScalarOp::ne},
      {"<", ScalarOp::lt},         {"<=", ScalarOp::le},        {">", ScalarOp::gt},
      {">=", ScalarOp::ge},        {"and", ScalarOp::logical_and}, {"&", ScalarOp::logical_and},
      {"or", ScalarOp::logical_or}, {"|", ScalarOp::logical_or}};
  auto it = ops.find(s);
  if (it == ops.end()) return std::nullopt;
  return it->second;
}

std::optional<Comparison> comparison(const std::string& s) {
  static const std::map<std::string, Comparison> ops{{"==", Comparison::eq},  {"!=", Comparison::neq},
                                                     {"<", Comparison::lt},   {"<=", Comparison::leq},
                                                     {">", Comparison::gt},   {">=", Comparison::geq},
                                                     {"true", Comparison::always_true}};
  auto it = ops.find(s);
  if (it == ops.end()) return std::nullopt;
  return it->second;
}

class Parser {
 public:
  explicit Parser(std::string_view source) : tokens_(tokenize(source)) {}

  Program run() {
    std::optional<SOpId> last_assigned;
    std::optional<SOpId> returned;
    while (!at_end()) {
      if (peek_ident("return")) {
        const Token& kw = next();
        if (returned) {
          fail("more than one return statement", kw);
        }
        Term t = expr();
        returned = as_sop(t, kw);
        accept(";");
        continue;
      }
      const Token& name = next();
      if (name.kind != TokenKind::identifier || kKeywords.count(name.text)) {
        fail("expected a statement of the form `name = expression`", name);
      }
      if (name.text == "tokens" || name.text == "indices") {
        fail("cannot assign to builtin s-op '" + name.text + "'", name);
      }
      expect("=");
      const std::size_t sops_before = program_.sop_count();
      const std::size_t sels_before = program_.selector_count();
      Term t = expr();
      accept(";");
      bind(name, t, sops_before, sels_before);
      if (t.kind == Term::Kind::sop || t.kind == Term::Kind::literal || t.kind == Term::Kind::list) {
        last_assigned = std::get<SOpId>(env_.at(name.text));
      }
    }
    if (!returned) {
      returned = last_assigned;
    }
    if (!returned) {
      throw ParseError("no return statement", peek().line, peek().column);
    }
    program_.set_output(*returned);
    return std::move(program_);
  }

 private:
  // ---- token helpers ----
  const Token& peek(std::size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  const Token& next() { return tokens_[std::min(pos_++, tokens_.size() - 1)]; }
  bool at_end() const { return peek().kind == TokenKind::end; }
  bool peek_symbol(const char* s, std::size_t ahead = 0) const {
    return peek(ahead).kind == TokenKind::symbol && peek(ahead).text == s;
  }
  bool peek_ident(const char* s) const { return peek().kind == TokenKind::identifier && peek().text == s; }
  bool accept(const char* s) {
    if (peek_symbol(s)) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(const char* s) {
    if (!accept(s)) {
      fail(std::string("expected '") + s + "'", peek());
    }
  }
  [[noreturn]] void fail(const std::string& msg, const Token& at) const {
    const std::string found = at.kind == TokenKind::end ? "end of input" : "'" + at.text + "'";
    throw ParseError(msg + " (found " + found + ")", at.line, at.column);
  }

  // ---- binding ----
  // Reassigning a name keeps the earlier node but gives it a fresh name.
  void retire(const std::string& name) {
    auto unique = [&](const std::string& base) {
      for (int i = 1;; ++i) {
        std::string candidate = base + "_" + std::to_string(i);
        if (!program_.find_sop(candidate) && !program_.find_selector(candidate)) return candidate;
      }
    };
    if (auto id = program_.find_sop(name); id && name != "tokens" && name != "indices") {
      program_.rename(*id, unique(name));
    } else if (auto sel = program_.find_selector(name)) {
      program_.rename(*sel, unique(name));
    }
  }

  void bind(const Token& name, Term& t, std::size_t sops_before, std::size_t sels_before) {
    if (t.kind == Term::Kind::selector) {
      if (t.selector.index >= sels_before) {
        retire(name.text);
        program_.rename(t.selector, name.text);
      }
      env_[name.text] = t.selector;
      return;
    }
    SOpId id = as_sop(t, name);
    if (id.index >= sops_before) {
      retire(name.text);
      program_.rename(id, name.text);
    }
    env_[name.text] = id;
  }

  SOpId as_sop(Term& t, const Token& at) {
    switch (t.kind) {
      case Term::Kind::sop:
        return t.sop;
      case Term::Kind::literal:
        t.sop = program_.constant({t.literal});
        break;
      case Term::Kind::list:
        t.sop = program_.constant(t.list);
        break;
      case Term::Kind::selector:
        fail("expected an s-op but got a selector", at);
    }
    t.kind = Term::Kind::sop;
    return t.sop;
  }

  SelectorId as_selector(const Term& t, const Token& at) {
    if (t.kind != Term::Kind::selector) {
      fail("expected a selector", at);
    }
    return t.selector;
  }

  // ---- s-op level expressions ----
  Term expr() { return or_expr(); }

  Term or_expr() {
    Term lhs = and_expr();
    while (peek_ident("or") || peek_symbol("|")) {
      const Token& op = next();
      Term rhs = and_expr();
      lhs = combine(ScalarOp::logical_or, lhs, rhs, op);
    }
    return lhs;
  }

  Term and_expr() {
    Term lhs = not_expr();
    while (peek_ident("and") || peek_symbol("&")) {
      const Token& op = next();
      Term rhs = not_expr();
      lhs = combine(ScalarOp::logical_and, lhs, rhs, op);
    }
    return lhs;
  }

  Term not_expr() {
    if (peek_ident("not") || peek_symbol("~")) {
      const Token& op = next();
      Term operand = not_expr();
      return apply_unary(ScalarOp::logical_not, operand, op);
    }
    return cmp_expr();
  }

  Term cmp_expr() {
    Term lhs = sum_expr();
    for (const char* sym : {"==", "!=", "<=", ">=", "<", ">"}) {
      if (peek_symbol(sym)) {
        const Token& op = next();
        Term rhs = sum_expr();
        return combine(*binary_op(op.text), lhs, rhs, op);
      }
    }
    return lhs;
  }

  Term sum_expr() {
    Term lhs = prod_expr();
    while (peek_symbol("+") || peek_symbol("-")) {
      const Token& op = next();
      Term rhs = prod_expr();
      lhs = combine(*binary_op(op.text), lhs, rhs, op);
    }
    return lhs;
  }

  Term prod_expr() {
    Term lhs = unary_expr();
    while (peek_symbol("*") || peek_symbol("/")) {
      const Token& op = next();
      Term rhs = unary_expr();
      lhs = combine(*binary_op(op.text), lhs, rhs, op);
    }
    return lhs;
  }

  Term unary_expr() {
    if (peek_symbol("-")) {
      const Token& op = next();
      Term operand = unary_expr();
      return apply_unary(ScalarOp::neg, operand, op);
    }
    return primary();
  }

  Term primary() {
    const Token& tok = next();
    Term t;
    switch (tok.kind) {
      case TokenKind::number:
        t.literal = Value(parse_literal_number(tok));
        return t;
      case TokenKind::string:
        t.literal = Value(tok.text);
        return t;
      case TokenKind::end:
        fail("unexpected end of input", tok);
      case TokenKind::symbol:
        if (tok.text == "(") {
          Term inner = expr();
          expect(")");
          return inner;
        }
        if (tok.text == "[") {
          t.kind = Term::Kind::list;
          t.list = literal_list();
          return t;
        }
        fail("unexpected symbol", tok);
      case TokenKind::identifier:
        break;
    }
    if (tok.text == "true" || tok.text == "false") {
      t.literal = Value(tok.text == "true");
      return t;
    }
    if (peek_symbol("(")) {
      return call(tok);
    }
    return lookup(tok);
  }

  double parse_literal_number(const Token& tok) const {
    auto v = parse_number(tok.text);
    if (!v) {
      fail("malformed number", tok);
    }
    return *v;
  }

  std::vector<Value> literal_list() {
    std::vector<Value> values;
    if (accept("]")) {
      return values;
    }
    do {
      bool negate = accept("-");
      const Token& tok = next();
      if (tok.kind == TokenKind::number) {
        const double v = parse_literal_number(tok);
        values.emplace_back(negate ? -v : v);
      } else if (!negate && tok.kind == TokenKind::string) {
        values.emplace_back(tok.text);
      } else if (!negate && tok.kind == TokenKind::identifier && (tok.text == "true" || tok.text == "false")) {
        values.emplace_back(tok.text == "true");
      } else {
        fail("expected a literal in sequence", tok);
      }
    } while (accept(","));
    expect("]");
    return values;
  }

  Term lookup(const Token& tok) {
    Term t;
    if (auto it = env_.find(tok.text); it != env_.end()) {
      if (const auto* sop = std::get_if<SOpId>(&it->second)) {
        t.kind = Term::Kind::sop;
        t.sop = *sop;
      } else {
        t.kind = Term::Kind::selector;
        t.selector = std::get<SelectorId>(it->second);
      }
      return t;
    }
    t.kind = Term::Kind::sop;
    if (tok.text == "tokens") {
      t.sop = program_.tokens();
    } else if (tok.text == "indices") {
      t.sop = program_.indices();
    } else if (tok.text == "length") {
      const auto all = program_.select(program_.tokens(), program_.tokens(), Predicate::compare(Comparison::always_true),
                                       "length_selector");
      t.sop = program_.selector_width(all, "length");
      env_["length_selector"] = all;
      env_["length"] = t.sop;
    } else {
      if (kKeywords.count(tok.text)) {
        fail("unexpected keyword", tok);
      }
      fail("name '" + tok.text + "' is used before assignment", tok);
    }
    return t;
  }

  Term call(const Token& fn) {
    expect("(");
    Term t;
    const std::string& f = fn.text;
    if (f == "select") {
      Token at = peek();
      Term keys = expr();
      expect(",");
      Token at2 = peek();
      Term queries = expr();
      expect(",");
      Predicate pred = predicate();
      t.kind = Term::Kind::selector;
      t.selector = program_.select(as_sop(keys, at), as_sop(queries, at2), std::move(pred));
    } else if (f == "aggregate") {
      Token at = peek();
      Term sel = expr();
      expect(",");
      Token at2 = peek();
      Term values = expr();
      t.kind = Term::Kind::sop;
      t.sop = program_.aggregate(as_selector(sel, at), as_sop(values, at2));
    } else if (f == "selector_width") {
      Token at = peek();
      Term sel = expr();
      t.kind = Term::Kind::sop;
      t.sop = program_.selector_width(as_selector(sel, at));
    } else if (f == "map" || f == "map2") {
      const std::size_t arity = f == "map" ? 1 : 2;
      ScalarFn lambda = scalar_lambda(arity);
      std::vector<SOpId> operands;
      for (std::size_t i = 0; i < arity; ++i) {
        expect(",");
        Token at = peek();
        Term operand = expr();
        operands.push_back(as_sop(operand, at));
      }
      t.kind = Term::Kind::sop;
      t.sop = arity == 1 ? program_.map(std::move(lambda), operands[0])
                         : program_.sequence_map(std::move(lambda), operands[0], operands[1]);
    } else if (f == "numerical" || f == "categorical") {
      Token at = peek();
      Term operand = expr();
      const SOpId id = as_sop(operand, at);
      t.kind = Term::Kind::sop;
      t.sop = f == "numerical" ? program_.numerical(id) : program_.categorical(id);
    } else {
      fail("unknown function '" + f + "'", fn);
    }
    expect(")");
    return t;
  }

  Predicate predicate() {
    const Token& tok = peek();
    if (tok.kind == TokenKind::symbol && tok.text == "(") {
      return Predicate::table(scalar_lambda(2));
    }
    if ((tok.kind == TokenKind::symbol || tok.text == "true") && comparison(tok.text)) {
      next();
      return Predicate::compare(*comparison(tok.text));
    }
    fail("expected a predicate (==, !=, <, <=, >, >=, true or a (key, query) lambda)", tok);
  }

  // ---- infix desugaring ----
  Term combine(ScalarOp op, Term& lhs, Term& rhs, const Token& at) {
    const bool lsel = lhs.kind == Term::Kind::selector;
    const bool rsel = rhs.kind == Term::Kind::selector;
    if (lsel || rsel) {
      if (!(lsel && rsel) || (op != ScalarOp::logical_and && op != ScalarOp::logical_or)) {
        fail("selectors can only be combined with other selectors using and/or/not", at);
      }
      Term t;
      t.kind = Term::Kind::selector;
      t.selector = op == ScalarOp::logical_and ? program_.selector_and(lhs.selector, rhs.selector)
                                               : program_.selector_or(lhs.selector, rhs.selector);
      return t;
    }
    if (lhs.kind == Term::Kind::literal && rhs.kind == Term::Kind::literal) {
      Term t;
      try {
        t.literal = ScalarExpr::binary(op, ScalarExpr::literal(lhs.literal), ScalarExpr::literal(rhs.literal))
                        .evaluate({});
      } catch (const EvalError& e) {
        fail(e.what(), at);
      }
      return t;
    }
    Term t;
    t.kind = Term::Kind::sop;
    if (lhs.kind == Term::Kind::literal) {
      const SOpId x = as_sop(rhs, at);
      t.sop = program_.map(ScalarFn{{"x"}, ScalarExpr::binary(op, ScalarExpr::literal(lhs.literal), ScalarExpr::var(0))}, x);
    } else if (rhs.kind == Term::Kind::literal) {
      const SOpId x = as_sop(lhs, at);
      t.sop = program_.map(ScalarFn{{"x"}, ScalarExpr::binary(op, ScalarExpr::var(0), ScalarExpr::literal(rhs.literal))}, x);
    } else {
      const SOpId x = as_sop(lhs, at);
      const SOpId y = as_sop(rhs, at);
      t.sop = program_.sequence_map(
          ScalarFn{{"x", "y"}, ScalarExpr::binary(op, ScalarExpr::var(0), ScalarExpr::var(1))}, x, y);
    }
    return t;
  }

  Term apply_unary(ScalarOp op, Term& operand, const Token& at) {
    Term t;
    if (operand.kind == Term::Kind::selector) {
      if (op != ScalarOp::logical_not) {
        fail("cannot negate a selector arithmetically", at);
      }
      t.kind = Term::Kind::selector;
      t.selector = program_.selector_not(operand.selector);
      return t;
    }
    if (operand.kind == Term::Kind::literal) {
      t.literal = ScalarExpr::unary(op, ScalarExpr::literal(operand.literal)).evaluate({});
      return t;
    }
    t.kind = Term::Kind::sop;
    t.sop = program_.map(ScalarFn{{"x"}, ScalarExpr::unary(op, ScalarExpr::var(0))}, as_sop(operand, at));
    return t;
  }

  // ---- scalar lambdas ----
  ScalarFn scalar_lambda(std::size_t arity) {
    const Token& open = peek();
    expect("(");
    std::vector<std::string> params;
    if (!peek_symbol(")")) {
      do {
        const Token& p = next();
        if (p.kind != TokenKind::identifier || kKeywords.count(p.text)) {
          fail("expected a parameter name", p);
        }
        params.push_back(p.text);
      } while (accept(","));
    }
    expect(")");
    expect("->");
    if (params.size() != arity) {
      fail("expected a lambda with " + std::to_string(arity) + " parameter(s)", open);
    }
    params_ = params;
    ScalarExpr body = s_expr();
    params_.clear();
    return ScalarFn{std::move(params), std::move(body)};
  }

  ScalarExpr s_expr() {
    if (peek_ident("if")) {
      next();
      ScalarExpr cond = s_expr();
      if (!peek_ident("then")) fail("expected 'then'", peek());
      next();
      ScalarExpr a = s_expr();
      if (!peek_ident("else")) fail("expected 'else'", peek());
      next();
      ScalarExpr b = s_expr();
      return ScalarExpr::if_then_else(std::move(cond), std::move(a), std::move(b));
    }
    return s_or();
  }

  ScalarExpr s_or() {
    ScalarExpr lhs = s_and();
    while (peek_ident("or") || peek_symbol("|")) {
      next();
      lhs = ScalarExpr::binary(ScalarOp::logical_or, lhs, s_and());
    }
    return lhs;
  }

  ScalarExpr s_and() {
    ScalarExpr lhs = s_not();
    while (peek_ident("and") || peek_symbol("&")) {
      next();
      lhs = ScalarExpr::binary(ScalarOp::logical_and, lhs, s_not());
    }
    return lhs;
  }

  ScalarExpr s_not() {
    if (peek_ident("not") || peek_symbol("~")) {
      next();
      return ScalarExpr::unary(ScalarOp::logical_not, s_not());
    }
    return s_cmp();
  }

  ScalarExpr s_cmp() {
    ScalarExpr lhs = s_sum();
    for (const char* sym : {"==", "!=", "<=", ">=", "<", ">"}) {
      if (peek_symbol(sym)) {
        const Token& op = next();
        return ScalarExpr::binary(*binary_op(op.text), lhs, s_sum());
      }
    }
    return lhs;
  }

  ScalarExpr s_sum() {
    ScalarExpr lhs = s_prod();
    while (peek_symbol("+") || peek_symbol("-")) {
      const Token& op = next();
      lhs = ScalarExpr::binary(*binary_op(op.text), lhs, s_prod());
    }
    return lhs;
  }

  ScalarExpr s_prod() {
    ScalarExpr lhs = s_unary();
    while (peek_symbol("*") || peek_symbol("/")) {
      const Token& op = next();
      lhs = ScalarExpr::binary(*binary_op(op.text), lhs, s_unary());
    }
    return lhs;
  }

  ScalarExpr s_unary() {
    if (peek_symbol("-")) {
      next();
      ScalarExpr operand = s_unary();
      // Fold negative literals so printing and reparsing agree.
      if (operand.op() == ScalarOp::literal && operand.literal_value().is_number()) {
        return ScalarExpr::literal(Value(-operand.literal_value().as_number()));
      }
      return ScalarExpr::unary(ScalarOp::neg, operand);
    }
    return s_primary();
  }

  ScalarExpr s_primary() {
    const Token& tok = next();
    switch (tok.kind) {
      case TokenKind::number:
        return ScalarExpr::literal(Value(parse_literal_number(tok)));
      case TokenKind::string:
        return ScalarExpr::literal(Value(tok.text));
      case TokenKind::symbol:
        if (tok.text == "(") {
          ScalarExpr inner = s_expr();
          expect(")");
          return inner;
        }
        fail("unexpected symbol in function body", tok);
      case TokenKind::end:
        fail("unexpected end of input in function body", tok);
      case TokenKind::identifier:
        break;
    }
    if (tok.text == "true" || tok.text == "false") {
      return ScalarExpr::literal(Value(tok.text == "true"));
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i] == tok.text) {
        return ScalarExpr::var(static_cast<int>(i));
      }
    }
    fail("unknown name '" + tok.text + "' in function body; only the lambda parameters are in scope", tok);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  Program program_;
  std::map<std::string, std::variant<SOpId, SelectorId>> env_;
  std::vector<std::string> params_;
};

}  // namespace

Program parse_unvalidated(std::string_view source) { return Parser(source).run(); }

Program parse(std::string_view source) { return validate(parse_unvalidated(source)); }

}  // namespace rasp_forge::frontend
