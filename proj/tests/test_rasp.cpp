// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "rasp_forge/errors.hpp"
#include "rasp_forge/rasp/interpreter.hpp"
#include "rasp_forge/rasp/validate.hpp"

using namespace rasp_forge;

namespace {

ValueSeq chars(std::string_view s) {
  ValueSeq out;
  for (char c : s) out.emplace_back(std::string(1, c));
  return out;
}

ScalarFn fn1(ScalarExpr body) { return ScalarFn{{"x"}, std::move(body)}; }

Program frac_prevs_program() {
  Program p;
  auto is_x = p.numerical(p.map(fn1(ScalarExpr::binary(ScalarOp::eq, ScalarExpr::var(0), ScalarExpr::literal("x"))),
                                p.tokens(), "is_x"));
  auto prevs = p.select(p.indices(), p.indices(), Predicate::compare(Comparison::leq), "prevs");
  p.set_output(p.numerical(p.aggregate(prevs, is_x, "frac_prevs")));
  return p;
}

}  // namespace

TEST_CASE("select with a constant query reproduces the reference matrix") {
  Program p;
  auto q = p.constant({Value(1), Value(0), Value(2)});
  auto sel = p.select(p.indices(), q, Predicate::compare(Comparison::lt));
  p.set_output(p.selector_width(sel));
  auto m = eval_selector(p, sel, chars("abc"));
  CHECK(m.rows() == std::vector<std::vector<int>>{{1, 0, 0}, {0, 0, 0}, {1, 1, 0}});
}

TEST_CASE("aggregate averages selected values and yields None on empty rows") {
  SelectorMatrix m(3);
  m.set(0, 0, true);
  m.set(2, 0, true);
  m.set(2, 1, true);
  auto out = aggregate_rows(m, {Value(10), Value(20), Value(30)}, Encoding::numerical);
  REQUIRE(out.size() == 3);
  CHECK(out[0] == Value(10.0));
  CHECK(out[1].is_none());
  CHECK(out[2] == Value(15.0));
}

TEST_CASE("categorical aggregate of distinct values is an error") {
  SelectorMatrix m(2);
  m.set(1, 0, true);
  m.set(1, 1, true);
  CHECK_THROWS_AS(aggregate_rows(m, {Value("a"), Value("b")}, Encoding::categorical), EvalError);
  auto same = aggregate_rows(m, {Value("a"), Value("a")}, Encoding::categorical);
  CHECK(same[1] == Value("a"));
}

TEST_CASE("tokens, identity map and frac_prevs") {
  Program p;
  p.set_output(p.tokens());
  CHECK(evaluate(p, chars("hello")) == chars("hello"));

  Program id;
  id.set_output(id.map(fn1(ScalarExpr::var(0)), id.tokens()));
  CHECK(evaluate(id, chars("abca")) == chars("abca"));

  auto out = evaluate(frac_prevs_program(), chars("xacx"));
  REQUIRE(out.size() == 4);
  const double expected[] = {1.0, 1.0 / 2, 1.0 / 3, 1.0 / 2};
  for (int i = 0; i < 4; ++i) CHECK(out[i].as_number() == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("always-true and lower-triangular selectors") {
  Program p;
  auto all = p.select(p.tokens(), p.tokens(), Predicate::compare(Comparison::always_true));
  auto tri = p.select(p.indices(), p.indices(), Predicate::compare(Comparison::leq));
  p.set_output(p.selector_width(all));
  auto a = eval_selector(p, all, chars("abc"));
  auto t = eval_selector(p, tri, chars("abc"));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(a(i, j));
      CHECK(t(i, j) == (j <= i));
    }
  }
}

TEST_CASE("unknown tokens are rejected") {
  EvalOptions opts;
  opts.vocab = chars("abc");
  CHECK_THROWS_AS(evaluate(frac_prevs_program(), chars("abz"), opts), EvalError);
}

TEST_CASE("validate resolves encodings of frac_prevs") {
  Program v = validate(frac_prevs_program());
  CHECK(v.sop(*v.find_sop("is_x")).encoding == Encoding::numerical);
  CHECK(v.sop(*v.find_sop("frac_prevs")).encoding == Encoding::numerical);

  // Unannotated: the boolean map feeding an unannotated aggregate becomes numerical.
  Program p;
  auto is_x = p.map(fn1(ScalarExpr::binary(ScalarOp::eq, ScalarExpr::var(0), ScalarExpr::literal("x"))), p.tokens(),
                    "is_x");
  auto prevs = p.select(p.indices(), p.indices(), Predicate::compare(Comparison::leq), "prevs");
  p.set_output(p.aggregate(prevs, is_x, "frac_prevs"));
  Program r = validate(p);
  CHECK(r.sop(*r.find_sop("is_x")).encoding == Encoding::numerical);
  CHECK(r.sop(*r.find_sop("frac_prevs")).encoding == Encoding::numerical);
}

TEST_CASE("selectors over four distinct s-ops are rejected") {
  Program p;
  auto a = p.map(fn1(ScalarExpr::var(0)), p.tokens(), "a");
  auto b = p.map(fn1(ScalarExpr::var(0)), p.tokens(), "b");
  auto c = p.map(fn1(ScalarExpr::var(0)), p.indices(), "c");
  auto d = p.map(fn1(ScalarExpr::var(0)), p.indices(), "d");
  auto both = p.selector_and(p.select(a, b, Predicate::compare(Comparison::eq)),
                             p.select(c, d, Predicate::compare(Comparison::eq)));
  p.set_output(p.selector_width(both));
  try {
    validate(p);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("compound selector unsupported") != std::string::npos);
  }
}

TEST_CASE("compound selectors over shared inputs are simplified") {
  Program p;
  auto lt = p.select(p.indices(), p.indices(), Predicate::compare(Comparison::lt));
  auto eq = p.select(p.indices(), p.indices(), Predicate::compare(Comparison::eq));
  auto either = p.selector_or(lt, eq);
  p.set_output(p.selector_width(either));
  Program v = validate(p);
  auto original = evaluate(p, chars("abcd"));
  CHECK(evaluate(v, chars("abcd")) == original);
  CHECK(original == ValueSeq{Value(1), Value(2), Value(3), Value(4)});
}

TEST_CASE("self-dependent s-op is a cycle error") {
  Program p;
  auto m = p.map(fn1(ScalarExpr::var(0)), p.tokens(), "loop");
  p.mutable_sop(m).operands[0] = m;
  p.set_output(m);
  try {
    validate(p);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("cycle") != std::string::npos);
  }
}

TEST_CASE("numerical aggregate of a categorical value is a mismatch") {
  Program p;
  auto prevs = p.select(p.indices(), p.indices(), Predicate::compare(Comparison::leq));
  auto agg = p.aggregate(prevs, p.tokens());
  p.set_output(p.numerical(agg));
  CHECK_THROWS_AS(validate(p), ValidationError);
}

TEST_CASE("property: aggregate equals the mean over selected positions; causal rows are restricted") {
  std::mt19937 rng(7);
  const ValueSeq vocab{Value(0), Value(1), Value(2), Value(3)};
  const Comparison ops[] = {Comparison::eq, Comparison::neq, Comparison::lt, Comparison::leq,
                            Comparison::gt, Comparison::geq, Comparison::always_true};
  for (Comparison op : ops) {
    Program p;
    auto sel = p.select(p.tokens(), p.indices(), Predicate::compare(op));
    auto vals = p.numerical(p.map(fn1(ScalarExpr::binary(ScalarOp::mul, ScalarExpr::var(0), ScalarExpr::literal(2))),
                                  p.tokens()));
    auto agg = p.numerical(p.aggregate(sel, vals));
    p.set_output(agg);
    for (int trial = 0; trial < 40; ++trial) {
      ValueSeq input;
      const int n = 1 + static_cast<int>(rng() % 4);
      for (int i = 0; i < n; ++i) input.push_back(vocab[rng() % 4]);
      for (bool causal : {false, true}) {
        EvalOptions opts;
        opts.causal = causal;
        auto m = eval_selector(p, sel, input, opts);
        auto out = evaluate(p, input, opts);
        for (int i = 0; i < n; ++i) {
          double sum = 0;
          int count = 0;
          for (int j = 0; j < n; ++j) {
            if (m(i, j)) {
              sum += 2 * input[j].as_number();
              ++count;
            }
          }
          if (count == 0) {
            CHECK(out[i].is_none());
          } else {
            CHECK(out[i].as_number() == doctest::Approx(sum / count));
          }
        }
        if (causal) {
          auto full = eval_selector(p, sel, input);
          for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
              CHECK(m(i, j) <= full(i, j));
              if (j <= i) CHECK(m(i, j) == full(i, j));
            }
          }
        }
      }
      CHECK(evaluate(p, input) == evaluate(p, input));
    }
  }
}

TEST_CASE("constant sequences broadcast, truncate, or fail") {
  Program p;
  p.set_output(p.constant({Value(5)}));
  CHECK(evaluate(p, chars("abc")) == ValueSeq{Value(5), Value(5), Value(5)});
  Program q;
  q.set_output(q.constant({Value(1), Value(2), Value(3)}));
  CHECK(evaluate(q, chars("ab")) == ValueSeq{Value(1), Value(2)});
  CHECK_THROWS_AS(evaluate(q, chars("abcd")), EvalError);
}

TEST_CASE("scalar expressions") {
  auto e = ScalarExpr::if_then_else(ScalarExpr::binary(ScalarOp::lt, ScalarExpr::var(0), ScalarExpr::literal(2)),
                                    ScalarExpr::literal("small"), ScalarExpr::literal("big"));
  CHECK(e.evaluate(ValueSeq{Value(1)}) == Value("small"));
  CHECK(e.evaluate(ValueSeq{Value(3)}) == Value("big"));
  CHECK_THROWS_AS(ScalarExpr::binary(ScalarOp::div, ScalarExpr::literal(1), ScalarExpr::literal(0)).evaluate({}),
                  EvalError);
  CHECK_THROWS_AS(ScalarExpr::binary(ScalarOp::lt, ScalarExpr::literal("a"), ScalarExpr::literal(1)).evaluate({}),
                  EvalError);
  CHECK(format_number(1.0 / 3) == "0.3333333333333333");
  CHECK(format_number_display(1.0 / 3, 4) == "0.3333");
  CHECK(format_number_display(0.5, 4) == "0.5");
}
