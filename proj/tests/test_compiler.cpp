// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <set>

#include "rasp_forge/compiler/compiler.hpp"
#include "rasp_forge/errors.hpp"
#include "rasp_forge/frontend/builtins.hpp"
#include "rasp_forge/frontend/parser.hpp"
#include "rasp_forge/rasp/interpreter.hpp"
#include "rasp_forge/runtime/forward.hpp"
#include "test_util.hpp"

using namespace rasp_forge;
using namespace rasp_forge::compiler;
using namespace rasp_forge::testing;

namespace {

CompileOptions options_for(const ValueSeq& vocab, int max_seq_len, bool causal = false) {
  CompileOptions o;
  o.vocab = vocab;
  o.max_seq_len = max_seq_len;
  o.causal = causal;
  return o;
}

CompileOptions frac_options(int max_seq_len = 5) { return options_for(chars("abcx"), max_seq_len); }

std::set<std::string> node_names(const CompGraph& g) {
  std::set<std::string> out;
  for (const auto& n : g.nodes) out.insert(n.name);
  return out;
}

ValueSet doubles(std::initializer_list<double> xs) { return numbers(xs); }

bool in_set(const ValueSet& set, const Value& v, bool numerical) {
  if (v.is_none()) return true;
  return std::any_of(set.begin(), set.end(), [&](const Value& s) {
    return numerical ? std::abs(s.as_number() - v.as_number()) < 1e-9 : s == v;
  });
}

// Drives every input of a builtin case through compiler and interpreter.
void sweep(const BuiltinCase& c, bool causal, int max_len) {
  const Program program = frontend::load_builtin(c.name, c.params);
  const auto result = compile_detailed(program, options_for(c.vocab, c.max_seq_len, causal));
  const bool numerical = result.model.config.output_encoding == Encoding::numerical;
  EvalOptions eval;
  eval.causal = causal;
  std::size_t mismatches = 0;
  for_each_input(c.vocab, max_len, [&](const ValueSeq& input) {
    const ValueSeq expected = evaluate(program, input, eval);
    const ValueSeq got = run(result.model, input);
    for (std::size_t i = 0; i < input.size(); ++i) {
      if (!same_output(got[i], expected[i], numerical)) {
        if (mismatches++ < 3) {
          MESSAGE(c.name << " on " << format_values(input) << ": compiled " << format_values(got) << " vs "
                         << format_values(expected));
        }
      }
    }
  });
  CHECK(mismatches == 0);
}

}  // namespace

TEST_CASE("build_graph") {
  const auto g = build_graph(frontend::load_builtin("frac_prevs"));
  CHECK(node_names(g) == std::set<std::string>{"tokens", "indices", "is_x", "prevs", "frac_prevs"});
  CHECK(g.nodes.back().name == "frac_prevs");

  CHECK(build_graph(frontend::parse("return tokens")).nodes.size() == 2);

  const Program chained = frontend::parse("a = tokens + 1\nb = a * 3\nreturn b");
  const auto fused = build_graph(chained);
  CHECK(fused.nodes.size() == 3);
  const auto& out = fused.program.sop(fused.output());
  CHECK(out.kind == SOpKind::map);
  CHECK(fused.program.sop(out.operands[0]).kind == SOpKind::tokens);
  for_each_input(numbers({0, 1, 2}), 3, [&](const ValueSeq& in) {
    CHECK(evaluate(fused.program, in) == evaluate(chained, in));
  });

  // Shared intermediates and outputs stay unfused.
  const auto shared = build_graph(frontend::parse("a = tokens + 1\nb = a * 3\nreturn b + a"));
  CHECK(shared.nodes.size() == 5);
}

TEST_CASE("infer_values") {
  auto g = build_graph(frontend::load_builtin("frac_prevs"));
  infer_values(g, frac_options(3));
  CHECK(g.node("is_x").values == doubles({0, 1}));
  CHECK(g.node("frac_prevs").values == doubles({0, 1.0 / 3, 0.5, 2.0 / 3, 1}));
  CHECK(g.node("indices").values == doubles({0, 1, 2}));
  CHECK(g.node("tokens").values == chars("abcx"));
}

TEST_CASE("property: inferred value sets cover every interpreted value") {
  for (const auto& c : builtin_cases()) {
    const Program program = frontend::load_builtin(c.name, c.params);
    auto g = build_graph(program);
    infer_values(g, options_for(c.vocab, c.max_seq_len));
    for_each_input(c.vocab, std::min(c.max_len, 4), [&](const ValueSeq& in) {
      Evaluator ev(g.program, in);
      for (const auto& n : g.nodes) {
        const auto* id = std::get_if<SOpId>(&n.ref);
        if (!id) continue;
        const bool numerical = g.program.sop(*id).encoding == Encoding::numerical;
        for (const auto& v : ev.sop(*id)) {
          if (!in_set(n.values, v, numerical)) {
            FAIL_CHECK(c.name << ": " << n.name << " took " << v.to_string());
          }
        }
      }
    });
  }
}

TEST_CASE("lower_map") {
  auto g = build_graph(frontend::load_builtin("frac_prevs"));
  const auto opts = frac_options();
  infer_values(g, opts);
  const auto mlp = lower_map(g, *g.program.find_sop("is_x"), opts);
  const craft::VectorSpace residual = craft::direct_sum(mlp.w1.input, mlp.w2.output);
  for (const char* tok : {"a", "b", "c", "x"}) {
    Eigen::MatrixXd row = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(residual.size()));
    row(0, static_cast<Eigen::Index>(residual.index_of({"tokens", Value(tok)}))) = 1;
    row(0, static_cast<Eigen::Index>(residual.index_of(craft::kOne))) = 1;
    const auto out = craft::mlp_apply(mlp, row, residual);
    CHECK(out(0, static_cast<Eigen::Index>(residual.index_of({"is_x", std::nullopt}))) == (std::string(tok) == "x" ? 1.0 : 0.0));
  }

  SUBCASE("numerical w = 1/x - 1 is exact at every annotated x") {
    const craft::BasisDirection x{"x", std::nullopt};
    const craft::BasisDirection w{"w", std::nullopt};
    std::vector<std::pair<double, Value>> samples;
    for (int k = 0; k <= 5; ++k) samples.emplace_back(1.0 / (1 + k), Value(1.0 / (1.0 / (1 + k)) - 1));
    const auto m = discretizing_mlp("w", x, samples, craft::VectorSpace({w}), Encoding::numerical, opts, 1.0);
    const craft::VectorSpace space({x, craft::kOne, craft::kBos, w});
    for (int k = 0; k <= 5; ++k) {
      Eigen::MatrixXd row(1, 4);
      row << 1.0 / (1 + k), 1, 0, 0;
      CHECK(craft::mlp_apply(m, row, space)(0, 3) == doctest::Approx(k).epsilon(1e-12));
    }
    Eigen::MatrixXd bos(1, 4);
    bos << 1, 1, 1, 0;
    CHECK(craft::mlp_apply(m, bos, space).isZero());
  }

  SUBCASE("constant map") {
    auto cg = build_graph(frontend::parse("return numerical(map((v) -> 7, tokens))"));
    infer_values(cg, opts);
    const auto m = lower_map(cg, cg.output(), opts);
    const craft::VectorSpace space = craft::direct_sum(m.w1.input, m.w2.output);
    for (const char* tok : {"a", "b", "c", "x"}) {
      Eigen::MatrixXd row = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(space.size()));
      row(0, static_cast<Eigen::Index>(space.index_of({"tokens", Value(tok)}))) = 1;
      row(0, static_cast<Eigen::Index>(space.index_of(craft::kOne))) = 1;
      CHECK(craft::mlp_apply(m, row, space).sum() == doctest::Approx(7.0));
    }
  }
}

TEST_CASE("allocate_layers") {
  auto slots = [](const Program& p) {
    const auto g = build_graph(p);
    return std::pair{g, allocate_layers(g)};
  };
  SUBCASE("frac_prevs: two blocks, attention 1 and MLP 2 idle") {
    auto [g, a] = slots(frontend::load_builtin("frac_prevs"));
    CHECK(a.num_layers() == 2);
    CHECK(a.slot.at(g.program.find_sop("is_x")->index) == 1);
    CHECK(a.slot.at(g.program.find_sop("frac_prevs")->index) == 2);
  }
  SUBCASE("sort: key shift MLP, selector_width pair, move head") {
    auto [g, a] = slots(frontend::load_builtin("sort", {{"min_key", "1"}, {"context_length", "5"}}));
    CHECK(a.slot.at(g.program.find_sop("keys")->index) == 1);
    CHECK(a.attention_slot.at(g.program.find_sop("target_pos")->index) == 2);
    CHECK(a.slot.at(g.program.find_sop("target_pos")->index) == 3);
    CHECK(a.slot.at(g.program.find_sop("sort")->index) == 4);
    CHECK(a.num_layers() == 3);
  }
  SUBCASE("pair_balance: both frac_prevs heads share one attention layer") {
    auto [g, a] = slots(frontend::load_builtin("pair_balance"));
    CHECK(a.slot.at(g.program.find_sop("opens")->index) == 2);
    CHECK(a.slot.at(g.program.find_sop("closes")->index) == 2);
    CHECK(a.num_layers() == 2);
  }
  SUBCASE("independent maps share a slot in either order") {
    const auto o = options_for(numbers({1, 2, 3}), 4);
    const Program p1 = frontend::parse("a = tokens + 1\nb = indices * 2\nreturn map2((x, y) -> x + y, a, b)");
    const Program p2 = frontend::parse("b = indices * 2\na = tokens + 1\nreturn map2((x, y) -> x + y, a, b)");
    auto [g1, a1] = slots(p1);
    CHECK(a1.slot.at(g1.program.find_sop("a")->index) == a1.slot.at(g1.program.find_sop("b")->index));
    const auto m1 = compile(p1, o);
    const auto m2 = compile(p2, o);
    for_each_input(o.vocab, 3, [&](const ValueSeq& in) { CHECK(run(m1, in) == run(m2, in)); });
  }
}

TEST_CASE("property: every edge goes to a later slot of the right parity") {
  for (const auto& c : builtin_cases()) {
    const auto g = build_graph(frontend::load_builtin(c.name, c.params));
    const auto a = allocate_layers(g);
    const Program& p = g.program;
    auto slot_of = [&](SOpId id) { return a.slot.count(id.index) ? a.slot.at(id.index) : -1; };
    for (const auto& n : g.nodes) {
      const auto* id = std::get_if<SOpId>(&n.ref);
      if (!id || !a.slot.count(id->index)) continue;
      const SOpNode& node = p.sop(*id);
      const int first = a.attention_slot.count(id->index) ? a.attention_slot.at(id->index) : a.slot.at(id->index);
      const bool attention = node.kind == SOpKind::aggregate || node.kind == SOpKind::selector_width;
      CHECK((first % 2 == 0) == attention);
      std::vector<SOpId> inputs = node.operands;
      if (node.selector) {
        inputs.push_back(p.selector(*node.selector).keys);
        inputs.push_back(p.selector(*node.selector).queries);
      }
      for (SOpId in : inputs) CHECK(slot_of(in) < first);
    }
  }
}

TEST_CASE("compile: residual sizes") {
  const auto m5 = compile(frontend::load_builtin("frac_prevs"), frac_options(5));
  CHECK(m5.config.residual_dim == 13);
  const auto m6 = compile(frontend::load_builtin("frac_prevs"), frac_options(6));
  CHECK(m6.config.residual_dim == 14);
  const auto input_dims = std::count_if(m6.residual_labels.begin(), m6.residual_labels.end(), [](const std::string& l) {
    return l.rfind("tokens", 0) == 0 || l.rfind("indices", 0) == 0 || l == "one";
  });
  CHECK(input_dims == 12);
  CHECK(m6.residual_labels[12] == "is_x");
  CHECK(m6.residual_labels[13] == "frac_prevs");
}

TEST_CASE("compile: return tokens is the identity") {
  const auto o = frac_options();
  const auto m = compile(frontend::parse("return tokens"), o);
  CHECK(m.config.num_layers == 0);
  for_each_input(o.vocab, 4, [&](const ValueSeq& in) { CHECK(run(m, in) == in); });
}

TEST_CASE("compiled examples") {
  const auto fp = run(compile(frontend::load_builtin("frac_prevs"), frac_options()), chars("xacx"));
  const double want[] = {1, 0.5, 1.0 / 3, 0.5};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(fp[static_cast<std::size_t>(i)].as_number() - want[i]) < 1e-4);

  const auto su = compile(frontend::load_builtin("sort_unique"), options_for(numbers({1, 2, 3, 4, 5}), 6));
  CHECK(run(su, numbers({4, 2, 5, 1, 3})) == numbers({1, 2, 3, 4, 5}));

  const auto ones = compile(frontend::parse("s = select(tokens, tokens, true)\nreturn numerical(aggregate(s, numerical(map((v) -> 1, tokens))))"),
                            frac_options());
  CHECK(run(ones, chars("abc")) == numbers({1, 1, 1}));

  const auto width = compile(frontend::parse("return selector_width(select(tokens, tokens, true))"), frac_options());
  CHECK(run(width, chars("abc")) == numbers({3, 3, 3}));
  const auto none = compile(frontend::parse("return selector_width(select(tokens, tokens, (k, q) -> false))"), frac_options());
  CHECK(run(none, chars("abc")) == numbers({0, 0, 0}));
}

TEST_CASE("oracle sweep over builtins") {
  for (const auto& c : builtin_cases()) {
    INFO(c.name);
    sweep(c, false, c.max_len);
  }
}

TEST_CASE("oracle sweep with causal attention") {
  for (const auto& c : builtin_cases()) {
    if (c.name == "dyck_n") continue;  // reads the whole sequence by design
    INFO(c.name);
    sweep(c, true, c.max_len);
  }
}

TEST_CASE("factorization reproduces the craft bilinear and OV maps") {
  for (const auto& c : builtin_cases()) {
    const auto r = compile_detailed(frontend::load_builtin(c.name, c.params), options_for(c.vocab, c.max_seq_len));
    const auto& residual = r.craft.residual;
    for (std::size_t slot = 0; slot < r.craft.layers.size(); slot += 2) {
      const auto& heads = std::get<std::vector<craft::CraftAttentionHead>>(r.craft.layers[slot].block);
      const auto& layer = r.model.weights.attention[slot / 2];
      REQUIRE(layer.heads.size() == heads.size());
      for (std::size_t h = 0; h < heads.size(); ++h) {
        const auto& w = layer.heads[h];
        const Eigen::MatrixXd qk = w.w_q * w.w_k.transpose() / std::sqrt(static_cast<double>(w.w_k.cols()));
        const Eigen::MatrixXd ov = w.w_v * w.w_o;
        CHECK((qk - heads[h].w_qk.embedded(residual, residual)).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((ov - heads[h].w_ov.embedded(residual, residual)).cwiseAbs().maxCoeff() <= 1e-12);
      }
    }
  }
}

TEST_CASE("craft-level forward matches the compiled transformer") {
  const auto c = builtin_cases()[1];
  const auto r = compile_detailed(frontend::load_builtin(c.name, c.params), options_for(c.vocab, c.max_seq_len));
  for_each_input(c.vocab, 3, [&](const ValueSeq& in) {
    const auto states = r.craft.forward(craft_embed(r, in), false);
    Trace trace;
    forward(r.model, in, &trace);
    REQUIRE(states.size() == trace.residuals.size());
    for (std::size_t k = 0; k < states.size(); ++k) {
      CHECK((states[k] - trace.residuals[k]).cwiseAbs().maxCoeff() < 1e-9);
    }
  });
}

TEST_CASE("every s-op subspace is zero at BOS") {
  for (const auto& c : builtin_cases()) {
    const auto m = compile(frontend::load_builtin(c.name, c.params), options_for(c.vocab, c.max_seq_len));
    Trace trace;
    forward(m, ValueSeq{c.vocab[0], c.vocab.back()}, &trace);
    const auto& last = trace.residuals.back();
    for (std::size_t d = 0; d < m.residual_labels.size(); ++d) {
      const auto& l = m.residual_labels[d];
      if (l.rfind("tokens", 0) == 0 || l == "one" || l.find("_selector_width_attn_output") != std::string::npos) continue;
      CHECK_MESSAGE(std::abs(last(0, static_cast<Eigen::Index>(d))) < 1e-9, c.name << " " << l);
    }
  }
}

TEST_CASE("compile errors") {
  const auto o = frac_options();
  auto fails = [&](const std::string& src, const std::string& needle) {
    try {
      compile(frontend::parse(src), o);
      FAIL_CHECK("expected a compile error for: " << src);
    } catch (const CompileError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, std::string(e.what()));
    }
  };
  fails("s = select(indices, indices, <=)\nreturn aggregate(s, tokens)", "can average distinct values");
  fails("v = numerical(map((t) -> if t == \"a\" then 1 else if t == \"b\" then 2 else 0, tokens))\n"
        "s = select(indices, indices, <=)\nreturn numerical(aggregate(s, v))",
        "at most one non-zero value");
  fails("n = numerical(map((t) -> 1, tokens))\ns = select(n, indices, ==)\nreturn selector_width(s)", "must be categorical");
  fails("n = numerical(map((t) -> 1, tokens))\nreturn map2((a, b) -> a, n, indices)", "mixing a numerical and a categorical");
  fails("n = numerical(map((t) -> if t == \"x\" then 1 else 0, tokens))\n"
        "return numerical(map2((a, b) -> a * b, n, numerical(n + 0)))",
        "must be linear");
  CompileOptions small = o;
  small.max_hidden = 3;
  CHECK_THROWS_AS(compile(frontend::load_builtin("frac_prevs"), small), CompileError);
  CompileOptions bad = o;
  bad.vocab.push_back(Value("bos"));
  CHECK_THROWS_AS(compile(frontend::load_builtin("frac_prevs"), bad), CompileError);
}

TEST_CASE("constants embed per position") {
  const auto o = frac_options();
  const auto m = compile(frontend::parse("s = select(indices, [1, 0, 2, 3], <)\nreturn selector_width(s)"), o);
  CHECK(run(m, chars("abc")) == numbers({1, 0, 2}));
  const auto k = compile(frontend::parse("return numerical(map2((a, b) -> a + b, numerical([2]), numerical(indices + 0)))"), o);
  CHECK(run(k, chars("abc")) == numbers({2, 3, 4}));
}
