// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "rasp_forge/compiler/compiler.hpp"
#include "rasp_forge/errors.hpp"
#include "rasp_forge/rasp/interpreter.hpp"

namespace rasp_forge::compiler {

namespace {

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

ValueSet normalize(std::vector<Value> values, Encoding encoding) {
  if (encoding == Encoding::numerical) {
    std::vector<double> xs;
    for (const auto& v : values) {
      if (!v.is_none()) xs.push_back(v.as_number());
    }
    std::sort(xs.begin(), xs.end());
    ValueSet out;
    for (double x : xs) {
      if (out.empty() || !close(out.back().as_number(), x)) out.emplace_back(x);
    }
    return out;
  }
  std::erase_if(values, [](const Value& v) { return v.is_none(); });
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

Value apply(const SOpNode& node, std::span<const Value> args) {
  try {
    return (*node.fn)(args);
  } catch (const EvalError& e) {
    std::string shown;
    for (const auto& a : args) shown += (shown.empty() ? "" : ", ") + a.to_string();
    throw CompileError("'" + node.name + "' cannot be evaluated on (" + shown + "): " + e.what());
  }
}

// True when each query row can select at most one key.
bool selects_at_most_one(const Program& p, SelectorId id) {
  const auto& sel = p.selector(id);
  return sel.predicate.op == Comparison::eq && p.sop(sel.keys).kind == SOpKind::indices;
}

void check_single_value(const CompGraph& graph, SOpId id, const CompileOptions& options) {
  const Program& p = graph.program;
  const SOpNode& node = p.sop(id);
  if (selects_at_most_one(p, *node.selector)) {
    return;
  }
  const std::size_t vocab = options.vocab.size();
  const int max_len = options.max_seq_len - 1;
  std::size_t total = 0;
  std::size_t per_len = 1;
  for (int len = 1; len <= max_len; ++len) {
    per_len *= vocab;
    total += per_len;
    if (total > options.max_exhaustive_inputs) {
      throw CompileError("categorical aggregate '" + node.name +
                         "': cannot prove each query selects a single value (more than " +
                         std::to_string(options.max_exhaustive_inputs) + " inputs to check); make it numerical");
    }
  }
  EvalOptions eval_options;
  eval_options.causal = options.causal;
  for (int len = 1; len <= max_len; ++len) {
    std::vector<std::size_t> digits(static_cast<std::size_t>(len), 0);
    ValueSeq input(static_cast<std::size_t>(len));
    while (true) {
      for (int i = 0; i < len; ++i) input[static_cast<std::size_t>(i)] = options.vocab[digits[static_cast<std::size_t>(i)]];
      Evaluator ev(p, input, eval_options);
      std::optional<SelectorMatrix> selection;
      std::optional<ValueSeq> values;
      try {
        selection = ev.selector(*node.selector);
        values = ev.sop(node.operands[0]);
      } catch (const EvalError&) {
        // The program fails on this input anyway.
      }
      if (selection) {
        try {
          aggregate_rows(*selection, *values, Encoding::categorical);
        } catch (const EvalError& e) {
          throw CompileError("categorical aggregate '" + node.name + "' can average distinct values (input " +
                             format_values(input) + ": " + e.what() + "); make it numerical");
        }
      }
      std::size_t k = 0;
      while (k < digits.size() && ++digits[k] == vocab) digits[k++] = 0;
      if (k == digits.size()) break;
    }
  }
}

}  // namespace

void infer_values(CompGraph& graph, const CompileOptions& options) {
  const Program& p = graph.program;
  const int msl = options.max_seq_len;
  for (auto& gn : graph.nodes) {
    const auto* id = std::get_if<SOpId>(&gn.ref);
    if (!id) continue;
    const SOpNode& node = p.sop(*id);
    std::vector<Value> raw;
    switch (node.kind) {
      case SOpKind::tokens:
        raw = options.vocab;
        break;
      case SOpKind::indices:
        for (int i = 0; i < msl; ++i) raw.emplace_back(i);
        break;
      case SOpKind::constant:
        raw = node.constant;
        break;
      case SOpKind::map:
        for (const auto& v : graph.values(node.operands[0])) raw.push_back(apply(node, std::span(&v, 1)));
        break;
      case SOpKind::sequence_map:
        for (const auto& a : graph.values(node.operands[0])) {
          for (const auto& b : graph.values(node.operands[1])) {
            const Value args[] = {a, b};
            raw.push_back(apply(node, args));
          }
        }
        break;
      case SOpKind::aggregate: {
        const ValueSet& in = graph.values(node.operands[0]);
        if (node.encoding == Encoding::categorical) {
          check_single_value(graph, *id, options);
          raw = in;
          break;
        }
        std::optional<double> v;
        for (const auto& x : in) {
          const double d = x.as_number();
          if (d == 0.0) continue;
          if (v && !close(*v, d)) {
            throw CompileError("numerical aggregate '" + node.name + "' needs a value s-op taking at most one "
                               "non-zero value; '" + p.sop(node.operands[0]).name + "' can be " +
                               format_values(in));
          }
          v = d;
        }
        raw.emplace_back(0.0);
        if (v) {
          for (int n = 1; n <= msl; ++n) {
            for (int k = 1; k <= n; ++k) raw.emplace_back(*v * k / n);
          }
        }
        break;
      }
      case SOpKind::selector_width:
        for (int i = 0; i <= msl; ++i) raw.emplace_back(i);
        break;
    }
    gn.values = normalize(std::move(raw), node.encoding);
  }
}

}  // namespace rasp_forge::compiler
