// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rasp_forge/rasp/interpreter.hpp"

#include <algorithm>
#include <array>

#include "rasp_forge/errors.hpp"

namespace rasp_forge {

std::vector<std::vector<int>> SelectorMatrix::rows() const {
  std::vector<std::vector<int>> out(size, std::vector<int>(size, 0));
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      out[i][j] = (*this)(i, j) ? 1 : 0;
    }
  }
  return out;
}

ValueSeq aggregate_rows(const SelectorMatrix& selection, const ValueSeq& values, Encoding encoding) {
  if (values.size() != selection.size) {
    throw EvalError("aggregate: selector and values differ in length");
  }
  ValueSeq out(values.size());
  for (std::size_t i = 0; i < selection.size; ++i) {
    std::size_t count = 0;
    if (encoding == Encoding::numerical) {
      double sum = 0.0;
      for (std::size_t j = 0; j < selection.size; ++j) {
        if (selection(i, j)) {
          sum += numeric_or_zero(values[j]);
          ++count;
        }
      }
      if (count > 0) {
        out[i] = Value(sum / static_cast<double>(count));
      }
      continue;
    }
    const Value* chosen = nullptr;
    for (std::size_t j = 0; j < selection.size; ++j) {
      if (!selection(i, j)) {
        continue;
      }
      if (chosen != nullptr && !(*chosen == values[j])) {
        throw EvalError("categorical aggregate averages distinct values " + chosen->to_string() + " and " +
                        values[j].to_string() + " at position " + std::to_string(i));
      }
      chosen = &values[j];
    }
    if (chosen != nullptr) {
      out[i] = *chosen;
    }
  }
  return out;
}

Evaluator::Evaluator(const Program& program, std::span<const Value> tokens, const EvalOptions& options)
    : program_(program),
      tokens_(tokens.begin(), tokens.end()),
      options_(options),
      sop_cache_(program.sop_count()),
      selector_cache_(program.selector_count()),
      sop_active_(program.sop_count(), 0),
      selector_active_(program.selector_count(), 0) {
  if (!options_.vocab.empty()) {
    for (const auto& t : tokens_) {
      if (std::find(options_.vocab.begin(), options_.vocab.end(), t) == options_.vocab.end()) {
        throw EvalError("token not in vocabulary: " + t.to_string());
      }
    }
  }
}

const ValueSeq& Evaluator::sop(SOpId id) {
  if (id.index >= sop_cache_.size()) {
    throw EvalError("dangling s-op reference");
  }
  auto& slot = sop_cache_[id.index];
  if (!slot) {
    if (sop_active_[id.index]) {
      throw EvalError("cycle through s-op '" + program_.sop(id).name + "'");
    }
    sop_active_[id.index] = 1;
    slot = compute(id);
    sop_active_[id.index] = 0;
  }
  return *slot;
}

const SelectorMatrix& Evaluator::selector(SelectorId id) {
  if (id.index >= selector_cache_.size()) {
    throw EvalError("dangling selector reference");
  }
  auto& slot = selector_cache_[id.index];
  if (!slot) {
    if (selector_active_[id.index]) {
      throw EvalError("cycle through selector '" + program_.selector(id).name + "'");
    }
    selector_active_[id.index] = 1;
    slot = compute(id);
    selector_active_[id.index] = 0;
  }
  return *slot;
}

ValueSeq Evaluator::compute(SOpId id) {
  const SOpNode& node = program_.sop(id);
  const std::size_t n = tokens_.size();
  // Categorical None propagates; numerical None reads as 0.
  auto operand_value = [&](SOpId operand, std::size_t i, bool& missing) -> Value {
    const Value& v = sop(operand)[i];
    if (v.is_none()) {
      if (program_.sop(operand).encoding == Encoding::categorical) {
        missing = true;
      }
      return Value(0.0);
    }
    return v;
  };

  switch (node.kind) {
    case SOpKind::tokens:
      return tokens_;
    case SOpKind::indices: {
      ValueSeq out;
      out.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        out.emplace_back(static_cast<double>(i));
      }
      return out;
    }
    case SOpKind::constant: {
      if (node.constant.size() == 1) {
        return ValueSeq(n, node.constant.front());
      }
      if (node.constant.size() < n) {
        throw EvalError("constant sequence '" + node.name + "' has length " + std::to_string(node.constant.size()) +
                        " but the input has length " + std::to_string(n));
      }
      return ValueSeq(node.constant.begin(), node.constant.begin() + static_cast<std::ptrdiff_t>(n));
    }
    case SOpKind::map: {
      ValueSeq out(n);
      for (std::size_t i = 0; i < n; ++i) {
        bool missing = false;
        const Value arg = operand_value(node.operands.at(0), i, missing);
        if (!missing) {
          out[i] = (*node.fn)(arg);
        }
      }
      return out;
    }
    case SOpKind::sequence_map: {
      ValueSeq out(n);
      for (std::size_t i = 0; i < n; ++i) {
        bool missing = false;
        const Value a = operand_value(node.operands.at(0), i, missing);
        const Value b = operand_value(node.operands.at(1), i, missing);
        if (!missing) {
          out[i] = (*node.fn)(a, b);
        }
      }
      return out;
    }
    case SOpKind::aggregate:
      return aggregate_rows(selector(*node.selector), sop(node.operands.at(0)), node.encoding);
    case SOpKind::selector_width: {
      const SelectorMatrix& m = selector(*node.selector);
      ValueSeq out(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t count = 0;
        for (std::size_t j = 0; j < n; ++j) {
          count += m(i, j) ? 1 : 0;
        }
        out[i] = Value(static_cast<double>(count));
      }
      return out;
    }
  }
  throw EvalError("unknown s-op kind");
}

SelectorMatrix Evaluator::compute(SelectorId id) {
  const SelectorNode& node = program_.selector(id);
  const std::size_t n = tokens_.size();
  SelectorMatrix m(n);
  switch (node.kind) {
    case SelectorKind::select: {
      const ValueSeq& keys = sop(node.keys);
      const ValueSeq& queries = sop(node.queries);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          m.set(i, j, node.predicate(keys[j], queries[i]));
        }
      }
      break;
    }
    case SelectorKind::conjunction:
    case SelectorKind::disjunction: {
      const SelectorMatrix& a = selector(node.lhs);
      const SelectorMatrix& b = selector(node.rhs);
      for (std::size_t k = 0; k < m.cells.size(); ++k) {
        m.cells[k] = node.kind == SelectorKind::conjunction ? (a.cells[k] & b.cells[k]) : (a.cells[k] | b.cells[k]);
      }
      break;
    }
    case SelectorKind::negation: {
      const SelectorMatrix& a = selector(node.lhs);
      for (std::size_t k = 0; k < m.cells.size(); ++k) {
        m.cells[k] = a.cells[k] ? 0 : 1;
      }
      break;
    }
  }
  if (options_.causal) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        m.set(i, j, false);
      }
    }
  }
  return m;
}

ValueSeq eval_sop(const Program& program, SOpId id, std::span<const Value> tokens, const EvalOptions& options) {
  Evaluator ev(program, tokens, options);
  return ev.sop(id);
}

ValueSeq evaluate(const Program& program, std::span<const Value> tokens, const EvalOptions& options) {
  if (!program.output()) {
    throw EvalError("program has no output s-op");
  }
  return eval_sop(program, *program.output(), tokens, options);
}

SelectorMatrix eval_selector(const Program& program, SelectorId id, std::span<const Value> tokens,
                             const EvalOptions& options) {
  Evaluator ev(program, tokens, options);
  return ev.selector(id);
}

}  // namespace rasp_forge
