// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rasp_forge/rasp/program.hpp"

namespace rasp_forge {

struct EvalOptions {
  bool causal = false;
  // When non-empty, every input token must be one of these.
  std::vector<Value> vocab;
};

/// Binary N x N selection matrix; row = query position, column = key position.
struct SelectorMatrix {
  std::size_t size = 0;
  std::vector<std::uint8_t> cells;

  explicit SelectorMatrix(std::size_t n = 0) : size(n), cells(n * n, 0) {}
  bool operator()(std::size_t row, std::size_t col) const { return cells[row * size + col] != 0; }
  void set(std::size_t row, std::size_t col, bool v) { cells[row * size + col] = v ? 1 : 0; }
  std::vector<std::vector<int>> rows() const;
};

/// Averages `values` along each selector row. Empty rows give None; numerical
/// aggregation reads None as 0; categorical aggregation rejects rows that mix
/// distinct values.
ValueSeq aggregate_rows(const SelectorMatrix& selection, const ValueSeq& values, Encoding encoding);

/// Memoising evaluator for one (program, input) pair.
class Evaluator {
 public:
  Evaluator(const Program& program, std::span<const Value> tokens, const EvalOptions& options = {});

  const ValueSeq& sop(SOpId id);
  const SelectorMatrix& selector(SelectorId id);
  std::size_t length() const { return tokens_.size(); }

 private:
  ValueSeq compute(SOpId id);
  SelectorMatrix compute(SelectorId id);

  const Program& program_;
  std::vector<Value> tokens_;
  EvalOptions options_;
  std::vector<std::optional<ValueSeq>> sop_cache_;
  std::vector<std::optional<SelectorMatrix>> selector_cache_;
  std::vector<std::uint8_t> sop_active_;
  std::vector<std::uint8_t> selector_active_;
};

ValueSeq eval_sop(const Program& program, SOpId id, std::span<const Value> tokens, const EvalOptions& options = {});
/// Evaluates the program's output s-op.
ValueSeq evaluate(const Program& program, std::span<const Value> tokens, const EvalOptions& options = {});
SelectorMatrix eval_selector(const Program& program, SelectorId id, std::span<const Value> tokens,
                             const EvalOptions& options = {});

}  // namespace rasp_forge
