// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rasp_forge {

/// Raised while evaluating a RASP program (unknown token, bad operand types,
/// a categorical aggregate that would average distinct values).
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Collects every structural problem found in a program.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class CompileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Forward-pass, serialization and training failures.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rasp_forge
