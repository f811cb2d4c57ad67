// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rasp_forge {

/// A single RASP value: None, boolean, number or token string.
class Value {
 public:
  Value() = default;
  Value(bool b) : storage_(b) {}
  Value(double d) : storage_(d) {}
  Value(int i) : storage_(static_cast<double>(i)) {}
  Value(std::string s) : storage_(std::move(s)) {}
  Value(const char* s) : storage_(std::string(s)) {}

  bool is_none() const { return storage_.index() == 0; }
  bool is_bool() const { return storage_.index() == 1; }
  bool is_number() const { return storage_.index() == 2; }
  bool is_string() const { return storage_.index() == 3; }
  // Booleans take part in arithmetic as 0/1.
  bool is_numeric() const { return is_bool() || is_number(); }

  bool as_bool() const;
  double as_number() const;
  const std::string& as_string() const;

  /// Label text used in residual-stream labels and CLI output.
  std::string to_string() const;

  friend bool operator==(const Value&, const Value&) = default;
  // Arbitrary but total: orders by kind first, then by payload.
  friend std::strong_ordering operator<=>(const Value& a, const Value& b);

 private:
  std::variant<std::monostate, bool, double, std::string> storage_;
};

using ValueSeq = std::vector<Value>;

/// Reads None as 0 for numerical consumers.
double numeric_or_zero(const Value& v);

/// Shortest decimal that round-trips to the same double.
std::string format_number(double v);
/// Round to `digits` significant digits, then print the shortest form.
std::string format_number_display(double v, int digits);
std::optional<double> parse_number(std::string_view text);

/// Vocabularies whose every entry parses as a number are numeric.
std::vector<Value> make_vocab(std::span<const std::string> entries);
std::string format_values(std::span<const Value> values);

}  // namespace rasp_forge
