// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rasp_forge/rasp/value.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <system_error>

#include "rasp_forge/errors.hpp"

namespace rasp_forge {

ValidationError::ValidationError(std::vector<std::string> errors)
    : std::runtime_error([&] {
        std::string msg = "validation failed";
        for (const auto& e : errors) {
          msg += "; " + e;
        }
        return msg;
      }()),
      errors_(std::move(errors)) {}

ParseError::ParseError(const std::string& message, int line, int column)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

bool Value::as_bool() const {
  if (is_bool()) {
    return std::get<bool>(storage_);
  }
  if (is_number()) {
    return std::get<double>(storage_) != 0.0;
  }
  throw EvalError("expected a boolean, got " + to_string());
}

double Value::as_number() const {
  if (is_number()) {
    return std::get<double>(storage_);
  }
  if (is_bool()) {
    return std::get<bool>(storage_) ? 1.0 : 0.0;
  }
  throw EvalError("expected a number, got " + (is_none() ? std::string("None") : "\"" + to_string() + "\""));
}

const std::string& Value::as_string() const {
  if (!is_string()) {
    throw EvalError("expected a token string, got " + to_string());
  }
  return std::get<std::string>(storage_);
}

std::string Value::to_string() const {
  switch (storage_.index()) {
    case 0:
      return "None";
    case 1:
      return std::get<bool>(storage_) ? "true" : "false";
    case 2:
      return format_number(std::get<double>(storage_));
    default:
      return std::get<std::string>(storage_);
  }
}

std::strong_ordering operator<=>(const Value& a, const Value& b) {
  if (a.storage_.index() != b.storage_.index()) {
    return a.storage_.index() <=> b.storage_.index();
  }
  switch (a.storage_.index()) {
    case 0:
      return std::strong_ordering::equal;
    case 1:
      return std::get<bool>(a.storage_) <=> std::get<bool>(b.storage_);
    case 2: {
      const double x = std::get<double>(a.storage_);
      const double y = std::get<double>(b.storage_);
      if (x < y) return std::strong_ordering::less;
      if (y < x) return std::strong_ordering::greater;
      return std::strong_ordering::equal;
    }
    default:
      return std::get<std::string>(a.storage_) <=> std::get<std::string>(b.storage_);
  }
}

double numeric_or_zero(const Value& v) { return v.is_none() ? 0.0 : v.as_number(); }

std::string format_number(double v) {
  if (v == 0.0) {
    return "0";  // also folds -0
  }
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) {
    return std::to_string(v);
  }
  return std::string(buf, end);
}

std::string format_number_display(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  const auto rounded = parse_number(buf);
  return format_number(rounded ? *rounded : v);
}

std::optional<double> parse_number(std::string_view text) {
  if (text.empty()) {
    return std::nullopt;
  }
  if (text.front() == '+') {
    text.remove_prefix(1);
  }
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(out)) {
    return std::nullopt;
  }
  return out;
}

std::vector<Value> make_vocab(std::span<const std::string> entries) {
  bool numeric = !entries.empty();
  for (const auto& e : entries) {
    numeric = numeric && parse_number(e).has_value();
  }
  std::vector<Value> vocab;
  vocab.reserve(entries.size());
  for (const auto& e : entries) {
    vocab.push_back(numeric ? Value(*parse_number(e)) : Value(e));
  }
  return vocab;
}

std::string format_values(std::span<const Value> values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += values[i].to_string();
  }
  return out + "]";
}

}  // namespace rasp_forge
