// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rasp_forge/frontend/builtins.hpp"

#include <algorithm>
#include <sstream>

#include "rasp_forge/errors.hpp"
#include "rasp_forge/frontend/parser.hpp"

namespace rasp_forge::frontend {

namespace {

// A parameter used as a token literal: numbers stay numbers, anything else
// becomes a quoted string.
std::string token_literal(const std::string& raw) {
  if (parse_number(raw)) {
    return raw;
  }
  return ScalarExpr::literal(Value(raw)).to_source({});
}

std::string number_literal(const std::string& key, const std::string& raw) {
  auto v = parse_number(raw);
  if (!v) {
    throw CompileError("builtin parameter '" + key + "' must be a number, got '" + raw + "'");
  }
  return format_number(*v);
}

std::string sop_param(const std::string& key, const std::string& raw) {
  if (raw != "tokens" && raw != "indices") {
    throw CompileError("builtin parameter '" + key + "' must be 'tokens' or 'indices', got '" + raw + "'");
  }
  return raw;
}

bool flag_param(const std::string& key, const std::string& raw) {
  if (raw == "true" || raw == "1") return true;
  if (raw == "false" || raw == "0") return false;
  throw CompileError("builtin parameter '" + key + "' must be true or false, got '" + raw + "'");
}

// Emits one frac_prevs-style pair balance; names get `suffix`.
void emit_pair_balance(std::ostringstream& out, const std::string& open, const std::string& close,
                       const std::string& suffix, const std::string& result) {
  out << "bools_open" << suffix << " = numerical(tokens == " << token_literal(open) << ");\n"
      << "prevs_open" << suffix << " = select(indices, indices, <=);\n"
      << "opens" << suffix << " = numerical(aggregate(prevs_open" << suffix << ", bools_open" << suffix << "));\n"
      << "bools_close" << suffix << " = numerical(tokens == " << token_literal(close) << ");\n"
      << "prevs_close" << suffix << " = select(indices, indices, <=);\n"
      << "closes" << suffix << " = numerical(aggregate(prevs_close" << suffix << ", bools_close" << suffix << "));\n"
      << result << " = numerical(opens" << suffix << " - closes" << suffix << ");\n";
}

std::vector<std::string> split_pairs(const std::string& raw) {
  std::vector<std::string> pairs;
  std::string current;
  for (char c : raw) {
    if (c == ',' && current.size() == 2) {
      pairs.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  pairs.push_back(current);
  for (const auto& p : pairs) {
    if (p.size() != 2) {
      throw CompileError("dyck_n pairs must be two-character strings such as \"(),{}\", got '" + raw + "'");
    }
  }
  return pairs;
}

std::string frac_prevs(const BuiltinParams& p) {
  std::ostringstream out;
  out << "is_x = numerical(tokens == " << token_literal(p.at("token")) << ");\n"
      << "prevs = select(indices, indices, <=);\n"
      << "frac_prevs = numerical(aggregate(prevs, is_x));\n"
      << "return frac_prevs;\n";
  return out.str();
}

// The printed listing selects with `<=`, which counts each token itself and
// shifts every target position by one; `listing=true` keeps that form.
std::string sort_unique(const BuiltinParams& p) {
  const bool listing = flag_param("listing", p.at("listing"));
  std::ostringstream out;
  out << "smaller = select(" << sop_param("keys", p.at("keys")) << ", " << p.at("keys") << ", "
      << (listing ? "<=" : "<") << ");\n"
      << "target_pos = selector_width(smaller);\n"
      << "sel_sort = select(target_pos, indices, ==);\n"
      << "sort = aggregate(sel_sort, " << sop_param("vals", p.at("vals")) << ");\n"
      << "return sort;\n";
  return out.str();
}

std::string sort(const BuiltinParams& p) {
  const bool listing = flag_param("listing", p.at("listing"));
  const std::string min_key = number_literal("min_key", p.at("min_key"));
  const std::string context = number_literal("context_length", p.at("context_length"));
  if (*parse_number(context) <= 0) {
    throw CompileError("builtin parameter 'context_length' must be positive");
  }
  std::ostringstream out;
  if (listing) {
    out << "keys = map2((k, i) -> (k + i + " << min_key << ") / " << context << ", "
        << sop_param("keys", p.at("keys")) << ", indices);\n";
  } else {
    out << "keys = map2((k, i) -> k + " << min_key << " * i / " << context << ", "
        << sop_param("keys", p.at("keys")) << ", indices);\n";
  }
  out << "smaller = select(keys, keys, " << (listing ? "<=" : "<") << ");\n"
      << "target_pos = selector_width(smaller);\n"
      << "sel_sort = select(target_pos, indices, ==);\n"
      << "sort = aggregate(sel_sort, " << sop_param("vals", p.at("vals")) << ");\n"
      << "return sort;\n";
  return out.str();
}

std::string pair_balance(const BuiltinParams& p) {
  std::ostringstream out;
  emit_pair_balance(out, p.at("open"), p.at("close"), "", "pair_balance");
  out << "return pair_balance;\n";
  return out.str();
}

std::string dyck_n(const BuiltinParams& p) {
  const auto pairs = split_pairs(p.at("pairs"));
  std::ostringstream out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string suffix = "_" + std::to_string(i);
    emit_pair_balance(out, pairs[i].substr(0, 1), pairs[i].substr(1, 1), suffix, "balance" + suffix);
  }
  out << "any_negative_raw = balance_0 < 0;\n";
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    out << "any_negative_raw = any_negative_raw or (balance_" << i << " < 0);\n";
  }
  out << "any_negative = numerical(map((x) -> x, any_negative_raw));\n"
      << "select_all = select(indices, indices, true);\n"
      << "has_neg = numerical(aggregate(select_all, any_negative));\n"
      << "all_zero = balance_0 == 0;\n";
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    out << "all_zero = all_zero and (balance_" << i << " == 0);\n";
  }
  out << "select_last = select(indices, length - 1, ==);\n"
      << "last_zero = categorical(aggregate(select_last, all_zero));\n"
      << "not_has_neg = not has_neg;\n"
      << "dyck_n = last_zero and not_has_neg;\n"
      << "return dyck_n;\n";
  return out.str();
}

struct Builtin {
  BuiltinInfo info;
  std::string (*make)(const BuiltinParams&);
};

const std::vector<Builtin>& registry() {
  static const std::vector<Builtin> builtins{
      {{"frac_prevs", {}, {{"token", "x"}}, "fraction of previous tokens equal to `token`"}, frac_prevs},
      {{"sort_unique", {}, {{"keys", "tokens"}, {"vals", "tokens"}, {"listing", "false"}},
        "sort `vals` by unique `keys`"},
       sort_unique},
      {{"sort", {"min_key", "context_length"}, {{"keys", "tokens"}, {"vals", "tokens"}, {"listing", "false"}},
        "sort `vals` by `keys`, breaking ties by position"},
       sort},
      {{"pair_balance", {}, {{"open", "("}, {"close", ")"}}, "fraction of `open` minus fraction of `close` so far"},
       pair_balance},
      {{"dyck_n", {}, {{"pairs", "(),{}"}}, "1 where the bracket sequence is balanced, else 0"}, dyck_n},
  };
  return builtins;
}

}  // namespace

const std::vector<BuiltinInfo>& list_builtins() {
  static const std::vector<BuiltinInfo> infos = [] {
    std::vector<BuiltinInfo> out;
    for (const auto& b : registry()) out.push_back(b.info);
    return out;
  }();
  return infos;
}

std::string builtin_source(const std::string& name, const BuiltinParams& params) {
  const auto& builtins = registry();
  auto it = std::find_if(builtins.begin(), builtins.end(), [&](const Builtin& b) { return b.info.name == name; });
  if (it == builtins.end()) {
    std::string known;
    for (const auto& b : builtins) known += (known.empty() ? "" : ", ") + b.info.name;
    throw CompileError("unknown builtin '" + name + "' (known: " + known + ")");
  }
  BuiltinParams full;
  for (const auto& [key, value] : it->info.optional) full[key] = value;
  for (const auto& [key, value] : params) {
    const bool known = std::count(it->info.required.begin(), it->info.required.end(), key) ||
                       std::any_of(it->info.optional.begin(), it->info.optional.end(),
                                   [&](const auto& kv) { return kv.first == key; });
    if (!known) {
      throw CompileError("builtin '" + name + "' has no parameter '" + key + "'");
    }
    full[key] = value;
  }
  for (const auto& key : it->info.required) {
    if (!full.count(key)) {
      throw CompileError("builtin '" + name + "' is missing required parameter '" + key + "'");
    }
  }
  return it->make(full);
}

Program load_builtin(const std::string& name, const BuiltinParams& params) {
  return parse(builtin_source(name, params));
}

}  // namespace rasp_forge::frontend
