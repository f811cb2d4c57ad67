// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "rasp_forge/rasp/program.hpp"

namespace rasp_forge::frontend {

using BuiltinParams = std::map<std::string, std::string>;

struct BuiltinInfo {
  std::string name;
  std::vector<std::string> required;
  // Optional parameter -> default value.
  std::vector<std::pair<std::string, std::string>> optional;
  std::string summary;
};

const std::vector<BuiltinInfo>& list_builtins();

/// Source text of a builtin in the textual dialect, with parameters applied.
/// Throws CompileError for unknown names, missing or unknown parameters.
std::string builtin_source(const std::string& name, const BuiltinParams& params = {});

/// parse(builtin_source(name, params)).
Program load_builtin(const std::string& name, const BuiltinParams& params = {});

}  // namespace rasp_forge::frontend
