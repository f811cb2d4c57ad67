// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "rasp_forge/runtime/model.hpp"

namespace rasp_forge {

inline constexpr int kWeightFormatVersion = 1;

/// JSON weight document; doubles are written with enough digits to
/// round-trip exactly.
std::string serialize_weights(const CompiledModel& model);
/// Throws ModelError on malformed input or a version other than 1.
CompiledModel deserialize_weights(std::string_view text);

void save_weights(const CompiledModel& model, const std::filesystem::path& path);
CompiledModel load_weights(const std::filesystem::path& path);

}  // namespace rasp_forge
