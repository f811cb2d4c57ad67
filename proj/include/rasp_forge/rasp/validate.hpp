// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <variant>
#include <vector>

#include "rasp_forge/rasp/program.hpp"

namespace rasp_forge {

using NodeRef = std::variant<SOpId, SelectorId>;

/// Nodes reachable from the output, operands before their users.
/// Throws ValidationError on dangling references or cycles.
std::vector<NodeRef> topological_order(const Program& program);

/// Checks structure and resolves encodings. Compound selectors whose leaves
/// all read the same key and query s-ops are rewritten into one select with
/// a combined predicate; any other compound selector is rejected.
///
/// Unannotated aggregates take their value's encoding, except that an
/// aggregate over an unannotated boolean-valued map becomes numerical along
/// with that map (the mean-of-indicator idiom, e.g. frac_prevs).
Program validate(const Program& program);

}  // namespace rasp_forge
