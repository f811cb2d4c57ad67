// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

#include "rasp_forge/rasp/program.hpp"

namespace rasp_forge::frontend {

/// Parses `.rasp` source into a validated program.
///
///   program    := { statement }
///   statement  := NAME "=" expr [";"] | "return" expr [";"]
///   expr       := infix expression over s-ops, selectors and literals
///   calls      := select(e, e, pred) | aggregate(sel, e) | selector_width(sel)
///               | map((v) -> scalar, e) | map2((v, w) -> scalar, e, e)
///               | numerical(e) | categorical(e)
///   pred       := == | != | < | <= | > | >= | true | (k, q) -> scalar
///
/// Infix operators between s-ops and literals desugar to map/map2; `and`,
/// `or` and `not` between selectors build compound selectors, which
/// validation either simplifies or rejects. `[1, 0, 2]` is a constant
/// s-op. `length` is predefined as selector_width(select(tokens, tokens, true)).
/// Without a `return`, the last assigned s-op is the output.
///
/// Throws ParseError (with line/column) or ValidationError.
Program parse(std::string_view source);

/// Parses without running validation.
Program parse_unvalidated(std::string_view source);

/// Prints a program in the dialect accepted by parse().
std::string pretty_print(const Program& program);

}  // namespace rasp_forge::frontend
