// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rasp_forge::frontend {

enum class TokenKind { identifier, number, string, symbol, end };

struct Token {
  TokenKind kind = TokenKind::end;
  std::string text;  // identifier name, symbol text, number literal, unescaped string
  int line = 1;
  int column = 1;
};

/// Splits `.rasp` source into tokens; `#` starts a line comment.
std::vector<Token> tokenize(std::string_view source);

}  // namespace rasp_forge::frontend
