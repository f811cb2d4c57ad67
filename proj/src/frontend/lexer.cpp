// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rasp_forge/frontend/lexer.hpp"

#include <array>
#include <cctype>

#include "rasp_forge/errors.hpp"

namespace rasp_forge::frontend {

namespace {

constexpr std::array<std::string_view, 5> kTwoCharSymbols{"==", "!=", "<=", ">=", "->"};
constexpr std::string_view kOneCharSymbols = "()[],;=<>+-*/&|~";

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t pos = 0;
  int line = 1;
  int col = 1;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && pos < src.size(); ++k, ++pos) {
      if (src[pos] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };

  while (pos < src.size()) {
    const char c = src[pos];
    if (c == '#') {
      while (pos < src.size() && src[pos] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Token tok;
    tok.line = line;
    tok.column = col;
    if (ident_start(c)) {
      std::size_t end = pos;
      while (end < src.size() && ident_char(src[end])) ++end;
      tok.kind = TokenKind::identifier;
      tok.text = std::string(src.substr(pos, end - pos));
      advance(end - pos);
    } else if (digit(c) || (c == '.' && pos + 1 < src.size() && digit(src[pos + 1]))) {
      std::size_t end = pos;
      while (end < src.size() && (digit(src[end]) || src[end] == '.')) ++end;
      if (end < src.size() && (src[end] == 'e' || src[end] == 'E')) {
        std::size_t exp = end + 1;
        if (exp < src.size() && (src[exp] == '+' || src[exp] == '-')) ++exp;
        if (exp < src.size() && digit(src[exp])) {
          end = exp;
          while (end < src.size() && digit(src[end])) ++end;
        }
      }
      tok.kind = TokenKind::number;
      tok.text = std::string(src.substr(pos, end - pos));
      advance(end - pos);
    } else if (c == '"' || c == '\'') {
      const char quote = c;
      advance(1);
      std::string text;
      bool closed = false;
      while (pos < src.size()) {
        const char d = src[pos];
        if (d == '\n') break;
        if (d == '\\' && pos + 1 < src.size()) {
          text += src[pos + 1];
          advance(2);
          continue;
        }
        advance(1);
        if (d == quote) {
          closed = true;
          break;
        }
        text += d;
      }
      if (!closed) {
        throw ParseError("unterminated string literal", tok.line, tok.column);
      }
      tok.kind = TokenKind::string;
      tok.text = std::move(text);
    } else {
      tok.kind = TokenKind::symbol;
      bool matched = false;
      for (auto sym : kTwoCharSymbols) {
        if (src.substr(pos, 2) == sym) {
          tok.text = std::string(sym);
          advance(2);
          matched = true;
          break;
        }
      }
      if (!matched) {
        if (kOneCharSymbols.find(c) == std::string_view::npos) {
          throw ParseError(std::string("unexpected character '") + c + "'", line, col);
        }
        tok.text = std::string(1, c);
        advance(1);
      }
    }
    out.push_back(std::move(tok));
  }
  Token end;
  end.kind = TokenKind::end;
  end.line = line;
  end.column = col;
  out.push_back(end);
  return out;
}

}  // namespace rasp_forge::frontend
