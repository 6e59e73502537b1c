#ifndef PIDE_CHECKER_LEXER_HPP
#define PIDE_CHECKER_LEXER_HPP

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "pide/document.hpp"
#include "pide/markup.hpp"

namespace pide::checker {

enum class TokenKind { keyword, ident, literal, op, delimiter, string, bad };

/// Markup name used when reporting a token class.
inline std::string_view markup_name(TokenKind kind) {
  switch (kind) {
  case TokenKind::keyword: return "keyword";
  case TokenKind::ident: return "ident";
  case TokenKind::literal: return "literal";
  case TokenKind::op: return "operator";
  case TokenKind::delimiter: return "delimiter";
  case TokenKind::string: return "string";
  case TokenKind::bad: return "bad";
  }
  return "bad";
}

struct Token {
  TokenKind kind;
  Range range;
  std::string text;

  friend bool operator==(const Token &, const Token &) = default;
};

/// Splits `source` into tokens; `base` is added to every range so nested
/// sources (string contents) keep span coordinates. Unknown characters and
/// unterminated strings become bad tokens.
inline std::vector<Token> tokenize(std::string_view source, std::size_t base = 0) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  auto push = [&](TokenKind kind, std::size_t start, std::size_t stop) {
    tokens.push_back(Token{kind, Range{base + start, base + stop},
                           std::string(source.substr(start, stop - start))});
  };
  while (i < source.size()) {
    char c = source[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
    } else if (is_word_start(c)) {
      std::size_t j = i;
      while (j < source.size() && is_word_char(source[j]))
        ++j;
      push(is_command_keyword(source.substr(i, j - i)) ? TokenKind::keyword : TokenKind::ident, i,
           j);
      i = j;
    } else if (c >= '0' && c <= '9') {
      std::size_t j = i;
      while (j < source.size() && source[j] >= '0' && source[j] <= '9')
        ++j;
      push(TokenKind::literal, i, j);
      i = j;
    } else if (c == '=' || c == '+' || c == '*') {
      push(TokenKind::op, i, i + 1);
      ++i;
    } else if (c == '(' || c == ')') {
      push(TokenKind::delimiter, i, i + 1);
      ++i;
    } else if (c == '"') {
      std::size_t close = source.find('"', i + 1);
      if (close == std::string_view::npos) {
        push(TokenKind::bad, i, source.size());
        i = source.size();
      } else {
        push(TokenKind::string, i, close + 1);
        i = close + 1;
      }
    } else {
      // One bad token per UTF-8 sequence.
      std::size_t j = i + 1;
      while (j < source.size() && (static_cast<unsigned char>(source[j]) & 0xC0) == 0x80)
        ++j;
      push(TokenKind::bad, i, j);
      i = j;
    }
  }
  return tokens;
}

/// Report body classifying each token as positioned markup.
inline Body token_report(const std::vector<Token> &tokens) {
  Body body;
  body.reserve(tokens.size());
  for (const auto &t : tokens)
    body.push_back(positioned_to_element(PositionedMarkup{t.range, std::string(markup_name(t.kind)), {}}));
  return body;
}

} // namespace pide::checker

#endif // PIDE_CHECKER_LEXER_HPP
