#ifndef PIDE_CHECKER_SYNTAX_HPP
#define PIDE_CHECKER_SYNTAX_HPP

// Abstract syntax of the notepad calculus and its command parser.
//
//   command := let IDENT = expr | have "expr = expr" | print expr
//            | also | finally | notepad | begin | end
//   expr    := term (+ term)*
//   term    := atom (* atom)*
//   atom    := INT | IDENT | fib ( expr ) | ( expr )

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "pide/checker/lexer.hpp"
#include "pide/markup.hpp"

namespace pide::checker {

using Integer = boost::multiprecision::cpp_int;

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Literal {
  Integer value;
};

struct Ident {
  std::string name;
};

enum class BinaryOp { plus, times };

inline std::string_view symbol(BinaryOp op) { return op == BinaryOp::plus ? "+" : "*"; }
inline int precedence(BinaryOp op) { return op == BinaryOp::plus ? 1 : 2; }

struct Binary {
  BinaryOp op;
  ExprPtr lhs;
  ExprPtr rhs;
  Range op_range;
};

struct Fib {
  ExprPtr arg;
  Range name_range;
};

struct Expr {
  std::variant<Literal, Ident, Binary, Fib> node;
  Range range; // in command-span coordinates
};

/// Structural equality, ignoring source ranges.
inline bool same_structure(const Expr &a, const Expr &b) {
  if (a.node.index() != b.node.index())
    return false;
  if (auto *l = std::get_if<Literal>(&a.node))
    return l->value == std::get<Literal>(b.node).value;
  if (auto *i = std::get_if<Ident>(&a.node))
    return i->name == std::get<Ident>(b.node).name;
  if (auto *x = std::get_if<Binary>(&a.node)) {
    const auto &y = std::get<Binary>(b.node);
    return x->op == y.op && same_structure(*x->lhs, *y.lhs) && same_structure(*x->rhs, *y.rhs);
  }
  return same_structure(*std::get<Fib>(a.node).arg, *std::get<Fib>(b.node).arg);
}

namespace detail {
inline void print_expr(const Expr &e, int context, std::string &out) {
  if (auto *l = std::get_if<Literal>(&e.node)) {
    out += l->value.str();
  } else if (auto *i = std::get_if<Ident>(&e.node)) {
    out += i->name;
  } else if (auto *b = std::get_if<Binary>(&e.node)) {
    int p = precedence(b->op);
    if (p < context)
      out += '(';
    print_expr(*b->lhs, p, out);
    out += ' ';
    out += symbol(b->op);
    out += ' ';
    print_expr(*b->rhs, p + 1, out);
    if (p < context)
      out += ')';
  } else {
    out += "fib(";
    print_expr(*std::get<Fib>(e.node).arg, 0, out);
    out += ')';
  }
}
} // namespace detail

/// Canonical source rendering with minimal parentheses.
inline std::string to_source(const Expr &e) {
  std::string out;
  detail::print_expr(e, 0, out);
  return out;
}

struct Equation {
  ExprPtr lhs;
  ExprPtr rhs;
};

namespace cmd {
struct Notepad {};
struct Begin {};
struct End {};
struct Let {
  std::string name;
  Range name_range;
  ExprPtr expr;
};
struct Have {
  Equation eq;
};
struct Also {};
struct Finally {};
struct Print {
  ExprPtr expr;
};
struct Malformed {
  std::string message;
  Range range;
};
} // namespace cmd

using NotepadCommand = std::variant<cmd::Notepad, cmd::Begin, cmd::End, cmd::Let, cmd::Have,
                                    cmd::Also, cmd::Finally, cmd::Print, cmd::Malformed>;

namespace detail {

struct SyntaxError {
  std::string message;
  Range range;
};

class ExprParser {
public:
  ExprParser(const std::vector<Token> &tokens, std::size_t pos, Range end_range)
      : tokens_(tokens), pos_(pos), end_(end_range) {}

  ExprPtr expression() {
    ExprPtr lhs = term();
    while (peek_op("+")) {
      Range op = tokens_[pos_++].range;
      ExprPtr rhs = term();
      lhs = make_binary(BinaryOp::plus, lhs, rhs, op);
    }
    return lhs;
  }

  std::size_t position() const { return pos_; }

private:
  ExprPtr term() {
    ExprPtr lhs = atom();
    while (peek_op("*")) {
      Range op = tokens_[pos_++].range;
      ExprPtr rhs = atom();
      lhs = make_binary(BinaryOp::times, lhs, rhs, op);
    }
    return lhs;
  }

  ExprPtr atom() {
    if (pos_ >= tokens_.size())
      throw SyntaxError{"expression expected", end_};
    const Token &t = tokens_[pos_];
    if (t.kind == TokenKind::literal) {
      ++pos_;
      return std::make_shared<const Expr>(Expr{Literal{Integer(t.text)}, t.range});
    }
    if (t.kind == TokenKind::ident && t.text == "fib") {
      ++pos_;
      expect_delim("(", "'(' expected after fib");
      ExprPtr arg = expression();
      Range close = expect_delim(")", "')' expected");
      return std::make_shared<const Expr>(
          Expr{Fib{arg, t.range}, Range{t.range.start, close.stop}});
    }
    if (t.kind == TokenKind::ident) {
      ++pos_;
      return std::make_shared<const Expr>(Expr{Ident{t.text}, t.range});
    }
    if (t.kind == TokenKind::delimiter && t.text == "(") {
      ++pos_;
      ExprPtr inner = expression();
      expect_delim(")", "')' expected");
      return inner;
    }
    throw SyntaxError{"unexpected '" + t.text + "'", t.range};
  }

  bool peek_op(std::string_view op) const {
    return pos_ < tokens_.size() && tokens_[pos_].kind == TokenKind::op && tokens_[pos_].text == op;
  }

  Range expect_delim(std::string_view d, const char *message) {
    if (pos_ >= tokens_.size())
      throw SyntaxError{message, end_};
    const Token &t = tokens_[pos_];
    if (t.kind != TokenKind::delimiter || t.text != d)
      throw SyntaxError{message, t.range};
    ++pos_;
    return t.range;
  }

  static ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs, Range op_range) {
    Range r{lhs->range.start, rhs->range.stop};
    return std::make_shared<const Expr>(Expr{Binary{op, std::move(lhs), std::move(rhs), op_range}, r});
  }

  const std::vector<Token> &tokens_;
  std::size_t pos_;
  Range end_;
};

inline Range end_of(const std::vector<Token> &tokens, std::size_t fallback) {
  if (tokens.empty())
    return Range{fallback, fallback};
  return Range{tokens.back().range.stop, tokens.back().range.stop};
}

inline ExprPtr parse_expr_to_end(const std::vector<Token> &tokens, std::size_t pos) {
  Range end = end_of(tokens, 0);
  ExprParser p(tokens, pos, end);
  ExprPtr e = p.expression();
  if (p.position() != tokens.size())
    throw SyntaxError{"unexpected '" + tokens[p.position()].text + "'",
                      tokens[p.position()].range};
  return e;
}

inline Equation parse_equation(const Token &str) {
  std::string_view inner(str.text);
  inner = inner.substr(1, inner.size() - 2);
  auto tokens = tokenize(inner, str.range.start + 1);
  Range end{str.range.stop - 1, str.range.stop - 1};
  for (const auto &t : tokens)
    if (t.kind == TokenKind::keyword || t.kind == TokenKind::string || t.kind == TokenKind::bad)
      throw SyntaxError{"unexpected '" + t.text + "' in proposition", t.range};
  ExprParser p(tokens, 0, end);
  ExprPtr lhs = p.expression();
  std::size_t pos = p.position();
  if (pos >= tokens.size() || tokens[pos].kind != TokenKind::op || tokens[pos].text != "=")
    throw SyntaxError{"'=' expected in proposition", pos < tokens.size() ? tokens[pos].range : end};
  ExprParser q(tokens, pos + 1, end);
  ExprPtr rhs = q.expression();
  if (q.position() != tokens.size())
    throw SyntaxError{"unexpected '" + tokens[q.position()].text + "' in proposition",
                      tokens[q.position()].range};
  return Equation{lhs, rhs};
}

} // namespace detail

/// Range of the span without trailing whitespace (at least the first byte).
inline Range trimmed_range(std::string_view source) {
  std::size_t stop = source.size();
  while (stop > 0 && (source[stop - 1] == ' ' || source[stop - 1] == '\t' ||
                      source[stop - 1] == '\n' || source[stop - 1] == '\r'))
    --stop;
  std::size_t start = 0;
  while (start < stop && (source[start] == ' ' || source[start] == '\t' ||
                          source[start] == '\n' || source[start] == '\r'))
    ++start;
  return Range{start, stop};
}

/// Parses one command span. Never fails: errors yield Malformed.
inline NotepadCommand parse_command(std::string_view source,
                                    const std::vector<Token> &tokens) {
  using namespace detail;
  Range whole = trimmed_range(source);
  if (tokens.empty() || tokens.front().kind != TokenKind::keyword)
    return cmd::Malformed{"command expected", whole};
  const std::string &kw = tokens.front().text;
  try {
    auto no_arguments = [&](NotepadCommand c) -> NotepadCommand {
      if (tokens.size() > 1)
        throw SyntaxError{"unexpected '" + tokens[1].text + "' after " + kw, tokens[1].range};
      return c;
    };
    if (kw == "notepad") return no_arguments(cmd::Notepad{});
    if (kw == "begin") return no_arguments(cmd::Begin{});
    if (kw == "end") return no_arguments(cmd::End{});
    if (kw == "also") return no_arguments(cmd::Also{});
    if (kw == "finally") return no_arguments(cmd::Finally{});
    Range end = end_of(tokens, whole.stop);
    if (kw == "let") {
      if (tokens.size() < 2 || tokens[1].kind != TokenKind::ident || tokens[1].text == "fib")
        throw SyntaxError{"identifier expected after let", tokens.size() > 1 ? tokens[1].range : end};
      if (tokens.size() < 3 || tokens[2].kind != TokenKind::op || tokens[2].text != "=")
        throw SyntaxError{"'=' expected", tokens.size() > 2 ? tokens[2].range : end};
      return cmd::Let{tokens[1].text, tokens[1].range, parse_expr_to_end(tokens, 3)};
    }
    if (kw == "have") {
      if (tokens.size() < 2 || tokens[1].kind != TokenKind::string)
        throw SyntaxError{"quoted proposition expected after have",
                          tokens.size() > 1 ? tokens[1].range : end};
      if (tokens.size() > 2)
        throw SyntaxError{"unexpected '" + tokens[2].text + "'", tokens[2].range};
      return cmd::Have{parse_equation(tokens[1])};
    }
    if (kw == "print")
      return cmd::Print{parse_expr_to_end(tokens, 1)};
    return cmd::Malformed{"unknown command " + kw, tokens.front().range};
  } catch (const SyntaxError &err) {
    return cmd::Malformed{err.message, err.range};
  }
}

inline NotepadCommand parse_command(std::string_view source) {
  return parse_command(source, tokenize(source));
}

} // namespace pide::checker

#endif // PIDE_CHECKER_SYNTAX_HPP
