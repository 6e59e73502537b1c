#ifndef PIDE_CHECKER_EVAL_HPP
#define PIDE_CHECKER_EVAL_HPP

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pide/checker/syntax.hpp"
#include "pide/markup.hpp"
#include "pide/pretty.hpp"

namespace pide::checker {

// ---------------------------------------------------------------------------
// Environments

/// Persistent binding list. A binding closes over the environment in which
/// it was made (its parent).
struct EnvNode;
using Env = std::shared_ptr<const EnvNode>;

struct EnvNode {
  std::string name;
  ExprPtr expr;
  Env parent;
};

inline Env bind(Env env, std::string name, ExprPtr expr) {
  return std::make_shared<const EnvNode>(EnvNode{std::move(name), std::move(expr), std::move(env)});
}

inline const EnvNode *lookup(const Env &env, std::string_view name) {
  for (const EnvNode *n = env.get(); n; n = n->parent.get())
    if (n->name == name)
      return n;
  return nullptr;
}

/// An expression together with the environment it is read in.
struct Side {
  ExprPtr expr;
  Env env;
};

// ---------------------------------------------------------------------------
// Builtins

/// Pseudo source file in which the builtin operators are declared; entity
/// markup points into it.
inline constexpr std::string_view kBuiltinFile = "builtin/ops";
inline constexpr std::string_view kBuiltinSource =
    "(* builtin operators of the notepad calculus *)\n"
    "infixl 65 + :: plus\n"
    "infixl 70 * :: times\n"
    "fun fib :: fibonacci\n";

struct BuiltinEntity {
  std::string_view symbol;
  std::string_view name;
  int ref;
};

inline constexpr BuiltinEntity kBuiltins[] = {
    {"+", "ops.plus", 1}, {"*", "ops.times", 2}, {"fib", "ops.fib", 3}};

/// Entity attributes for a builtin symbol: reference id, definition line,
/// offsets (0-based, half-open) into the builtin file, qualified name, kind.
inline Attributes entity_attributes(std::string_view symbol) {
  for (const auto &b : kBuiltins) {
    if (b.symbol != symbol)
      continue;
    std::size_t line_start = 0;
    int line = 1;
    for (;;) {
      std::size_t line_end = kBuiltinSource.find('\n', line_start);
      std::string_view l = kBuiltinSource.substr(line_start, line_end - line_start);
      std::string needle = " " + std::string(symbol) + " ::";
      std::size_t at = l.find(needle);
      if (at != std::string_view::npos) {
        std::size_t off = line_start + at + 1;
        return {{"ref", std::to_string(b.ref)},
                {"def_line", std::to_string(line)},
                {"def_offset", std::to_string(off)},
                {"def_end_offset", std::to_string(off + symbol.size())},
                {"def_file", std::string(kBuiltinFile)},
                {"name", std::string(b.name)},
                {"kind", "constant"}};
      }
      if (line_end == std::string_view::npos)
        break;
      line_start = line_end + 1;
      ++line;
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Free identifiers

class FreeAnalysis {
public:
  /// Whether the identifier has a value: bound, and its definition is closed.
  bool has_value(const Env &env, std::string_view name) {
    const EnvNode *n = lookup(env, name);
    return n && closed(n);
  }

  /// Identifier occurrences in `e` that cannot be evaluated.
  std::vector<const Expr *> free_occurrences(const Expr &e, const Env &env) {
    std::vector<const Expr *> out;
    collect(e, env, out);
    return out;
  }

private:
  bool closed(const EnvNode *n) {
    auto it = memo_.find(n);
    if (it != memo_.end())
      return it->second;
    bool result = free_occurrences(*n->expr, n->parent).empty();
    memo_.emplace(n, result);
    return result;
  }

  void collect(const Expr &e, const Env &env, std::vector<const Expr *> &out) {
    if (auto *i = std::get_if<Ident>(&e.node)) {
      if (!has_value(env, i->name))
        out.push_back(&e);
    } else if (auto *b = std::get_if<Binary>(&e.node)) {
      collect(*b->lhs, env, out);
      collect(*b->rhs, env, out);
    } else if (auto *f = std::get_if<Fib>(&e.node)) {
      collect(*f->arg, env, out);
    }
  }

  std::unordered_map<const EnvNode *, bool> memo_;
};

// ---------------------------------------------------------------------------
// Evaluation

struct Cancelled {};

struct EvalError {
  std::string message;
};

/// Evaluates closed expressions. Checks the cancel flag between evaluation
/// steps; throws Cancelled when it is set.
class Evaluator {
public:
  explicit Evaluator(const std::atomic<bool> *cancel = nullptr) : cancel_(cancel) {}

  Integer eval(const Expr &e, const Env &env) {
    step();
    if (auto *l = std::get_if<Literal>(&e.node))
      return l->value;
    if (auto *i = std::get_if<Ident>(&e.node)) {
      const EnvNode *n = lookup(env, i->name);
      if (!n)
        throw EvalError{"unbound identifier " + i->name};
      auto it = memo_.find(n);
      if (it != memo_.end())
        return it->second;
      Integer v = eval(*n->expr, n->parent);
      memo_.emplace(n, v);
      return v;
    }
    if (auto *b = std::get_if<Binary>(&e.node)) {
      Integer l = eval(*b->lhs, env);
      Integer r = eval(*b->rhs, env);
      return b->op == BinaryOp::plus ? Integer(l + r) : Integer(l * r);
    }
    Integer n = eval(*std::get<Fib>(e.node).arg, env);
    return fib(n);
  }

  /// Naive exponential Fibonacci: the intentionally heavy builtin.
  Integer fib(const Integer &n) {
    if (n < 0)
      throw EvalError{"fib of negative argument " + n.str()};
    if (n <= 92)
      return Integer(fib_small(static_cast<int>(n)));
    return fib(Integer(n - 1)) + fib(Integer(n - 2));
  }

  std::uint64_t steps() const { return steps_; }

private:
  void step() {
    if ((++steps_ & 0x3FF) == 0 && cancel_ && cancel_->load(std::memory_order_relaxed))
      throw Cancelled{};
  }

  std::int64_t fib_small(int n) {
    step();
    if (n < 2)
      return n;
    return fib_small(n - 1) + fib_small(n - 2);
  }

  const std::atomic<bool> *cancel_;
  std::uint64_t steps_ = 0;
  std::unordered_map<const EnvNode *, Integer> memo_;
};

/// Substitutes identifiers that have values and folds constant
/// subexpressions. Unbound identifiers stay symbolic.
class Folder {
public:
  explicit Folder(Evaluator &eval) : eval_(eval) {}

  ExprPtr fold(const ExprPtr &e, const Env &env) {
    if (std::holds_alternative<Literal>(e->node))
      return e;
    if (auto *i = std::get_if<Ident>(&e->node)) {
      const EnvNode *n = lookup(env, i->name);
      if (!n)
        return e;
      return fold(n->expr, n->parent);
    }
    if (auto *b = std::get_if<Binary>(&e->node)) {
      ExprPtr l = fold(b->lhs, env);
      ExprPtr r = fold(b->rhs, env);
      auto *ll = std::get_if<Literal>(&l->node);
      auto *rl = std::get_if<Literal>(&r->node);
      if (ll && rl)
        return literal(b->op == BinaryOp::plus ? Integer(ll->value + rl->value)
                                               : Integer(ll->value * rl->value));
      return std::make_shared<const Expr>(Expr{Binary{b->op, l, r, b->op_range}, e->range});
    }
    const auto &f = std::get<Fib>(e->node);
    ExprPtr a = fold(f.arg, env);
    if (auto *al = std::get_if<Literal>(&a->node))
      if (al->value >= 0)
        return literal(eval_.fib(al->value));
    return std::make_shared<const Expr>(Expr{Fib{a, f.name_range}, e->range});
  }

private:
  static ExprPtr literal(Integer v) {
    return std::make_shared<const Expr>(Expr{Literal{std::move(v)}, Range{}});
  }

  Evaluator &eval_;
};

// ---------------------------------------------------------------------------
// Term markup

/// Renders an expression as a pretty-printing term: operators become entity
/// markup pointing at their builtin declaration, identifiers without a value
/// are highlighted as free variables.
class TermPrinter {
public:
  explicit TermPrinter(FreeAnalysis &free) : free_(free) {}

  /// term > block(0) > rendering of `e`
  Tree term(const Expr &e, const Env &env) {
    Body inner;
    print(e, env, 0, inner);
    return elem("term", {}, {elem("block", {{"indent", "0"}}, std::move(inner))});
  }

private:
  static Tree block0(Body body) { return elem("block", {{"indent", "0"}}, std::move(body)); }

  void print(const Expr &e, const Env &env, int context, Body &out) {
    if (auto *l = std::get_if<Literal>(&e.node)) {
      out.push_back(text(l->value.str()));
    } else if (auto *i = std::get_if<Ident>(&e.node)) {
      if (free_.has_value(env, i->name))
        out.push_back(text(i->name));
      else
        out.push_back(elem("hilite", {}, {block0({elem("free", {}, {block0({text(i->name)})})})}));
    } else if (auto *b = std::get_if<Binary>(&e.node)) {
      int p = precedence(b->op);
      Body blk;
      print(*b->lhs, env, p, blk);
      blk.push_back(text(" "));
      blk.push_back(elem("entity", entity_attributes(symbol(b->op)),
                         {block0({text(std::string(symbol(b->op)))})}));
      blk.push_back(pretty::pretty_to_markup(pretty::brk(1)));
      print(*b->rhs, env, p + 1, blk);
      if (p < context) {
        out.push_back(text("("));
        out.push_back(elem("block", {{"indent", "1"}}, std::move(blk)));
        out.push_back(text(")"));
      } else {
        out.push_back(elem("block", {{"indent", "0"}}, std::move(blk)));
      }
    } else {
      const auto &f = std::get<Fib>(e.node);
      Body blk;
      blk.push_back(elem("entity", entity_attributes("fib"), {block0({text("fib")})}));
      blk.push_back(text("("));
      print(*f.arg, env, 0, blk);
      blk.push_back(text(")"));
      out.push_back(elem("block", {{"indent", "4"}}, std::move(blk)));
    }
  }

  FreeAnalysis &free_;
};

} // namespace pide::checker

#endif // PIDE_CHECKER_EVAL_HPP
