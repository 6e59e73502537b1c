#ifndef PIDE_CHECKER_ELABORATE_HPP
#define PIDE_CHECKER_ELABORATE_HPP

// Fast sequential pass over the commands of a node. It performs no
// evaluation; it only threads bindings and the calculation chain so that every
// command records the state it starts from. Evaluation can then run for all
// commands independently.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pide/checker/eval.hpp"
#include "pide/checker/lexer.hpp"
#include "pide/checker/syntax.hpp"

namespace pide::checker {

struct Fact {
  Side lhs;
  Side rhs;
};

struct CalcState {
  Env env;
  std::optional<Fact> last_fact;
  std::optional<Fact> calculation;
  bool also_pending = false;
};

struct Elaborated {
  NotepadCommand command;
  CalcState in;
  std::optional<std::string> error; // chain misuse, reported on execution
  std::optional<Fact> link_from;    // Have continuing a calculation: link to this rhs
  std::optional<Fact> derived;      // Finally: the composed equation
};

/// Elaborates one command starting from `in`; returns the record and the
/// state after the command.
inline std::pair<Elaborated, CalcState> elaborate(NotepadCommand command, const CalcState &in) {
  Elaborated e{std::move(command), in, std::nullopt, std::nullopt, std::nullopt};
  CalcState out = in;
  std::visit(
      [&](const auto &c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, cmd::Let>) {
          out.env = bind(in.env, c.name, c.expr);
        } else if constexpr (std::is_same_v<T, cmd::Have>) {
          Fact fact{{c.eq.lhs, in.env}, {c.eq.rhs, in.env}};
          if (in.also_pending && in.calculation) {
            e.link_from = in.calculation;
            out.calculation = Fact{in.calculation->lhs, fact.rhs};
          } else {
            out.calculation.reset();
          }
          out.also_pending = false;
          out.last_fact = fact;
        } else if constexpr (std::is_same_v<T, cmd::Also>) {
          if (in.calculation) {
            out.also_pending = true;
          } else if (in.last_fact) {
            out.calculation = in.last_fact;
            out.also_pending = true;
          } else {
            e.error = "no current calculation";
          }
        } else if constexpr (std::is_same_v<T, cmd::Finally>) {
          if (in.calculation) {
            e.derived = in.calculation;
            out.last_fact = in.calculation;
            out.calculation.reset();
            out.also_pending = false;
          } else {
            e.error = "no current calculation";
          }
        }
      },
      e.command);
  return {std::move(e), std::move(out)};
}

/// Elaborates a whole node from the empty state.
inline std::vector<Elaborated> elaborate_all(const std::vector<NotepadCommand> &commands) {
  std::vector<Elaborated> out;
  CalcState state;
  for (const auto &c : commands) {
    auto [e, next] = elaborate(c, state);
    out.push_back(std::move(e));
    state = std::move(next);
  }
  return out;
}

} // namespace pide::checker

#endif // PIDE_CHECKER_ELABORATE_HPP
