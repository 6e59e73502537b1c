#ifndef PIDE_CHECKER_EXECUTE_HPP
#define PIDE_CHECKER_EXECUTE_HPP

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "pide/checker/elaborate.hpp"
#include "pide/checker/eval.hpp"
#include "pide/document.hpp"
#include "pide/markup.hpp"

namespace pide::checker {

using Emit = std::function<void(MessageKind, std::optional<Range>, Body)>;

struct ExecOutcome {
  ExecStatus status = ExecStatus::finished;
  bool unchecked = false;
};

/// Runs one elaborated command and emits its messages. Throws Cancelled when
/// the cancel flag is observed between evaluation steps.
class Executor {
public:
  Executor(std::string_view source, Emit emit, const std::atomic<bool> *cancel = nullptr)
      : source_(source), emit_(std::move(emit)), eval_(cancel), folder_(eval_), printer_(free_) {}

  ExecOutcome run(const Elaborated &e) {
    try {
      return dispatch(e);
    } catch (const EvalError &err) {
      emit_(MessageKind::error, trimmed_range(source_), {text(err.message)});
      return {ExecStatus::failed, false};
    }
  }

  std::uint64_t steps() const { return eval_.steps(); }

private:
  ExecOutcome dispatch(const Elaborated &e) {
    const Range whole = trimmed_range(source_);
    if (auto *m = std::get_if<cmd::Malformed>(&e.command)) {
      emit_(MessageKind::error, m->range, {text(m->message)});
      return {ExecStatus::failed, false};
    }
    if (e.error) {
      emit_(MessageKind::error, whole, {text(*e.error)});
      return {ExecStatus::failed, false};
    }
    const Env &env = e.in.env;
    if (auto *let = std::get_if<cmd::Let>(&e.command)) {
      Side side{let->expr, env};
      if (!free_.free_occurrences(*side.expr, env).empty()) {
        warn(side, true);
        return {ExecStatus::finished, true};
      }
      Integer v = eval_.eval(*let->expr, env);
      emit_(MessageKind::writeln, whole, {text(let->name + " = " + v.str())});
      return {};
    }
    if (auto *print = std::get_if<cmd::Print>(&e.command)) {
      Side side{print->expr, env};
      if (!free_.free_occurrences(*side.expr, env).empty()) {
        warn(side, true);
        return {ExecStatus::finished, true};
      }
      emit_(MessageKind::writeln, whole, {text(eval_.eval(*print->expr, env).str())});
      return {};
    }
    if (auto *have = std::get_if<cmd::Have>(&e.command)) {
      Fact fact{{have->eq.lhs, env}, {have->eq.rhs, env}};
      if (e.link_from) {
        ExprPtr expected = folder_.fold(e.link_from->rhs.expr, e.link_from->rhs.env);
        ExprPtr actual = folder_.fold(fact.lhs.expr, env);
        if (!same_structure(*expected, *actual)) {
          emit_(MessageKind::error, fact.lhs.expr->range,
                {text("calculation does not link: " + to_source(*expected) + " vs " +
                      to_source(*actual))});
          return {ExecStatus::failed, false};
        }
      }
      return check(fact, true, whole);
    }
    if (std::holds_alternative<cmd::Finally>(e.command)) {
      const Fact &d = *e.derived;
      emit_(MessageKind::writeln, whole,
            {text("calculation: " + to_source(*d.lhs.expr) + " = " + to_source(*d.rhs.expr))});
      return check(d, false, whole);
    }
    return {};
  }

  /// Checks an equation. Sides that mention identifiers without a value are
  /// reported with a warning and the check is skipped.
  ExecOutcome check(const Fact &fact, bool local_positions, Range whole) {
    bool lhs_free = !free_.free_occurrences(*fact.lhs.expr, fact.lhs.env).empty();
    bool rhs_free = !free_.free_occurrences(*fact.rhs.expr, fact.rhs.env).empty();
    if (lhs_free || rhs_free) {
      if (lhs_free)
        warn(fact.lhs, local_positions, whole);
      if (rhs_free)
        warn(fact.rhs, local_positions, whole);
      return {ExecStatus::finished, true};
    }
    Integer l = eval_.eval(*fact.lhs.expr, fact.lhs.env);
    Integer r = eval_.eval(*fact.rhs.expr, fact.rhs.env);
    if (l == r) {
      emit_(MessageKind::writeln, whole, {text("ok: " + l.str() + " = " + r.str())});
      return {};
    }
    emit_(MessageKind::error, whole, {text(l.str() + " \xE2\x89\xA0 " + r.str())});
    return {ExecStatus::failed, false};
  }

  void warn(const Side &side, bool local_positions, std::optional<Range> fallback = std::nullopt) {
    Range range = local_positions ? side.expr->range : fallback.value_or(trimmed_range(source_));
    if (local_positions) {
      Body report;
      collect_reports(*side.expr, side.env, report);
      if (!report.empty())
        emit_(MessageKind::report, std::nullopt, std::move(report));
    }
    Body body{text("Term: "), printer_.term(*side.expr, side.env),
              elem("position", {{"offset", std::to_string(range.start)},
                                {"end_offset", std::to_string(range.stop)}})};
    emit_(MessageKind::warning, range, std::move(body));
  }

  void collect_reports(const Expr &e, const Env &env, Body &out) {
    if (auto *i = std::get_if<Ident>(&e.node)) {
      if (!free_.has_value(env, i->name))
        out.push_back(positioned_to_element(PositionedMarkup{e.range, "free", {}}));
    } else if (auto *b = std::get_if<Binary>(&e.node)) {
      collect_reports(*b->lhs, env, out);
      out.push_back(positioned_to_element(
          PositionedMarkup{b->op_range, "entity", entity_attributes(symbol(b->op))}));
      collect_reports(*b->rhs, env, out);
    } else if (auto *f = std::get_if<Fib>(&e.node)) {
      out.push_back(positioned_to_element(
          PositionedMarkup{f->name_range, "entity", entity_attributes("fib")}));
      collect_reports(*f->arg, env, out);
    }
  }

  std::string_view source_;
  Emit emit_;
  Evaluator eval_;
  Folder folder_;
  FreeAnalysis free_;
  TermPrinter printer_;
};

} // namespace pide::checker

#endif // PIDE_CHECKER_EXECUTE_HPP
