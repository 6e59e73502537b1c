#ifndef PIDE_REPLAY_HPP
#define PIDE_REPLAY_HPP

// Script replay against a live session, snapshot dumps, and benchmarks.

#include <algorithm>
#include <chrono>
#include <map>
#include <sstream>
#include <cstdint>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "pide/document.hpp"
#include "pide/markup.hpp"
#include "pide/pretty.hpp"
#include "pide/script.hpp"
#include "pide/session.hpp"
#include "pide/xml.hpp"
#include "pide/yxml.hpp"

namespace pide {

enum class DumpFormat { xml, yxml };

struct DumpOptions {
  DumpFormat format = DumpFormat::xml;
  /// Drop serials, exec ids, and command ids.
  bool stable = false;
  /// Resolve block/break markup of message bodies at this margin. Without
  /// it, bodies keep their layout markup.
  std::optional<std::size_t> margin;
};

inline constexpr std::string_view kDefaultNode = "main";

namespace detail {

inline void set_offsets(Attributes &attrs, Range current) {
  // 1-based first character, inclusive last character
  attrs.emplace_back("offset", std::to_string(current.start + 1));
  attrs.emplace_back("end_offset", std::to_string(current.stop));
}

/// Rewrites position elements of a message body from span-relative to
/// current-text coordinates.
inline Body rebase_positions(const Body &body, const Snapshot &snap, std::size_t span_start,
                             const std::optional<std::string> &id) {
  Body out;
  for (const auto &t : body) {
    if (t.is_text()) {
      out.push_back(t);
      continue;
    }
    Element e = t.element();
    e.body = rebase_positions(e.body, snap, span_start, id);
    if (e.name == "position") {
      auto start = e.attribute("offset");
      auto stop = e.attribute("end_offset");
      auto s = start ? protocol::parse_u64(*start) : std::nullopt;
      auto f = stop ? protocol::parse_u64(*stop) : std::nullopt;
      if (s && f && *s <= *f) {
        Attributes attrs;
        if (auto current = snap.to_current(Range{span_start + *s, span_start + *f}))
          set_offsets(attrs, *current);
        for (auto &[k, v] : e.attributes)
          if (k != "offset" && k != "end_offset" && k != "id")
            attrs.emplace_back(k, v);
        if (id)
          attrs.emplace_back("id", *id);
        e.attributes = std::move(attrs);
      }
    }
    out.push_back(Tree{std::move(e)});
  }
  return out;
}

} // namespace detail

/// Dump of the commands of a snapshot that intersect `range` (current-text
/// coordinates): displayed messages and positioned markup.
inline Tree dump_tree(const Snapshot &snap, Range range, const DumpOptions &options = {}) {
  Element root{"snapshot", {{"node", snap.node}}, {}};
  if (snap.version)
    root.attributes.emplace_back("version", to_string(snap.version->id));
  root.attributes.emplace_back("is_outdated", snap.is_outdated ? "true" : "false");
  if (!snap.version)
    return Tree{std::move(root)};

  std::vector<MarkupHit> hits = markup_query(snap, range);
  std::size_t offset = 0;
  for (const auto &cmd : snap.commands()) {
    Range span{offset, offset + cmd->source.size()};
    offset = span.stop;
    auto current = snap.to_current(span);
    if (!current || !(current->intersects(range) || (range.empty() && current->start <= range.start &&
                                                      range.start <= current->stop)))
      continue;

    Element c{"command", {}, {}};
    if (!options.stable)
      c.attributes.emplace_back("id", to_string(cmd->id));
    c.attributes.emplace_back("name", cmd->malformed() ? "malformed" : cmd->name);
    detail::set_offsets(c.attributes, *current);

    ExecStatePtr state = snap.exec_state(cmd->id);
    if (state) {
      if (!options.stable)
        c.attributes.emplace_back("exec", to_string(state->exec));
      c.attributes.emplace_back("status", std::string(to_string(state->status)));
      for (auto it = state->messages.rbegin(); it != state->messages.rend(); ++it) {
        if (it->kind != MessageKind::status || it->body.empty() || !it->body.front().is_element())
          continue;
        if (auto outcome = it->body.front().element().attribute("outcome"))
          c.attributes.emplace_back("outcome", *outcome);
        break;
      }
      for (const auto &m : state->messages) {
        if (!is_displayed(m.kind))
          continue;
        Element me{std::string(to_string(m.kind)), {}, {}};
        if (!options.stable)
          me.attributes.emplace_back("serial", std::to_string(m.serial));
        if (m.range)
          if (auto r = snap.to_current(Range{span.start + m.range->start, span.start + m.range->stop}))
            detail::set_offsets(me.attributes, *r);
        if (!options.stable)
          me.attributes.emplace_back("id", to_string(m.exec));
        me.body = detail::rebase_positions(
            m.body, snap, span.start,
            options.stable ? std::nullopt : std::optional<std::string>(to_string(m.exec)));
        if (options.margin)
          me.body = pretty::format_markup(me.body, *options.margin);
        c.body.push_back(Tree{std::move(me)});
      }
    }
    Element markup{"markup", {}, {}};
    for (const auto &h : hits) {
      if (h.command != cmd->id)
        continue;
      Element pm{h.markup.name, {}, {}};
      detail::set_offsets(pm.attributes, h.range);
      for (const auto &a : h.markup.attributes)
        pm.attributes.push_back(a);
      markup.body.push_back(Tree{std::move(pm)});
    }
    if (!markup.body.empty())
      c.body.push_back(Tree{std::move(markup)});
    root.body.push_back(text("\n"));
    root.body.push_back(Tree{std::move(c)});
  }
  if (!root.body.empty())
    root.body.push_back(text("\n"));
  return Tree{std::move(root)};
}

inline std::string render_dump(const Tree &tree, DumpFormat format) {
  if (format == DumpFormat::yxml)
    return yxml::visible(yxml::encode(tree));
  return xml::to_string(tree);
}

/// Exit codes of replay and bench.
enum ExitCode : int { kExitOk = 0, kExitCheckerFailure = 1, kExitUsage = 2 };

struct ReplayOptions {
  DumpOptions dump;
  std::chrono::milliseconds quiescence_timeout = std::chrono::minutes(10);
};

/// Replays parsed script lines. Every insert and remove is one submission.
/// `snapshot` lines print a dump of their range; when the script edited
/// anything, it ends by awaiting quiescence and dumping every edited node.
inline int replay(const std::vector<script::Line> &lines, Session &session, std::ostream &out,
                  std::ostream &err, const ReplayOptions &options = {}) {
  NodeName node(kDefaultNode);
  std::vector<NodeName> edited;
  auto dump = [&](const NodeName &n, Range r) {
    out << render_dump(dump_tree(session.snapshot(n), r, options.dump), options.dump.format) << '\n';
  };
  for (const auto &line : lines) {
    try {
      if (auto *sel = std::get_if<script::SelectNode>(&line.step)) {
        node = sel->name;
      } else if (auto *ins = std::get_if<Insert>(&line.step)) {
        session.submit(node, {*ins});
        if (std::find(edited.begin(), edited.end(), node) == edited.end())
          edited.push_back(node);
      } else if (auto *rem = std::get_if<Remove>(&line.step)) {
        session.submit(node, {*rem});
        if (std::find(edited.begin(), edited.end(), node) == edited.end())
          edited.push_back(node);
      } else if (std::holds_alternative<script::AwaitQuiescent>(line.step)) {
        if (!session.await_quiescent(options.quiescence_timeout)) {
          err << "line " << line.number << ": checker did not become quiescent\n";
          return kExitCheckerFailure;
        }
      } else {
        const auto &q = std::get<script::SnapshotQuery>(line.step);
        dump(node, Range{q.start, q.stop});
      }
    } catch (const BoundsError &ex) {
      err << "line " << line.number << ": " << ex.what() << '\n';
      return kExitUsage;
    } catch (const EncodeError &ex) {
      err << "line " << line.number << ": " << ex.what() << '\n';
      return kExitUsage;
    } catch (const ProtocolError &ex) {
      err << "line " << line.number << ": " << ex.what() << '\n';
      return kExitCheckerFailure;
    }
  }
  if (edited.empty())
    return session.failed() ? kExitCheckerFailure : kExitOk;
  if (!session.await_quiescent(options.quiescence_timeout)) {
    err << "checker did not become quiescent\n";
    return kExitCheckerFailure;
  }
  for (const auto &n : edited) {
    auto snap = session.snapshot(n);
    dump(n, Range{0, snap.current_text().size()});
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Benchmarks

struct ExecTiming {
  ExecId exec;
  ExecStatus status;
  double ms = 0;
};

struct BenchRun {
  unsigned workers = 0;
  double wall_ms = 0;
  bool ok = false;
  std::uint64_t reused = 0;
  std::uint64_t fresh = 0;
  std::map<VersionId, ReuseCount> by_version;
  std::vector<ExecTiming> execs;
  std::vector<std::size_t> command_counts; // per version, commands of all nodes
};

/// Replays the edits of a script without output and measures the time from
/// the first submission until quiescence.
inline BenchRun bench_run(const std::vector<script::Line> &lines, SessionOptions session_options,
                          std::chrono::milliseconds timeout = std::chrono::minutes(10)) {
  BenchRun run;
  run.workers = session_options.workers;
  Session session(std::move(session_options));
  std::ostringstream sink;
  ReplayOptions options;
  options.quiescence_timeout = timeout;
  std::vector<script::Line> edits;
  for (const auto &l : lines)
    if (!std::holds_alternative<script::SnapshotQuery>(l.step))
      edits.push_back(l);
  auto start = std::chrono::steady_clock::now();
  int rc = replay(edits, session, sink, sink, options);
  bool quiet = rc == kExitOk && session.await_quiescent(timeout);
  run.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  run.ok = quiet;
  auto model = session.model();
  if (auto w = model->checker_workers())
    run.workers = static_cast<unsigned>(*w);
  run.reused = model->reused_execs();
  run.fresh = model->fresh_execs();
  run.by_version = model->reuse_by_version();
  for (const auto &[id, st] : model->execs()) {
    ExecTiming t{id, st->status, 0};
    if (st->started && st->stopped)
      t.ms = std::chrono::duration<double, std::milli>(*st->stopped - *st->started).count();
    run.execs.push_back(t);
  }
  std::sort(run.execs.begin(), run.execs.end(),
            [](const ExecTiming &a, const ExecTiming &b) { return a.exec < b.exec; });
  session.shutdown();
  return run;
}

inline nlohmann::json to_json(const BenchRun &run) {
  nlohmann::json j;
  j["workers"] = run.workers;
  j["ok"] = run.ok;
  j["wall_ms"] = run.wall_ms;
  j["reused_execs"] = run.reused;
  j["fresh_execs"] = run.fresh;
  j["versions"] = nlohmann::json::array();
  for (const auto &[v, c] : run.by_version)
    j["versions"].push_back({{"version", v.value}, {"reused", c.reused}, {"fresh", c.fresh}});
  j["execs"] = nlohmann::json::array();
  for (const auto &e : run.execs)
    j["execs"].push_back(
        {{"exec", e.exec.value}, {"status", std::string(to_string(e.status))}, {"ms", e.ms}});
  return j;
}

/// Runs the script with `workers` (default: one per hardware thread) and
/// with one worker; speedup is the ratio of the single-worker wall time to
/// the measured one.
inline nlohmann::json bench(const std::vector<script::Line> &lines, SessionOptions session_options) {
  unsigned workers = session_options.workers > 0 ? session_options.workers
                                                 : std::max(1u, std::thread::hardware_concurrency());
  session_options.workers = workers;
  BenchRun measured = bench_run(lines, session_options);
  SessionOptions single = session_options;
  single.workers = 1;
  BenchRun baseline = bench_run(lines, single);
  nlohmann::json j = to_json(measured);
  j["baseline_wall_ms"] = baseline.wall_ms;
  j["speedup"] = measured.wall_ms > 0 ? baseline.wall_ms / measured.wall_ms : 0.0;
  return j;
}

} // namespace pide

#endif // PIDE_REPLAY_HPP
