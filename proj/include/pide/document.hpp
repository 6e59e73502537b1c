#ifndef PIDE_DOCUMENT_HPP
#define PIDE_DOCUMENT_HPP

// Versioned document model: immutable versions partitioned into command
// spans, exec assignments, accumulating exec states, and snapshots that
// answer markup queries while edits are still pending.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pide/edit.hpp"
#include "pide/ids.hpp"
#include "pide/markup.hpp"

namespace pide {

using NodeName = std::string;

inline constexpr std::array<std::string_view, 8> kCommandKeywords = {
    "notepad", "begin", "end", "let", "have", "also", "finally", "print"};

inline bool is_command_keyword(std::string_view word) {
  return std::find(kCommandKeywords.begin(), kCommandKeywords.end(), word) !=
         kCommandKeywords.end();
}

inline bool is_word_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

inline bool is_word_char(char c) {
  return is_word_start(c) || (c >= '0' && c <= '9') || c == '\'';
}

struct Command {
  CommandId id;
  std::string name; // keyword, or empty for the malformed leading span
  std::string source;

  bool malformed() const { return name.empty(); }
};

using CommandPtr = std::shared_ptr<const Command>;

/// A command span before it has been given an identity.
struct Span {
  std::string name;
  std::string source;
  friend bool operator==(const Span &, const Span &) = default;
};

/// Splits text before every top-level command keyword. Keywords inside
/// double-quoted strings do not count. Leading text before the first keyword
/// becomes a single malformed span.
inline std::vector<Span> parse_spans(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string>> starts;
  bool in_string = false;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (in_string) {
      if (c == '"')
        in_string = false;
      ++i;
    } else if (c == '"') {
      in_string = true;
      ++i;
    } else if (is_word_start(c) && (i == 0 || !is_word_char(text[i - 1]))) {
      std::size_t j = i;
      while (j < text.size() && is_word_char(text[j]))
        ++j;
      std::string_view word = text.substr(i, j - i);
      if (is_command_keyword(word))
        starts.emplace_back(i, std::string(word));
      i = j;
    } else {
      ++i;
    }
  }
  std::vector<Span> spans;
  std::size_t first = starts.empty() ? text.size() : starts.front().first;
  if (first > 0)
    spans.push_back(Span{"", std::string(text.substr(0, first))});
  for (std::size_t k = 0; k < starts.size(); ++k) {
    std::size_t end = k + 1 < starts.size() ? starts[k + 1].first : text.size();
    spans.push_back(
        Span{starts[k].second, std::string(text.substr(starts[k].first, end - starts[k].first))});
  }
  return spans;
}

using CommandList = std::vector<CommandPtr>;

inline std::string node_text(const CommandList &commands) {
  std::string out;
  for (const auto &c : commands)
    out += c->source;
  return out;
}

/// Immutable document version.
struct Version {
  VersionId id;
  std::map<NodeName, CommandList> nodes;

  const CommandList &commands(const NodeName &node) const {
    static const CommandList empty;
    auto it = nodes.find(node);
    return it == nodes.end() ? empty : it->second;
  }
  std::string text(const NodeName &node) const { return node_text(commands(node)); }
};

using VersionPtr = std::shared_ptr<const Version>;

struct NodeEdits {
  NodeName node;
  TextEdits edits;
};

struct NodeChange {
  NodeName node;
  std::vector<CommandId> removed;
  CommandList inserted;
};

struct UpdateResult {
  VersionPtr version;
  std::vector<NodeChange> changes;
};

/// Re-partitions `old_commands` after `edits`, reusing the longest matching
/// prefix and suffix of command spans. Throws BoundsError on invalid edits.
inline NodeChange update_node(const CommandList &old_commands, const TextEdits &edits,
                              IdCounter<CommandId> &ids, CommandList &out) {
  std::string text = apply_edits(node_text(old_commands), edits);
  std::vector<Span> spans = parse_spans(text);

  const std::size_t n = old_commands.size();
  const std::size_t m = spans.size();
  std::size_t prefix = 0;
  while (prefix < n && prefix < m && old_commands[prefix]->source == spans[prefix].source &&
         old_commands[prefix]->name == spans[prefix].name)
    ++prefix;
  std::size_t suffix = 0;
  while (suffix + prefix < n && suffix + prefix < m &&
         old_commands[n - 1 - suffix]->source == spans[m - 1 - suffix].source &&
         old_commands[n - 1 - suffix]->name == spans[m - 1 - suffix].name)
    ++suffix;

  NodeChange change;
  out.clear();
  out.reserve(m);
  for (std::size_t i = 0; i < prefix; ++i)
    out.push_back(old_commands[i]);
  for (std::size_t i = prefix; i < m - suffix; ++i) {
    auto cmd = std::make_shared<const Command>(
        Command{ids.next(), std::move(spans[i].name), std::move(spans[i].source)});
    out.push_back(cmd);
    change.inserted.push_back(cmd);
  }
  for (std::size_t i = m - suffix; i < m; ++i)
    out.push_back(old_commands[n - m + i]);
  for (std::size_t i = prefix; i < n - suffix; ++i)
    change.removed.push_back(old_commands[i]->id);
  return change;
}

/// Applies a multi-node edit batch atomically, producing a new version.
inline UpdateResult update(const Version &old_version, const std::vector<NodeEdits> &batch,
                           VersionId new_id, IdCounter<CommandId> &ids) {
  auto next = std::make_shared<Version>();
  next->id = new_id;
  next->nodes = old_version.nodes;
  UpdateResult result;
  for (const auto &ne : batch) {
    CommandList commands;
    NodeChange change = update_node(next->commands(ne.node), ne.edits, ids, commands);
    change.node = ne.node;
    next->nodes[ne.node] = std::move(commands);
    result.changes.push_back(std::move(change));
  }
  result.version = std::move(next);
  return result;
}

// ---------------------------------------------------------------------------
// Execution results

struct Assignment {
  VersionId version;
  std::unordered_map<CommandId, ExecId> command_to_exec;
  bool complete = false;

  std::optional<ExecId> exec_of(CommandId command) const {
    auto it = command_to_exec.find(command);
    if (it == command_to_exec.end())
      return std::nullopt;
    return it->second;
  }
};

using AssignmentPtr = std::shared_ptr<const Assignment>;

enum class ExecStatus { pending, running, finished, failed, cancelled };

inline std::string_view to_string(ExecStatus s) {
  switch (s) {
  case ExecStatus::pending: return "pending";
  case ExecStatus::running: return "running";
  case ExecStatus::finished: return "finished";
  case ExecStatus::failed: return "failed";
  case ExecStatus::cancelled: return "cancelled";
  }
  return "?";
}

inline std::optional<ExecStatus> exec_status_from(std::string_view s) {
  if (s == "pending") return ExecStatus::pending;
  if (s == "running") return ExecStatus::running;
  if (s == "finished") return ExecStatus::finished;
  if (s == "failed") return ExecStatus::failed;
  if (s == "cancelled") return ExecStatus::cancelled;
  return std::nullopt;
}

inline bool is_terminal(ExecStatus s) {
  return s == ExecStatus::finished || s == ExecStatus::failed || s == ExecStatus::cancelled;
}

/// pending -> running -> {finished | failed | cancelled}
inline bool is_valid_transition(ExecStatus from, ExecStatus to) {
  if (from == ExecStatus::pending)
    return to == ExecStatus::running;
  if (from == ExecStatus::running)
    return is_terminal(to);
  return false;
}

using Clock = std::chrono::steady_clock;

struct ExecState {
  ExecId exec;
  ExecStatus status = ExecStatus::pending;
  std::vector<Message> messages;
  MarkupStore markup;
  std::optional<Clock::time_point> started;
  std::optional<Clock::time_point> stopped;
};

using ExecStatePtr = std::shared_ptr<const ExecState>;

// ---------------------------------------------------------------------------
// Snapshots

/// Immutable view of the latest assigned version of one node, together with
/// the edits submitted after it. Queries never block.
struct Snapshot {
  VersionPtr version;
  NodeName node;
  TextEdits pending_edits;
  bool is_outdated = false;
  AssignmentPtr assignment;
  std::unordered_map<ExecId, ExecStatePtr> execs;

  const CommandList &commands() const { return version->commands(node); }

  ExecStatePtr exec_state(CommandId command) const {
    if (!assignment)
      return nullptr;
    auto exec = assignment->exec_of(command);
    if (!exec)
      return nullptr;
    auto it = execs.find(*exec);
    return it == execs.end() ? nullptr : it->second;
  }

  /// Node text with pending edits applied.
  std::string current_text() const { return apply_edits(version->text(node), pending_edits); }

  /// Maps a version range of this node into current-text coordinates;
  /// nullopt if a nonempty range was entirely removed by pending edits.
  std::optional<Range> to_current(Range r) const {
    if (r.empty()) {
      std::size_t p = convert(r.start, pending_edits);
      return Range{p, p};
    }
    Range out{convert(r.start, pending_edits, Gravity::right),
              convert(r.stop, pending_edits, Gravity::left)};
    if (out.start >= out.stop)
      return std::nullopt;
    return out;
  }
};

struct MarkupHit {
  Range range; // current-text coordinates, relative to the node
  CommandId command;
  PositionedMarkup markup; // range in command-span coordinates of the version
};

/// Answers a markup query in current-text coordinates from the (possibly
/// outdated) assigned version of the snapshot.
inline std::vector<MarkupHit> markup_query(const Snapshot &snap, Range range) {
  std::vector<MarkupHit> hits;
  if (!snap.version)
    return hits;
  Range q{revert(range.start, snap.pending_edits, Gravity::right),
          revert(range.stop, snap.pending_edits, Gravity::left)};
  if (q.stop < q.start)
    q.stop = q.start;
  if (!range.empty() && q.empty())
    return hits;

  std::size_t offset = 0;
  for (const auto &cmd : snap.commands()) {
    Range span{offset, offset + cmd->source.size()};
    offset = span.stop;
    if (!span.intersects(q) && !(span.empty() && q.intersects(span)))
      continue;
    auto state = snap.exec_state(cmd->id);
    if (!state)
      continue;
    Range local{q.start > span.start ? q.start - span.start : 0,
                std::min(q.stop, span.stop) - span.start};
    if (local.stop < local.start)
      local.stop = local.start;
    for (auto &entry : state->markup.query(local)) {
      auto current = snap.to_current(
          Range{span.start + entry.range.start, span.start + entry.range.stop});
      if (!current || !current->intersects(range))
        continue;
      hits.push_back(MarkupHit{*current, cmd->id, std::move(entry)});
    }
  }
  return hits;
}

} // namespace pide

#endif // PIDE_DOCUMENT_HPP
