#ifndef PIDE_MODEL_HPP
#define PIDE_MODEL_HPP

// Front-end document model: version history, assignments, and accumulating
// exec states. A Model is a plain value. The session mutates one instance
// from a single writer and publishes immutable copies for readers; copies
// share all versions, assignments, and exec states.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pide/document.hpp"
#include "pide/error.hpp"
#include "pide/protocol.hpp"

namespace pide {

struct VersionEntry {
  VersionPtr version;
  /// Edits that lead from the preceding retained version to this one.
  std::vector<NodeEdits> edits;
};

/// Execs of one assignment that were already known vs. newly started.
struct ReuseCount {
  std::uint64_t reused = 0;
  std::uint64_t fresh = 0;
};

/// Effects of applying one protocol output to the model.
struct OutputEffects {
  std::vector<ExecId> cancel;       // execs no longer used by the newest assignment
  std::vector<std::string> notes;   // diagnostics
};

class Model {
public:
  Model() {
    auto v0 = std::make_shared<Version>();
    v0->id = VersionId{0};
    versions_[v0->id] = VersionEntry{v0, {}};
    auto a0 = std::make_shared<Assignment>();
    a0->version = v0->id;
    a0->complete = true;
    assignments_[v0->id] = a0;
  }

  VersionId tip() const { return tip_; }
  VersionId latest_assigned() const { return latest_assigned_; }
  VersionPtr version(VersionId id) const {
    auto it = versions_.find(id);
    return it == versions_.end() ? nullptr : it->second.version;
  }
  VersionPtr tip_version() const { return version(tip_); }

  const std::map<VersionId, VersionEntry> &versions() const { return versions_; }
  const std::map<VersionId, AssignmentPtr> &assignments() const { return assignments_; }
  const std::unordered_map<ExecId, ExecStatePtr> &execs() const { return execs_; }

  ExecStatePtr exec(ExecId id) const {
    auto it = execs_.find(id);
    return it == execs_.end() ? nullptr : it->second;
  }

  std::size_t buffered_messages() const {
    std::size_t n = 0;
    for (const auto &[id, msgs] : buffered_)
      n += msgs.size();
    return n;
  }

  /// Commands reused from earlier assignments vs. freshly assigned execs.
  std::uint64_t reused_execs() const { return reused_; }
  std::uint64_t fresh_execs() const { return fresh_; }
  const std::map<VersionId, ReuseCount> &reuse_by_version() const { return reuse_by_version_; }
  std::optional<std::uint64_t> checker_workers() const { return workers_; }

  /// Records a new tip version produced from the current tip by `edits`.
  void add_version(VersionPtr v, std::vector<NodeEdits> edits) {
    tip_ = v->id;
    versions_[tip_] = VersionEntry{std::move(v), std::move(edits)};
  }

  /// Quiescent: the tip is assigned and all of its execs are terminal.
  bool quiescent() const {
    if (latest_assigned_ != tip_)
      return false;
    auto a = assignments_.at(tip_);
    for (const auto &[cmd, exec] : a->command_to_exec) {
      auto s = this->exec(exec);
      if (!s || !is_terminal(s->status))
        return false;
    }
    return true;
  }

  OutputEffects handle_output(const protocol::Output &output) {
    OutputEffects fx;
    std::visit(
        [&](const auto &out) {
          using T = std::decay_t<decltype(out)>;
          if constexpr (std::is_same_v<T, protocol::Ready>) {
            if (workers_)
              fx.notes.push_back("duplicate ready");
            workers_ = out.workers;
          } else if constexpr (std::is_same_v<T, protocol::AssignUpdate>) {
            assign(out, fx);
          } else {
            deliver(out.message, fx);
          }
        },
        output);
    return fx;
  }

  /// Snapshot of `node`: the latest assigned version plus all edits to the
  /// node submitted after it.
  Snapshot snapshot(const NodeName &node) const {
    Snapshot s;
    s.version = version(latest_assigned_);
    s.node = node;
    for (auto it = versions_.upper_bound(latest_assigned_); it != versions_.end(); ++it)
      for (const auto &ne : it->second.edits)
        if (ne.node == node)
          s.pending_edits.insert(s.pending_edits.end(), ne.edits.begin(), ne.edits.end());
    s.is_outdated = latest_assigned_ != tip_;
    s.assignment = assignments_.at(latest_assigned_);
    for (const auto &cmd : s.version->commands(node))
      if (auto exec = s.assignment->exec_of(cmd->id))
        if (auto st = this->exec(*exec))
          s.execs.emplace(*exec, st);
    return s;
  }

  /// Drops every version outside `keep`, together with assignments and exec
  /// states that no kept assignment reaches. Execs newer than any assignment
  /// seen so far are still in flight and are retained. Returns the removed
  /// versions. Throws Error if `keep` lacks the tip or the latest assigned version.
  std::vector<VersionId> remove_versions(const std::set<VersionId> &keep) {
    if (!keep.count(tip_) || !keep.count(latest_assigned_))
      throw Error("remove_versions must keep the tip and the latest assigned version");
    std::vector<VersionId> removed;
    std::vector<NodeEdits> carry;
    for (auto it = versions_.begin(); it != versions_.end();) {
      if (keep.count(it->first)) {
        if (!carry.empty()) {
          carry.insert(carry.end(), it->second.edits.begin(), it->second.edits.end());
          it->second.edits = std::move(carry);
          carry.clear();
        }
        ++it;
        continue;
      }
      carry.insert(carry.end(), it->second.edits.begin(), it->second.edits.end());
      removed.push_back(it->first);
      assignments_.erase(it->first);
      reuse_by_version_.erase(it->first);
      it = versions_.erase(it);
    }
    std::unordered_set<ExecId> reachable;
    for (const auto &[v, a] : assignments_)
      for (const auto &[cmd, exec] : a->command_to_exec)
        reachable.insert(exec);
    for (auto it = execs_.begin(); it != execs_.end();) {
      if (!reachable.count(it->first) && it->first.value <= max_assigned_exec_) {
        dropped_execs_.insert(it->first);
        it = execs_.erase(it);
      } else {
        ++it;
      }
    }
    for (auto it = buffered_.begin(); it != buffered_.end();) {
      if (it->first.value <= max_assigned_exec_) {
        dropped_execs_.insert(it->first);
        it = buffered_.erase(it);
      } else {
        ++it;
      }
    }
    return removed;
  }

private:
  void assign(const protocol::AssignUpdate &au, OutputEffects &fx) {
    auto vit = versions_.find(au.version);
    for (const auto &[cmd, exec] : au.assignment)
      max_assigned_exec_ = std::max(max_assigned_exec_, exec.value);
    if (vit == versions_.end()) {
      fx.notes.push_back("assignment for unknown version " + to_string(au.version));
      return;
    }
    if (assignments_.count(au.version)) {
      fx.notes.push_back("duplicate assignment for version " + to_string(au.version));
      return;
    }
    std::unordered_map<CommandId, std::size_t> span_length;
    for (const auto &[node, cmds] : vit->second.version->nodes)
      for (const auto &c : cmds)
        span_length[c->id] = c->source.size();

    auto a = std::make_shared<Assignment>();
    a->version = au.version;
    std::vector<ExecId> fresh;
    for (const auto &[cmd, exec] : au.assignment) {
      if (!span_length.count(cmd)) {
        fx.notes.push_back("assignment names unknown command " + to_string(cmd));
        continue;
      }
      a->command_to_exec[cmd] = exec;
      ReuseCount &count = reuse_by_version_[au.version];
      if (execs_.count(exec)) {
        ++reused_;
        ++count.reused;
        continue;
      }
      ++fresh_;
      ++count.fresh;
      auto st = std::make_shared<ExecState>();
      st->exec = exec;
      st->markup = MarkupStore(span_length[cmd]);
      execs_[exec] = st;
      fresh.push_back(exec);
    }
    a->complete = true;

    if (au.version > latest_assigned_) {
      if (auto prev = assignments_.find(latest_assigned_); prev != assignments_.end()) {
        for (const auto &[cmd, exec] : prev->second->command_to_exec) {
          bool kept = std::any_of(a->command_to_exec.begin(), a->command_to_exec.end(),
                                  [&](const auto &p) { return p.second == exec; });
          auto st = this->exec(exec);
          if (!kept && st && !is_terminal(st->status))
            fx.cancel.push_back(exec);
        }
      }
      latest_assigned_ = au.version;
    }
    assignments_[au.version] = std::move(a);

    for (ExecId e : fresh) {
      auto b = buffered_.find(e);
      if (b == buffered_.end())
        continue;
      auto msgs = std::move(b->second);
      buffered_.erase(b);
      for (auto &m : msgs)
        deliver(m, fx);
    }
  }

  void deliver(const Message &m, OutputEffects &fx) {
    auto it = execs_.find(m.exec);
    if (it == execs_.end()) {
      if (!dropped_execs_.count(m.exec))
        buffered_[m.exec].push_back(m);
      return;
    }
    auto next = std::make_shared<ExecState>(*it->second);
    if (!next->messages.empty() && next->messages.back().serial >= m.serial)
      fx.notes.push_back("non-increasing serial " + std::to_string(m.serial) + " for exec " +
                         to_string(m.exec));
    next->messages.push_back(m);
    if (m.kind == MessageKind::status) {
      for (const auto &t : m.body) {
        if (!t.is_element())
          continue;
        auto status = exec_status_from(t.element().name);
        if (!status)
          continue;
        if (!is_valid_transition(next->status, *status)) {
          fx.notes.push_back("invalid status transition " + std::string(to_string(next->status)) +
                             " -> " + std::string(to_string(*status)) + " for exec " +
                             to_string(m.exec));
          continue;
        }
        next->status = *status;
        if (*status == ExecStatus::running)
          next->started = Clock::now();
        else if (is_terminal(*status))
          next->stopped = Clock::now();
      }
    } else if (m.kind == MessageKind::report) {
      for (const auto &t : m.body) {
        if (!t.is_element())
          continue;
        auto pm = positioned_from_element(t.element());
        if (!pm) {
          fx.notes.push_back("report without position: <" + t.element().name + ">");
          continue;
        }
        try {
          next->markup = next->markup.add(std::move(*pm));
        } catch (const BoundsError &ex) {
          fx.notes.push_back(ex.what());
        }
      }
    }
    it->second = std::move(next);
  }

  std::map<VersionId, VersionEntry> versions_;
  std::map<VersionId, AssignmentPtr> assignments_;
  std::unordered_map<ExecId, ExecStatePtr> execs_;
  std::unordered_map<ExecId, std::vector<Message>> buffered_;
  std::unordered_set<ExecId> dropped_execs_;
  std::uint64_t max_assigned_exec_ = 0;
  VersionId tip_{0};
  VersionId latest_assigned_{0};
  std::uint64_t reused_ = 0;
  std::uint64_t fresh_ = 0;
  std::map<VersionId, ReuseCount> reuse_by_version_;
  std::optional<std::uint64_t> workers_;
};

} // namespace pide

#endif // PIDE_MODEL_HPP
