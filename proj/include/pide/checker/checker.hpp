#ifndef PIDE_CHECKER_CHECKER_HPP
#define PIDE_CHECKER_CHECKER_HPP

// The checker side of the protocol. Input is processed in arrival order on
// one thread: command definitions are recorded, updates are parsed and
// elaborated per node, assigned, and their evaluations are handed to a
// worker pool. All output goes through one serial-stamping emitter.

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pide/checker/elaborate.hpp"
#include "pide/checker/execute.hpp"
#include "pide/checker/lexer.hpp"
#include "pide/checker/syntax.hpp"
#include "pide/document.hpp"
#include "pide/protocol.hpp"

namespace pide::checker {

class ThreadPool {
public:
  explicit ThreadPool(unsigned workers) {
    workers = std::max(workers, 1u);
    for (unsigned i = 0; i < workers; ++i)
      threads_.emplace_back([this] { loop(); });
  }

  ThreadPool(const ThreadPool &) = delete;
  ThreadPool &operator=(const ThreadPool &) = delete;

  ~ThreadPool() { shutdown(); }

  void submit(std::function<void()> task) {
    std::lock_guard lock(mutex_);
    tasks_.push_back(std::move(task));
    cv_.notify_one();
  }

  /// Runs the remaining queued tasks, then joins the workers.
  void shutdown() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
      cv_.notify_all();
    }
    for (auto &t : threads_)
      if (t.joinable())
        t.join();
    threads_.clear();
  }

  std::size_t size() const { return threads_.size(); }

private:
  void loop() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return stopping_ || !tasks_.empty(); });
        if (tasks_.empty())
          return;
        task = std::move(tasks_.front());
        tasks_.pop_front();
      }
      task();
    }
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> tasks_;
  std::vector<std::thread> threads_;
  bool stopping_ = false;
};

struct CheckerOptions {
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  /// Write a line of raw text to standard output on every update. Used to
  /// show that stray output stays outside the protocol.
  bool stray_stdout = false;
};

class Checker {
public:
  Checker(int fd, CheckerOptions options)
      : options_(options),
        channel_(
            fd, [this](std::string payload) { enqueue(std::move(payload)); },
            [this](const std::string &error) { on_close(error); }),
        pool_(options.workers) {}

  Checker(const Checker &) = delete;
  Checker &operator=(const Checker &) = delete;

  /// Serves the channel until the peer closes it.
  void run() {
    channel_.start();
    send(protocol::Ready{pool_.size()});
    for (;;) {
      std::string payload;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return !inbox_.empty() || eof_; });
        if (inbox_.empty())
          break;
        payload = std::move(inbox_.front());
        inbox_.pop_front();
      }
      try {
        handle(protocol::decode_input(payload));
      } catch (const std::exception &ex) {
        std::fprintf(stderr, "pide-checker: dropped input: %s\n", ex.what());
      }
    }
    for (auto &[id, exec] : execs_)
      exec->cancel.store(true);
    pool_.shutdown();
    channel_.close();
  }

  std::uint64_t tasks_started() const { return tasks_started_.load(); }

private:
  struct ExecRecord {
    ExecId id;
    CalcState out;
    std::atomic<bool> cancel{false};
  };

  using NodeAssignment = std::vector<std::pair<CommandId, ExecId>>;
  using VersionAssignment = std::map<NodeName, NodeAssignment>;

  void enqueue(std::string payload) {
    std::lock_guard lock(mutex_);
    inbox_.push_back(std::move(payload));
    cv_.notify_one();
  }

  void on_close(const std::string &error) {
    if (!error.empty())
      std::fprintf(stderr, "pide-checker: channel error: %s\n", error.c_str());
    std::lock_guard lock(mutex_);
    eof_ = true;
    cv_.notify_one();
  }

  void send(const protocol::Output &out) {
    std::lock_guard lock(emit_mutex_);
    try {
      channel_.send(protocol::encode_output(out));
    } catch (const ProtocolError &) {
      // peer gone; nothing left to report to
    }
  }

  void emit(ExecId exec, MessageKind kind, std::optional<Range> range, Body body) {
    std::lock_guard lock(emit_mutex_);
    Message m{++serial_, kind, exec, range, std::move(body)};
    try {
      channel_.send(protocol::encode_output(protocol::MessageOutput{std::move(m)}));
    } catch (const ProtocolError &) {
    }
  }

  void emit_status(ExecId exec, std::string_view status, Attributes attrs = {}) {
    emit(exec, MessageKind::status, std::nullopt, {elem(std::string(status), std::move(attrs))});
  }

  void handle(const protocol::Input &input) {
    std::visit(
        [this](const auto &in) {
          using T = std::decay_t<decltype(in)>;
          if constexpr (std::is_same_v<T, protocol::DefineCommands>) {
            for (const auto &c : in.commands)
              commands_[c.id] = c;
          } else if constexpr (std::is_same_v<T, protocol::Update>) {
            update(in);
          } else if constexpr (std::is_same_v<T, protocol::RemoveVersions>) {
            remove_versions(in);
          } else {
            auto it = execs_.find(in.exec);
            if (it != execs_.end())
              it->second->cancel.store(true);
          }
        },
        input);
  }

  struct Job {
    std::shared_ptr<ExecRecord> exec;
    Elaborated elaborated;
    std::string source;
  };

  void update(const protocol::Update &u) {
    if (options_.stray_stdout) {
      std::printf("pide-checker: update %llu -> %llu\n",
                  static_cast<unsigned long long>(u.old_version.value),
                  static_cast<unsigned long long>(u.new_version.value));
      std::fflush(stdout);
    }
    VersionAssignment next;
    if (auto it = versions_.find(u.old_version); it != versions_.end())
      next = it->second;

    std::vector<Job> jobs;
    std::vector<std::vector<Token>> job_tokens;
    for (const auto &ns : u.nodes) {
      const NodeAssignment old = next[ns.node];
      std::size_t prefix = 0;
      while (prefix < old.size() && prefix < ns.commands.size() &&
             old[prefix].first == ns.commands[prefix] && execs_.count(old[prefix].second))
        ++prefix;

      CalcState state = prefix > 0 ? execs_.at(old[prefix - 1].second)->out : CalcState{};
      NodeAssignment assigned(old.begin(), old.begin() + static_cast<std::ptrdiff_t>(prefix));
      for (std::size_t i = prefix; i < ns.commands.size(); ++i) {
        std::string source;
        if (auto c = commands_.find(ns.commands[i]); c != commands_.end())
          source = c->second.source;
        else
          std::fprintf(stderr, "pide-checker: undefined command %llu\n",
                       static_cast<unsigned long long>(ns.commands[i].value));
        auto tokens = tokenize(source);
        auto [elaborated, after] = elaborate(parse_command(source, tokens), state);
        state = std::move(after);
        auto record = std::make_shared<ExecRecord>();
        record->id = ExecId{next_exec_++};
        record->out = state;
        execs_[record->id] = record;
        assigned.emplace_back(ns.commands[i], record->id);
        jobs.push_back(Job{record, std::move(elaborated), std::move(source)});
        job_tokens.push_back(std::move(tokens));
      }
      next[ns.node] = std::move(assigned);
    }

    protocol::AssignUpdate au{u.new_version, {}};
    for (const auto &[node, list] : next)
      au.assignment.insert(au.assignment.end(), list.begin(), list.end());
    versions_[u.new_version] = std::move(next);
    send(au);

    for (std::size_t i = 0; i < jobs.size(); ++i) {
      Body report = token_report(job_tokens[i]);
      if (!report.empty())
        emit(jobs[i].exec->id, MessageKind::report, std::nullopt, std::move(report));
      auto job = std::make_shared<Job>(std::move(jobs[i]));
      pool_.submit([this, job] { evaluate(*job); });
    }
  }

  void evaluate(const Job &job) {
    tasks_started_.fetch_add(1);
    const ExecId id = job.exec->id;
    emit_status(id, "running");
    if (job.exec->cancel.load()) {
      emit_status(id, "cancelled");
      return;
    }
    try {
      Executor executor(
          job.source,
          [this, id](MessageKind kind, std::optional<Range> range, Body body) {
            emit(id, kind, range, std::move(body));
          },
          &job.exec->cancel);
      ExecOutcome outcome = executor.run(job.elaborated);
      if (outcome.status == ExecStatus::failed)
        emit_status(id, "failed");
      else if (outcome.unchecked)
        emit_status(id, "finished", {{"outcome", "unchecked"}});
      else
        emit_status(id, "finished");
    } catch (const Cancelled &) {
      emit_status(id, "cancelled");
    }
  }

  void remove_versions(const protocol::RemoveVersions &rv) {
    for (auto v : rv.versions)
      versions_.erase(v);
    std::set<ExecId> live_execs;
    std::set<CommandId> live_commands;
    for (const auto &[v, nodes] : versions_)
      for (const auto &[node, list] : nodes)
        for (const auto &[cmd, exec] : list) {
          live_execs.insert(exec);
          live_commands.insert(cmd);
        }
    for (auto it = execs_.begin(); it != execs_.end();) {
      if (!live_execs.count(it->first)) {
        it->second->cancel.store(true);
        it = execs_.erase(it);
      } else {
        ++it;
      }
    }
    for (auto it = commands_.begin(); it != commands_.end();)
      it = live_commands.count(it->first) ? std::next(it) : commands_.erase(it);
  }

  CheckerOptions options_;
  protocol::Channel channel_;
  ThreadPool pool_;

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::string> inbox_;
  bool eof_ = false;

  std::mutex emit_mutex_;
  std::uint64_t serial_ = 0;

  std::unordered_map<CommandId, protocol::CommandDefinition> commands_;
  std::map<VersionId, VersionAssignment> versions_{{VersionId{0}, {}}};
  std::unordered_map<ExecId, std::shared_ptr<ExecRecord>> execs_;
  std::uint64_t next_exec_ = 1;
  std::atomic<std::uint64_t> tasks_started_{0};
};

} // namespace pide::checker

#endif // PIDE_CHECKER_CHECKER_HPP
