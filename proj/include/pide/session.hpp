#ifndef PIDE_SESSION_HPP
#define PIDE_SESSION_HPP

// Public API of a prover session: submit edits, take snapshots, remove old
// versions, shut down. The protocol to the checker stays private.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <csignal>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "pide/checker/checker.hpp"
#include "pide/document.hpp"
#include "pide/error.hpp"
#include "pide/model.hpp"
#include "pide/protocol.hpp"

extern char **environ;

namespace pide {

struct SessionOptions {
  /// Path of the checker executable. Empty runs the checker on threads of
  /// this process, still over a socket pair and the same wire protocol.
  std::string checker_path;
  /// Evaluation workers of the checker; 0 leaves the checker default.
  unsigned workers = 0;
  /// Ask the checker to write stray bytes to its standard output.
  bool checker_stray_stdout = false;
};

class Session {
public:
  using Listener = std::function<void()>;

  explicit Session(SessionOptions options) : options_(std::move(options)) {
    published_ = std::make_shared<const Model>(model_);
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0)
      throw ProtocolError("socketpair failed");
    if (options_.checker_path.empty())
      start_in_process(fds[1]);
    else
      start_process(fds[1]);
    channel_ = std::make_unique<protocol::Channel>(
        fds[0], [this](std::string payload) { receive(std::move(payload)); },
        [this](const std::string &error) { channel_closed(error); });
    writer_ = std::thread([this] { writer_loop(); });
    channel_->start();
  }

  Session(const Session &) = delete;
  Session &operator=(const Session &) = delete;

  ~Session() { shutdown(); }

  /// Applies one edit batch to the tip as a new version and sends it to the
  /// checker. Returns without waiting for any checker response. Throws
  /// BoundsError for invalid edits (no version is created), EncodeError for
  /// text containing protocol control bytes, ProtocolError if the session is dead.
  VersionId submit(std::vector<NodeEdits> batch) {
    for (const auto &ne : batch) {
      if (ne.node.empty() || has_control_byte(ne.node))
        throw EncodeError("invalid node name");
      for (const auto &e : ne.edits)
        if (auto *ins = std::get_if<Insert>(&e); ins && has_control_byte(ins->text))
          throw EncodeError("inserted text contains a protocol control byte");
    }
    std::lock_guard lock(writer_mutex_);
    if (!channel_ || !channel_->alive() || stopped_)
      throw ProtocolError("session is not live");
    VersionPtr old = model_.tip_version();
    UpdateResult result = update(*old, batch, VersionId{next_version_}, command_ids_);
    ++next_version_;

    protocol::DefineCommands defs;
    protocol::Update upd{old->id, result.version->id, {}};
    for (const auto &change : result.changes)
      for (const auto &c : change.inserted)
        defs.commands.push_back({c->id, c->name, c->source});
    std::set<NodeName> touched;
    for (const auto &ne : batch)
      touched.insert(ne.node);
    for (const auto &node : touched) {
      protocol::NodeStructure ns{node, {}};
      for (const auto &c : result.version->commands(node))
        ns.commands.push_back(c->id);
      upd.nodes.push_back(std::move(ns));
    }
    VersionId id = result.version->id;
    model_.add_version(result.version, std::move(batch));
    if (!defs.commands.empty())
      channel_->send(protocol::encode_input(defs));
    channel_->send(protocol::encode_input(upd));
    publish_locked();
    return id;
  }

  VersionId submit(const NodeName &node, TextEdits edits) {
    return submit(std::vector<NodeEdits>{NodeEdits{node, std::move(edits)}});
  }

  /// Never blocks on the checker.
  Snapshot snapshot(const NodeName &node) const { return model()->snapshot(node); }

  std::shared_ptr<const Model> model() const {
    std::lock_guard lock(publish_mutex_);
    return published_;
  }

  /// Garbage-collects history outside `keep` on both sides.
  std::vector<VersionId> remove_versions(const std::set<VersionId> &keep) {
    std::lock_guard lock(writer_mutex_);
    std::vector<VersionId> removed = model_.remove_versions(keep);
    if (!removed.empty() && channel_ && channel_->alive())
      channel_->send(protocol::encode_input(protocol::RemoveVersions{removed}));
    publish_locked();
    return removed;
  }

  /// Waits until the tip is assigned and all its execs are terminal.
  /// Returns false on timeout or when the checker is gone.
  bool await_quiescent(std::chrono::milliseconds timeout = std::chrono::seconds(120)) const {
    std::unique_lock lock(wait_mutex_);
    return wait_cv_.wait_for(lock, timeout, [&] { return model()->quiescent() || failed_.load(); }) &&
           !failed_.load();
  }

  /// Stops the checker (within 2 s, forcibly after that) and all threads.
  void shutdown() {
    {
      std::lock_guard lock(writer_mutex_);
      if (stopped_)
        return;
      stopped_ = true;
    }
    if (channel_)
      channel_->close();
    {
      std::lock_guard lock(queue_mutex_);
      queue_closed_ = true;
      queue_cv_.notify_all();
    }
    if (writer_.joinable())
      writer_.join();
    if (in_process_.joinable())
      in_process_.join();
    if (pid_ > 0) {
      auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
      int status = 0;
      while (::waitpid(pid_, &status, WNOHANG) == 0) {
        if (std::chrono::steady_clock::now() > deadline) {
          ::kill(pid_, SIGKILL);
          ::waitpid(pid_, &status, 0);
          note("checker killed after shutdown timeout");
          break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
      }
      pid_ = -1;
    }
    if (stdout_reader_.joinable())
      stdout_reader_.join();
    wait_cv_.notify_all();
  }

  /// Registers a callback run after every publication of new state. It runs
  /// on session threads and must not block.
  std::size_t subscribe(Listener listener) {
    std::lock_guard lock(listener_mutex_);
    listeners_[++next_listener_] = std::move(listener);
    return next_listener_;
  }

  void unsubscribe(std::size_t id) {
    std::lock_guard lock(listener_mutex_);
    listeners_.erase(id);
  }

  /// Checker stray output and protocol anomalies, in arrival order.
  std::vector<std::string> diagnostics() const {
    std::lock_guard lock(diag_mutex_);
    return diagnostics_;
  }

  bool failed() const { return failed_.load(); }
  std::optional<int> checker_pid() const {
    return pid_ > 0 ? std::optional<int>(pid_) : std::nullopt;
  }

private:
  void start_in_process(int fd) {
    checker::CheckerOptions opts;
    if (options_.workers > 0)
      opts.workers = options_.workers;
    opts.stray_stdout = options_.checker_stray_stdout;
    in_process_ = std::thread([fd, opts] {
      checker::Checker checker(fd, opts);
      checker.run();
    });
  }

  void start_process(int fd) {
    int out[2];
    if (::pipe2(out, O_CLOEXEC) != 0) {
      ::close(fd);
      throw ProtocolError("pipe failed");
    }
    constexpr int kChildFd = 3;
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, out[1], STDOUT_FILENO);
    posix_spawn_file_actions_adddup2(&actions, fd, kChildFd);

    std::vector<std::string> args{options_.checker_path, "--fd", std::to_string(kChildFd)};
    if (options_.workers > 0) {
      args.push_back("--workers");
      args.push_back(std::to_string(options_.workers));
    }
    if (options_.checker_stray_stdout)
      args.push_back("--stray-stdout");
    std::vector<char *> argv;
    for (auto &a : args)
      argv.push_back(a.data());
    argv.push_back(nullptr);

    pid_t pid = -1;
    int rc = ::posix_spawn(&pid, options_.checker_path.c_str(), &actions, nullptr, argv.data(),
                           environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fd);
    ::close(out[1]);
    if (rc != 0) {
      ::close(out[0]);
      throw ProtocolError("cannot start checker " + options_.checker_path);
    }
    pid_ = pid;
    stdout_reader_ = std::thread([this, rfd = out[0]] {
      std::string pending;
      char buf[4096];
      for (;;) {
        ssize_t n = ::read(rfd, buf, sizeof buf);
        if (n < 0 && errno == EINTR)
          continue;
        if (n <= 0)
          break;
        pending.append(buf, static_cast<std::size_t>(n));
        std::size_t nl;
        while ((nl = pending.find('\n')) != std::string::npos) {
          note("checker stdout: " + pending.substr(0, nl));
          pending.erase(0, nl + 1);
        }
      }
      if (!pending.empty())
        note("checker stdout: " + pending);
      ::close(rfd);
    });
  }

  void note(std::string line) {
    std::lock_guard lock(diag_mutex_);
    diagnostics_.push_back(std::move(line));
  }

  // Channel reader thread: decode and hand over to the writer.
  void receive(std::string payload) {
    try {
      protocol::Output out = protocol::decode_output(payload);
      std::lock_guard lock(queue_mutex_);
      queue_.push_back(std::move(out));
      queue_cv_.notify_one();
    } catch (const std::exception &ex) {
      note(std::string("malformed checker output skipped: ") + ex.what());
    }
  }

  void channel_closed(const std::string &error) {
    bool expected;
    {
      std::lock_guard lock(writer_mutex_);
      expected = stopped_;
    }
    if (!error.empty())
      note("protocol error: " + error);
    if (!expected) {
      note("checker channel closed unexpectedly");
      failed_.store(true);
    }
    std::lock_guard lock(queue_mutex_);
    queue_cv_.notify_one();
    wait_cv_.notify_all();
  }

  void writer_loop() {
    for (;;) {
      std::deque<protocol::Output> batch;
      {
        std::unique_lock lock(queue_mutex_);
        queue_cv_.wait(lock, [&] { return !queue_.empty() || queue_closed_; });
        if (queue_.empty())
          return;
        batch.swap(queue_);
      }
      std::lock_guard lock(writer_mutex_);
      for (const auto &out : batch) {
        OutputEffects fx = model_.handle_output(out);
        for (auto &n : fx.notes)
          note(std::move(n));
        for (ExecId e : fx.cancel) {
          try {
            if (channel_ && !stopped_)
              channel_->send(protocol::encode_input(protocol::CancelExec{e}));
          } catch (const ProtocolError &) {
          }
        }
      }
      publish_locked();
    }
  }

  void publish_locked() {
    auto copy = std::make_shared<const Model>(model_);
    {
      std::lock_guard lock(publish_mutex_);
      published_ = std::move(copy);
    }
    {
      std::lock_guard lock(wait_mutex_);
      wait_cv_.notify_all();
    }
    // Listeners run under the lock so that unsubscribe() waits for them.
    std::lock_guard lock(listener_mutex_);
    for (const auto &[id, l] : listeners_)
      l();
  }

  SessionOptions options_;

  std::mutex writer_mutex_;
  Model model_;
  IdCounter<CommandId> command_ids_;
  std::uint64_t next_version_ = 1;
  bool stopped_ = false;

  mutable std::mutex publish_mutex_;
  std::shared_ptr<const Model> published_;

  mutable std::mutex wait_mutex_;
  mutable std::condition_variable wait_cv_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<protocol::Output> queue_;
  bool queue_closed_ = false;

  std::mutex listener_mutex_;
  std::map<std::size_t, Listener> listeners_;
  std::size_t next_listener_ = 0;

  mutable std::mutex diag_mutex_;
  std::vector<std::string> diagnostics_;

  std::atomic<bool> failed_{false};
  std::unique_ptr<protocol::Channel> channel_;
  std::thread writer_;
  std::thread in_process_;
  std::thread stdout_reader_;
  pid_t pid_ = -1;
};

} // namespace pide

#endif // PIDE_SESSION_HPP
