#ifndef PIDE_PROTOCOL_HPP
#define PIDE_PROTOCOL_HPP

// Private byte protocol between the session and the checker process.
//
// Framing: ASCII decimal payload length, one '\n', then exactly that many
// payload bytes. Every payload is the YXML encoding of a single element
// whose name is the protocol message name.
//
// Inputs (session -> checker):
//   define_commands  <command id=N name=K>source</command>*
//   update           old=V new=V  <node name=N><command id=C/>*</node>*
//   remove_versions  <version id=V/>*
//   cancel_exec      exec=E
//
// Outputs (checker -> session):
//   ready            workers=N                        (once, at startup)
//   assign_update    version=V  <assign command=C exec=E/>*
//   message          kind=K exec=E serial=S [offset=A end_offset=B]  body

#include <cerrno>
#include <chrono>
#include <charconv>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <sys/socket.h>
#include <unistd.h>

#include "pide/document.hpp"
#include "pide/error.hpp"
#include "pide/ids.hpp"
#include "pide/markup.hpp"
#include "pide/yxml.hpp"

namespace pide::protocol {

// ---------------------------------------------------------------------------
// Chunk framing

inline std::string encode_chunk(std::string_view payload) {
  std::string out = std::to_string(payload.size());
  out += '\n';
  out += payload;
  return out;
}

inline constexpr std::size_t kMaxHeaderDigits = 19;

/// Decodes one frame from the front of `buffer`. Returns nullopt when the
/// buffer does not yet hold a complete frame; `consumed` is set to the frame
/// size otherwise. Throws ProtocolError on a malformed header.
inline std::optional<std::string> decode_chunk(std::string_view buffer, std::size_t &consumed) {
  std::size_t i = 0;
  std::uint64_t length = 0;
  while (i < buffer.size() && buffer[i] != '\n') {
    char c = buffer[i];
    if (c < '0' || c > '9')
      throw ProtocolError("non-digit byte in chunk header at offset " + std::to_string(i));
    if (i >= kMaxHeaderDigits)
      throw ProtocolError("chunk header too long");
    length = length * 10 + static_cast<std::uint64_t>(c - '0');
    ++i;
  }
  if (i == buffer.size())
    return std::nullopt;
  if (i == 0)
    throw ProtocolError("empty chunk header");
  std::size_t start = i + 1;
  if (buffer.size() - start < length)
    return std::nullopt;
  consumed = start + length;
  return std::string(buffer.substr(start, length));
}

/// Incremental frame decoder over a byte stream.
class ChunkDecoder {
public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }

  std::optional<std::string> next() {
    std::size_t consumed = 0;
    auto chunk = decode_chunk(std::string_view(buffer_).substr(offset_), consumed);
    if (!chunk)
      return std::nullopt;
    offset_ += consumed;
    if (offset_ > 1 << 16 && offset_ * 2 > buffer_.size()) {
      buffer_.erase(0, offset_);
      offset_ = 0;
    }
    return chunk;
  }

  /// Bytes received but not yet consumed by a complete frame.
  std::size_t pending() const { return buffer_.size() - offset_; }

  /// Call at end of stream: a partial frame is a fatal protocol error.
  void finish() const {
    if (pending() != 0)
      throw ProtocolError("end of stream inside a chunk (" + std::to_string(pending()) +
                          " bytes pending)");
  }

private:
  std::string buffer_;
  std::size_t offset_ = 0;
};

// ---------------------------------------------------------------------------
// Message schemas

inline std::optional<std::uint64_t> parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  if (s.empty())
    return std::nullopt;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    return std::nullopt;
  return v;
}

inline std::uint64_t require_u64(const Element &e, std::string_view key) {
  auto v = e.attribute(key);
  if (!v)
    throw ProtocolError("<" + e.name + "> lacks attribute " + std::string(key));
  auto n = parse_u64(*v);
  if (!n)
    throw ProtocolError("<" + e.name + "> attribute " + std::string(key) + " is not a number");
  return *n;
}

struct CommandDefinition {
  CommandId id;
  std::string name;
  std::string source;
  friend bool operator==(const CommandDefinition &, const CommandDefinition &) = default;
};

struct DefineCommands {
  std::vector<CommandDefinition> commands;
  friend bool operator==(const DefineCommands &, const DefineCommands &) = default;
};

struct NodeStructure {
  NodeName node;
  std::vector<CommandId> commands;
  friend bool operator==(const NodeStructure &, const NodeStructure &) = default;
};

struct Update {
  VersionId old_version;
  VersionId new_version;
  std::vector<NodeStructure> nodes;
  friend bool operator==(const Update &, const Update &) = default;
};

struct RemoveVersions {
  std::vector<VersionId> versions;
  friend bool operator==(const RemoveVersions &, const RemoveVersions &) = default;
};

struct CancelExec {
  ExecId exec;
  friend bool operator==(const CancelExec &, const CancelExec &) = default;
};

using Input = std::variant<DefineCommands, Update, RemoveVersions, CancelExec>;

struct Ready {
  std::uint64_t workers = 0;
  friend bool operator==(const Ready &, const Ready &) = default;
};

struct AssignUpdate {
  VersionId version;
  std::vector<std::pair<CommandId, ExecId>> assignment;
  friend bool operator==(const AssignUpdate &, const AssignUpdate &) = default;
};

struct MessageOutput {
  Message message;
  friend bool operator==(const MessageOutput &, const MessageOutput &) = default;
};

using Output = std::variant<Ready, AssignUpdate, MessageOutput>;

inline Tree to_element(const Input &input) {
  return std::visit(
      [](const auto &in) -> Tree {
        using T = std::decay_t<decltype(in)>;
        if constexpr (std::is_same_v<T, DefineCommands>) {
          Body body;
          for (const auto &c : in.commands) {
            Body src;
            if (!c.source.empty())
              src.push_back(text(c.source));
            body.push_back(elem("command", {{"id", to_string(c.id)}, {"name", c.name}}, std::move(src)));
          }
          return elem("define_commands", {}, std::move(body));
        } else if constexpr (std::is_same_v<T, Update>) {
          Body nodes;
          for (const auto &n : in.nodes) {
            Body cmds;
            for (auto id : n.commands)
              cmds.push_back(elem("command", {{"id", to_string(id)}}));
            nodes.push_back(elem("node", {{"name", n.node}}, std::move(cmds)));
          }
          return elem("update",
                      {{"old", to_string(in.old_version)}, {"new", to_string(in.new_version)}},
                      std::move(nodes));
        } else if constexpr (std::is_same_v<T, RemoveVersions>) {
          Body body;
          for (auto v : in.versions)
            body.push_back(elem("version", {{"id", to_string(v)}}));
          return elem("remove_versions", {}, std::move(body));
        } else {
          return elem("cancel_exec", {{"exec", to_string(in.exec)}});
        }
      },
      input);
}

inline Tree to_element(const Output &output) {
  return std::visit(
      [](const auto &out) -> Tree {
        using T = std::decay_t<decltype(out)>;
        if constexpr (std::is_same_v<T, Ready>) {
          return elem("ready", {{"workers", std::to_string(out.workers)}});
        } else if constexpr (std::is_same_v<T, AssignUpdate>) {
          Body body;
          for (const auto &[cmd, exec] : out.assignment)
            body.push_back(elem("assign", {{"command", to_string(cmd)}, {"exec", to_string(exec)}}));
          return elem("assign_update", {{"version", to_string(out.version)}}, std::move(body));
        } else {
          const Message &m = out.message;
          Attributes attrs{{"kind", std::string(to_string(m.kind))},
                           {"exec", to_string(m.exec)},
                           {"serial", std::to_string(m.serial)}};
          if (m.range) {
            attrs.emplace_back("offset", std::to_string(m.range->start));
            attrs.emplace_back("end_offset", std::to_string(m.range->stop));
          }
          return elem("message", std::move(attrs), m.body);
        }
      },
      output);
}

inline std::vector<const Element *> children_named(const Element &e, std::string_view name) {
  std::vector<const Element *> out;
  for (const auto &child : e.body) {
    if (!child.is_element())
      continue;
    if (child.element().name != name)
      throw ProtocolError("unexpected <" + child.element().name + "> in <" + e.name + ">");
    out.push_back(&child.element());
  }
  return out;
}

inline Input input_from_element(const Element &e) {
  if (e.name == "define_commands") {
    DefineCommands dc;
    for (const Element *c : children_named(e, "command")) {
      auto name = c->attribute("name");
      if (!name)
        throw ProtocolError("<command> lacks name");
      dc.commands.push_back(
          {CommandId{require_u64(*c, "id")}, std::string(*name), text_content(Tree{*c})});
    }
    return dc;
  }
  if (e.name == "update") {
    Update u{VersionId{require_u64(e, "old")}, VersionId{require_u64(e, "new")}, {}};
    for (const Element *n : children_named(e, "node")) {
      auto name = n->attribute("name");
      if (!name)
        throw ProtocolError("<node> lacks name");
      NodeStructure ns{std::string(*name), {}};
      for (const Element *c : children_named(*n, "command"))
        ns.commands.push_back(CommandId{require_u64(*c, "id")});
      u.nodes.push_back(std::move(ns));
    }
    return u;
  }
  if (e.name == "remove_versions") {
    RemoveVersions rv;
    for (const Element *v : children_named(e, "version"))
      rv.versions.push_back(VersionId{require_u64(*v, "id")});
    return rv;
  }
  if (e.name == "cancel_exec")
    return CancelExec{ExecId{require_u64(e, "exec")}};
  throw ProtocolError("unknown protocol input <" + e.name + ">");
}

inline Output output_from_element(const Element &e) {
  if (e.name == "ready")
    return Ready{require_u64(e, "workers")};
  if (e.name == "assign_update") {
    AssignUpdate au{VersionId{require_u64(e, "version")}, {}};
    for (const Element *a : children_named(e, "assign"))
      au.assignment.emplace_back(CommandId{require_u64(*a, "command")},
                                 ExecId{require_u64(*a, "exec")});
    return au;
  }
  if (e.name == "message") {
    Message m;
    auto kind = e.attribute("kind");
    if (!kind || !message_kind_from(*kind))
      throw ProtocolError("<message> has no valid kind");
    m.kind = *message_kind_from(*kind);
    m.exec = ExecId{require_u64(e, "exec")};
    m.serial = require_u64(e, "serial");
    if (m.serial == 0)
      throw ProtocolError("message serial must be positive");
    if (e.attribute("offset") || e.attribute("end_offset")) {
      Range r{require_u64(e, "offset"), require_u64(e, "end_offset")};
      if (r.stop < r.start)
        throw ProtocolError("message range is inverted");
      m.range = r;
    }
    m.body = e.body;
    return MessageOutput{std::move(m)};
  }
  throw ProtocolError("unknown protocol output <" + e.name + ">");
}

inline std::string encode_input(const Input &input) { return yxml::encode(to_element(input)); }
inline std::string encode_output(const Output &output) { return yxml::encode(to_element(output)); }

inline Input decode_input(std::string_view payload) {
  return input_from_element(yxml::parse_element(payload));
}

inline Output decode_output(std::string_view payload) {
  return output_from_element(yxml::parse_element(payload));
}

// ---------------------------------------------------------------------------
// Channel

/// Bidirectional framed channel over a socket. A dedicated thread drains an
/// unbounded send queue, so send() never waits for the peer. Another thread
/// reads frames and hands each payload to `on_chunk`. `on_close` runs once,
/// with an empty string on clean end of stream or an error description.
class Channel {
public:
  using ChunkHandler = std::function<void(std::string)>;
  using CloseHandler = std::function<void(const std::string &)>;

  Channel(int fd, ChunkHandler on_chunk, CloseHandler on_close)
      : fd_(fd), on_chunk_(std::move(on_chunk)), on_close_(std::move(on_close)) {}

  Channel(const Channel &) = delete;
  Channel &operator=(const Channel &) = delete;

  ~Channel() { close(); }

  void start() {
    writer_ = std::thread([this] { write_loop(); });
    reader_ = std::thread([this] { read_loop(); });
  }

  /// Enqueues one framed payload. Throws ProtocolError once the channel is dead.
  void send(std::string_view payload) {
    std::lock_guard lock(mutex_);
    if (closed_)
      throw ProtocolError("channel closed");
    queue_.push_back(encode_chunk(payload));
    cv_.notify_one();
  }

  bool alive() const {
    std::lock_guard lock(mutex_);
    return !closed_;
  }

  /// Flushes queued output (bounded wait), shuts the socket down, and joins
  /// both threads. Must not be called from the close handler.
  void close() {
    {
      std::unique_lock lock(mutex_);
      if (fd_ < 0)
        return;
      closing_ = true;
      cv_.notify_all();
      cv_.wait_for(lock, std::chrono::seconds(1),
                   [&] { return (queue_.empty() && !in_flight_) || closed_; });
    }
    ::shutdown(fd_, SHUT_RDWR);
    if (writer_.joinable())
      writer_.join();
    if (reader_.joinable())
      reader_.join();
    std::lock_guard lock(mutex_);
    ::close(fd_);
    fd_ = -1;
    closed_ = true;
  }

private:
  void write_loop() {
    for (;;) {
      std::string bytes;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return !queue_.empty() || closing_ || closed_; });
        if (queue_.empty() || closed_)
          return;
        bytes = std::move(queue_.front());
        queue_.pop_front();
        in_flight_ = true;
      }
      std::size_t done = 0;
      while (done < bytes.size()) {
        ssize_t n = ::send(fd_, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR)
          continue;
        if (n <= 0) {
          mark_closed();
          return;
        }
        done += static_cast<std::size_t>(n);
      }
      std::lock_guard lock(mutex_);
      in_flight_ = false;
      cv_.notify_all();
    }
  }

  void read_loop() {
    ChunkDecoder decoder;
    std::string error;
    char buf[1 << 16];
    try {
      for (;;) {
        ssize_t n = ::read(fd_, buf, sizeof buf);
        if (n < 0 && errno == EINTR)
          continue;
        if (n <= 0) {
          decoder.finish();
          break;
        }
        decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
        while (auto chunk = decoder.next())
          on_chunk_(std::move(*chunk));
      }
    } catch (const std::exception &ex) {
      error = ex.what();
    }
    mark_closed();
    if (on_close_)
      on_close_(error);
  }

  void mark_closed() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    cv_.notify_all();
  }

  int fd_;
  ChunkHandler on_chunk_;
  CloseHandler on_close_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::string> queue_;
  bool closing_ = false;
  bool in_flight_ = false;
  bool closed_ = false;
  std::thread writer_;
  std::thread reader_;
};

} // namespace pide::protocol

#endif // PIDE_PROTOCOL_HPP
