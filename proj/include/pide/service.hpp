#ifndef PIDE_SERVICE_HPP
#define PIDE_SERVICE_HPP

// Websocket endpoint /session exposing a Session to editor clients. Each
// binary frame carries one chunk-framed YXML event.
//
// Inbound:  <open_node node=N/>
//           <edit node=N><insert offset=K>text</insert><remove offset=K length=L/></edit>
//           <query node=N start=S stop=E/>
//           <shutdown/>
// Outbound: <node_state node=N version=V is_outdated=B [seq=Q]>
//             <exec command=C exec=E status=S start=S stop=E/>* [<text>..</text>]
//           </node_state>
//           <markup_delta node=N start=S stop=E [seq=Q]> positioned markup </markup_delta>
//           <message_feed node=N [seq=Q]> <writeln|warning|error start stop>text</..>* </message_feed>
//           <error message=M/>
//
// Ranges are 0-based half-open byte offsets into the current node text.
// Pushes carry a sequence number; replies to query do not.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "pide/document.hpp"
#include "pide/markup.hpp"
#include "pide/pretty.hpp"
#include "pide/protocol.hpp"
#include "pide/session.hpp"
#include "pide/yxml.hpp"

namespace pide::service {

// ---------------------------------------------------------------------------
// Events

struct OpenNode {
  NodeName node;
};
struct EditEvent {
  NodeName node;
  TextEdits edits;
};
struct QueryEvent {
  NodeName node;
  Range range;
};
struct ShutdownEvent {};

using ClientEvent = std::variant<OpenNode, EditEvent, QueryEvent, ShutdownEvent>;

inline constexpr std::string_view kEndpoint = "/session";
inline constexpr std::chrono::milliseconds kPushInterval{30};

inline Tree to_element(const ClientEvent &event) {
  return std::visit(
      [](const auto &e) -> Tree {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, OpenNode>) {
          return elem("open_node", {{"node", e.node}});
        } else if constexpr (std::is_same_v<T, EditEvent>) {
          Body body;
          for (const auto &edit : e.edits) {
            if (auto *ins = std::get_if<Insert>(&edit))
              body.push_back(elem("insert", {{"offset", std::to_string(ins->offset)}},
                                  ins->text.empty() ? Body{} : Body{text(ins->text)}));
            else {
              const auto &rem = std::get<Remove>(edit);
              body.push_back(elem("remove", {{"offset", std::to_string(rem.offset)},
                                             {"length", std::to_string(rem.length)}}));
            }
          }
          return elem("edit", {{"node", e.node}}, std::move(body));
        } else if constexpr (std::is_same_v<T, QueryEvent>) {
          return elem("query", {{"node", e.node},
                                {"start", std::to_string(e.range.start)},
                                {"stop", std::to_string(e.range.stop)}});
        } else {
          return elem("shutdown");
        }
      },
      event);
}

/// Throws ProtocolError for anything that is not a well-formed inbound event.
inline ClientEvent event_from_element(const Element &e) {
  auto node = [&] {
    auto n = e.attribute("node");
    if (!n || n->empty())
      throw ProtocolError("<" + e.name + "> lacks a node");
    return NodeName(*n);
  };
  if (e.name == "open_node")
    return OpenNode{node()};
  if (e.name == "shutdown")
    return ShutdownEvent{};
  if (e.name == "query") {
    Range r{protocol::require_u64(e, "start"), protocol::require_u64(e, "stop")};
    if (r.stop < r.start)
      throw ProtocolError("query range ends before it starts");
    return QueryEvent{node(), r};
  }
  if (e.name == "edit") {
    EditEvent ev{node(), {}};
    for (const auto &t : e.body) {
      if (!t.is_element()) {
        if (text_content(t).find_first_not_of(" \n\t") != std::string::npos)
          throw ProtocolError("text inside <edit>");
        continue;
      }
      const Element &c = t.element();
      if (c.name == "insert")
        ev.edits.push_back(Insert{protocol::require_u64(c, "offset"), text_content(c.body)});
      else if (c.name == "remove") {
        auto length = protocol::require_u64(c, "length");
        if (length == 0)
          throw ProtocolError("remove of length 0");
        ev.edits.push_back(Remove{protocol::require_u64(c, "offset"), length});
      } else
        throw ProtocolError("unknown edit <" + c.name + ">");
    }
    return ev;
  }
  throw ProtocolError("unknown event <" + e.name + ">");
}

/// Chunk-framed YXML payload of one event, as carried in a binary frame.
inline std::string encode_frame(const Tree &event) { return protocol::encode_chunk(yxml::encode(event)); }

/// Decodes one binary frame holding exactly one chunk with one element.
inline Element decode_frame(std::string_view frame) {
  std::size_t consumed = 0;
  auto payload = protocol::decode_chunk(frame, consumed);
  if (!payload || consumed != frame.size())
    throw ProtocolError("frame does not hold exactly one chunk");
  return yxml::parse_element(*payload);
}

// ---------------------------------------------------------------------------
// Outbound events from a snapshot

inline Attributes range_attributes(Range r) {
  return {{"start", std::to_string(r.start)}, {"stop", std::to_string(r.stop)}};
}

inline Tree node_state_event(const Snapshot &snap, bool with_text, std::optional<std::uint64_t> seq) {
  Element e{"node_state", {{"node", snap.node}}, {}};
  e.attributes.emplace_back("version", snap.version ? to_string(snap.version->id) : "0");
  e.attributes.emplace_back("is_outdated", snap.is_outdated ? "true" : "false");
  if (seq)
    e.attributes.emplace_back("seq", std::to_string(*seq));
  if (snap.version) {
    std::size_t offset = 0;
    for (const auto &cmd : snap.commands()) {
      Range span{offset, offset + cmd->source.size()};
      offset = span.stop;
      auto state = snap.exec_state(cmd->id);
      Attributes attrs{{"command", to_string(cmd->id)}};
      if (state) {
        attrs.emplace_back("exec", to_string(state->exec));
        attrs.emplace_back("status", std::string(to_string(state->status)));
      } else {
        attrs.emplace_back("status", "pending");
      }
      if (auto current = snap.to_current(span))
        for (auto &a : range_attributes(*current))
          attrs.push_back(std::move(a));
      e.body.push_back(elem("exec", std::move(attrs)));
    }
  }
  if (with_text) {
    std::string t = snap.version ? snap.current_text() : std::string();
    e.body.push_back(elem("text", {}, t.empty() ? Body{} : Body{text(std::move(t))}));
  }
  return Tree{std::move(e)};
}

/// Positioned markup of `range` in current-text coordinates; exactly the
/// result of markup_query on the snapshot.
inline Tree markup_delta_event(const Snapshot &snap, Range range, std::optional<std::uint64_t> seq) {
  Element e{"markup_delta", {{"node", snap.node}}, {}};
  for (auto &a : range_attributes(range))
    e.attributes.push_back(std::move(a));
  if (seq)
    e.attributes.emplace_back("seq", std::to_string(*seq));
  for (const auto &hit : markup_query(snap, range)) {
    Attributes attrs = range_attributes(hit.range);
    for (const auto &a : hit.markup.attributes)
      attrs.push_back(a);
    e.body.push_back(elem(hit.markup.name, std::move(attrs)));
  }
  return Tree{std::move(e)};
}

/// Displayed messages of the snapshot's commands, formatted as plain text.
inline Tree message_feed_event(const Snapshot &snap, std::optional<std::uint64_t> seq,
                               std::size_t margin = pretty::kDefaultMargin) {
  Element e{"message_feed", {{"node", snap.node}}, {}};
  if (seq)
    e.attributes.emplace_back("seq", std::to_string(*seq));
  if (!snap.version)
    return Tree{std::move(e)};
  std::size_t offset = 0;
  for (const auto &cmd : snap.commands()) {
    Range span{offset, offset + cmd->source.size()};
    offset = span.stop;
    auto state = snap.exec_state(cmd->id);
    if (!state)
      continue;
    for (const auto &m : state->messages) {
      if (!is_displayed(m.kind))
        continue;
      Attributes attrs;
      if (m.range)
        if (auto r = snap.to_current(Range{span.start + m.range->start, span.start + m.range->stop}))
          attrs = range_attributes(*r);
      Body body;
      for (const auto &t : m.body)
        if (t.is_text() || t.element().name != "position")
          body.push_back(t);
      std::string s = text_content(pretty::format_markup(body, margin));
      e.body.push_back(elem(std::string(to_string(m.kind)), std::move(attrs),
                            s.empty() ? Body{} : Body{text(std::move(s))}));
    }
  }
  return Tree{std::move(e)};
}

// ---------------------------------------------------------------------------
// Server

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

/// Parses "host:port", ":port", or "port".
inline tcp::endpoint parse_listen_address(const std::string &address) {
  std::string host = "127.0.0.1";
  std::string port = address;
  if (auto colon = address.rfind(':'); colon != std::string::npos) {
    host = address.substr(0, colon);
    port = address.substr(colon + 1);
    if (host.empty())
      host = "127.0.0.1";
    if (host.size() > 2 && host.front() == '[' && host.back() == ']')
      host = host.substr(1, host.size() - 2);
  }
  auto p = protocol::parse_u64(port);
  if (!p || *p > 65535)
    throw Error("invalid listen address '" + address + "'");
  boost::system::error_code ec;
  auto ip = net::ip::make_address(host == "localhost" ? "127.0.0.1" : host, ec);
  if (ec)
    throw Error("invalid listen host '" + host + "'");
  return tcp::endpoint(ip, static_cast<unsigned short>(*p));
}

class Service;

class Connection : public std::enable_shared_from_this<Connection> {
public:
  Connection(tcp::socket socket, Service &service)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), service_(service) {}

  void start();
  void state_changed();
  void close();

private:
  void on_request(beast::error_code ec);
  void read();
  void on_read(beast::error_code ec);
  void handle(const ClientEvent &event);
  void send(const Tree &event);
  void write_next();
  void push();
  void violation(const std::string &why);

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  net::steady_timer timer_;
  Service &service_;
  std::deque<std::string> outbox_;
  bool writing_ = false;
  bool open_ = false;
  bool closed_ = false;
  bool closing_ = false;
  bool push_scheduled_ = false;
  std::chrono::steady_clock::time_point last_push_{};
  std::uint64_t seq_ = 0;
  std::set<NodeName> nodes_;
  std::set<NodeName> needs_text_;
};

class Service {
public:
  Service(Session &session, const std::string &listen_address)
      : session_(session), acceptor_(ioc_) {
    tcp::endpoint endpoint = parse_listen_address(listen_address);
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen();
    subscription_ = session_.subscribe([this] {
      net::post(ioc_, [this] { broadcast(); });
    });
  }

  Service(const Service &) = delete;
  Service &operator=(const Service &) = delete;

  ~Service() {
    session_.unsubscribe(subscription_);
    stop();
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  /// Serves clients until a client sends shutdown or stop() is called.
  void run() {
    accept();
    ioc_.run();
  }

  /// Thread-safe; stops serving without shutting down the session.
  void stop() {
    net::post(ioc_, [this] { close_all(); });
  }

  Session &session() { return session_; }

  /// Shuts the session (and its checker) down, then stops serving.
  void shutdown_session() {
    close_all();
    session_.shutdown();
  }

  void forget(const Connection *c) {
    connections_.erase(std::remove_if(connections_.begin(), connections_.end(),
                                      [&](const std::weak_ptr<Connection> &w) {
                                        auto s = w.lock();
                                        return !s || s.get() == c;
                                      }),
                       connections_.end());
  }

  std::size_t margin() const { return margin_; }

  /// Called on the serving thread for every push, before its frames are sent.
  using PushObserver =
      std::function<void(const NodeName &, std::uint64_t seq, std::chrono::steady_clock::time_point)>;
  void observe_pushes(PushObserver observer) { push_observer_ = std::move(observer); }
  const PushObserver &push_observer() const { return push_observer_; }

private:
  void accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (ec)
        return;
      auto c = std::make_shared<Connection>(std::move(socket), *this);
      connections_.push_back(c);
      c->start();
      accept();
    });
  }

  void broadcast() {
    for (auto &w : connections_)
      if (auto c = w.lock())
        c->state_changed();
  }

  void close_all() {
    beast::error_code ec;
    acceptor_.close(ec);
    auto all = connections_;
    for (auto &w : all)
      if (auto c = w.lock())
        c->close();
    connections_.clear();
  }

  Session &session_;
  net::io_context ioc_{1};
  tcp::acceptor acceptor_;
  std::vector<std::weak_ptr<Connection>> connections_;
  std::size_t subscription_ = 0;
  std::size_t margin_ = pretty::kDefaultMargin;
  PushObserver push_observer_;
};

inline void Connection::start() {
  http::async_read(ws_.next_layer(), buffer_, request_,
                   [self = shared_from_this()](beast::error_code ec, std::size_t) {
                     self->on_request(ec);
                   });
}

inline void Connection::on_request(beast::error_code ec) {
  if (ec)
    return close();
  if (!websocket::is_upgrade(request_) || std::string_view(request_.target().data(), request_.target().size()) != kEndpoint) {
    http::response<http::string_body> res{http::status::not_found, request_.version()};
    res.body() = "websocket endpoint is " + std::string(kEndpoint) + "\n";
    res.prepare_payload();
    beast::error_code ignored;
    http::write(ws_.next_layer(), res, ignored);
    return close();
  }
  ws_.binary(true);
  ws_.async_accept(request_, [self = shared_from_this()](beast::error_code ec) {
    if (ec)
      return self->close();
    self->open_ = true;
    self->buffer_.clear();
    self->read();
  });
}

inline void Connection::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    self->on_read(ec);
  });
}

inline void Connection::on_read(beast::error_code ec) {
  if (ec)
    return close();
  if (!ws_.got_binary())
    return violation("text frame");
  std::string frame = beast::buffers_to_string(buffer_.data());
  buffer_.consume(buffer_.size());
  ClientEvent event;
  try {
    event = event_from_element(decode_frame(frame));
  } catch (const std::exception &ex) {
    return violation(ex.what());
  }
  handle(event);
  if (!closed_)
    read();
}

inline void Connection::handle(const ClientEvent &event) {
  Session &session = service_.session();
  if (auto *open = std::get_if<OpenNode>(&event)) {
    nodes_.insert(open->node);
    needs_text_.insert(open->node);
    state_changed();
  } else if (auto *edit = std::get_if<EditEvent>(&event)) {
    try {
      session.submit(edit->node, edit->edits);
    } catch (const std::exception &ex) {
      send(elem("error", {{"message", ex.what()}}));
    }
  } else if (auto *query = std::get_if<QueryEvent>(&event)) {
    send(markup_delta_event(session.snapshot(query->node), query->range, std::nullopt));
  } else {
    service_.shutdown_session();
  }
}

inline void Connection::state_changed() {
  if (!open_ || closed_ || closing_ || push_scheduled_ || nodes_.empty())
    return;
  push_scheduled_ = true;
  auto due = std::max(std::chrono::steady_clock::now(), last_push_ + kPushInterval);
  timer_.expires_at(due);
  timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
    self->push_scheduled_ = false;
    if (!ec)
      self->push();
  });
}

inline void Connection::push() {
  if (closed_)
    return;
  last_push_ = std::chrono::steady_clock::now();
  Session &session = service_.session();
  for (const auto &node : nodes_) {
    Snapshot snap = session.snapshot(node);
    std::uint64_t seq = ++seq_;
    bool with_text = needs_text_.erase(node) > 0;
    if (service_.push_observer())
      service_.push_observer()(node, seq, last_push_);
    std::size_t length = snap.version ? snap.current_text().size() : 0;
    send(node_state_event(snap, with_text, seq));
    send(markup_delta_event(snap, Range{0, length}, seq));
    send(message_feed_event(snap, seq, service_.margin()));
  }
}

inline void Connection::send(const Tree &event) {
  if (closed_ || closing_)
    return;
  outbox_.push_back(encode_frame(event));
  if (!writing_)
    write_next();
}

inline void Connection::write_next() {
  if (outbox_.empty() || closed_) {
    writing_ = false;
    return;
  }
  writing_ = true;
  ws_.async_write(net::buffer(outbox_.front()),
                  [self = shared_from_this()](beast::error_code ec, std::size_t) {
                    if (ec)
                      return self->close();
                    self->outbox_.pop_front();
                    self->write_next();
                  });
}

inline void Connection::violation(const std::string &why) {
  if (!open_ || writing_ || closing_)
    return close();
  closing_ = true;
  websocket::close_reason reason(websocket::close_code::protocol_error, why.substr(0, 120));
  ws_.next_layer().expires_after(std::chrono::seconds(1));
  ws_.async_close(reason, [self = shared_from_this()](beast::error_code) { self->close(); });
}

inline void Connection::close() {
  if (closed_)
    return;
  closed_ = true;
  beast::error_code ec;
  timer_.cancel();
  ws_.next_layer().socket().shutdown(tcp::socket::shutdown_both, ec);
  ws_.next_layer().socket().close(ec);
  service_.forget(this);
}

} // namespace pide::service

#endif // PIDE_SERVICE_HPP
