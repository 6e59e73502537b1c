#include <gtest/gtest.h>

#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <mutex>

#include "pide/protocol.hpp"
#include "support/oracles.hpp"

using namespace pide;
using namespace pide::protocol;

TEST(Chunk, Examples) {
  EXPECT_EQ(encode_chunk("ab"), "2\nab");
  EXPECT_EQ(encode_chunk(""), "0\n");
  std::size_t consumed = 0;
  EXPECT_EQ(decode_chunk("2\nab", consumed), "ab");
  EXPECT_EQ(consumed, 4u);
  EXPECT_EQ(decode_chunk("0\n", consumed), "");
  EXPECT_EQ(consumed, 2u);
}

TEST(Chunk, IncompleteInputWaits) {
  std::size_t consumed = 0;
  EXPECT_EQ(decode_chunk("", consumed), std::nullopt);
  EXPECT_EQ(decode_chunk("12", consumed), std::nullopt);
  EXPECT_EQ(decode_chunk("3\nab", consumed), std::nullopt);
}

TEST(Chunk, MalformedHeaderIsFatal) {
  std::size_t consumed = 0;
  EXPECT_THROW(decode_chunk("x\nab", consumed), ProtocolError);
  EXPECT_THROW(decode_chunk("1a\nab", consumed), ProtocolError);
  EXPECT_THROW(decode_chunk("\nab", consumed), ProtocolError);
  EXPECT_THROW(decode_chunk(std::string(30, '9') + "\n", consumed), ProtocolError);
}

TEST(Chunk, TruncatedStreamIsFatalAtEnd) {
  ChunkDecoder d;
  d.feed("5\nab");
  EXPECT_EQ(d.next(), std::nullopt);
  EXPECT_THROW(d.finish(), ProtocolError);
}

TEST(Chunk, RandomPayloadsRoundTripThroughArbitrarySplits) {
  oracle::Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> payloads;
    std::string stream;
    for (std::size_t k = oracle::uniform(rng, 1, 4); k > 0; --k) {
      std::string p(oracle::uniform(rng, 0, 64 * 1024), '\0');
      for (auto &c : p)
        c = static_cast<char>(oracle::uniform(rng, 0, 255));
      stream += encode_chunk(p);
      payloads.push_back(std::move(p));
    }
    ChunkDecoder d;
    std::vector<std::string> got;
    std::size_t pos = 0;
    while (pos < stream.size()) {
      std::size_t n = std::min(stream.size() - pos, oracle::uniform(rng, 1, 20000));
      d.feed(std::string_view(stream).substr(pos, n));
      pos += n;
      while (auto c = d.next())
        got.push_back(std::move(*c));
    }
    EXPECT_NO_THROW(d.finish());
    EXPECT_EQ(got, payloads);
  }
}

TEST(Messages, InputsRoundTrip) {
  std::vector<Input> inputs{
      DefineCommands{{{CommandId{1}, "let", "let x = 1\n"}, {CommandId{2}, "", "junk "}}},
      Update{VersionId{1}, VersionId{2}, {{"main", {CommandId{1}, CommandId{2}}}, {"other", {}}}},
      RemoveVersions{{VersionId{1}, VersionId{3}}},
      CancelExec{ExecId{9}},
  };
  for (const auto &in : inputs)
    EXPECT_EQ(decode_input(encode_input(in)), in);
}

TEST(Messages, OutputsRoundTrip) {
  std::vector<Output> outputs{
      Ready{4},
      AssignUpdate{VersionId{2}, {{CommandId{1}, ExecId{1}}, {CommandId{2}, ExecId{3}}}},
      MessageOutput{Message{1, MessageKind::warning, ExecId{3}, Range{2, 5},
                            {text("a = "), elem("free", {}, {text("x")})}}},
      MessageOutput{Message{2, MessageKind::status, ExecId{3}, std::nullopt, {elem("finished")}}},
  };
  for (const auto &out : outputs)
    EXPECT_EQ(decode_output(encode_output(out)), out);
}

TEST(Messages, SchemaViolationsAreRejected) {
  EXPECT_THROW(decode_input(yxml::encode(elem("nonsense"))), ProtocolError);
  EXPECT_THROW(decode_input(yxml::encode(elem("cancel_exec"))), ProtocolError);
  EXPECT_THROW(decode_input(yxml::encode(elem("cancel_exec", {{"exec", "-1"}}))), ProtocolError);
  EXPECT_THROW(decode_output(yxml::encode(elem("message", {{"kind", "shout"}, {"serial", "1"}, {"exec", "1"}}))),
               ProtocolError);
  EXPECT_THROW(decode_input("\x05"), Error);
}

namespace {

struct Received {
  std::mutex m;
  std::condition_variable cv;
  std::vector<std::string> chunks;
  std::optional<std::string> closed;

  Channel::ChunkHandler on_chunk() {
    return [this](std::string c) {
      std::lock_guard l(m);
      chunks.push_back(std::move(c));
      cv.notify_all();
    };
  }
  Channel::CloseHandler on_close() {
    return [this](const std::string &e) {
      std::lock_guard l(m);
      closed = e;
      cv.notify_all();
    };
  }
  template <class P> bool wait(P pred) {
    std::unique_lock l(m);
    return cv.wait_for(l, std::chrono::seconds(10), pred);
  }
};

} // namespace

TEST(ChannelTest, DeliversFramesInOrderBothWays) {
  int fds[2];
  ASSERT_EQ(socketpair(AF_UNIX, SOCK_STREAM, 0, fds), 0);
  Received a, b;
  Channel ca(fds[0], a.on_chunk(), a.on_close());
  Channel cb(fds[1], b.on_chunk(), b.on_close());
  ca.start();
  cb.start();
  std::vector<std::string> sent;
  for (int i = 0; i < 500; ++i) {
    sent.push_back(std::string(static_cast<std::size_t>(i * 37 % 3000), static_cast<char>('a' + i % 26)));
    ca.send(sent.back());
  }
  cb.send("pong");
  ASSERT_TRUE(b.wait([&] { return b.chunks.size() == sent.size(); }));
  EXPECT_EQ(b.chunks, sent);
  ASSERT_TRUE(a.wait([&] { return a.chunks.size() == 1; }));
  EXPECT_EQ(a.chunks[0], "pong");
  ca.close();
  ASSERT_TRUE(b.wait([&] { return b.closed.has_value(); }));
  EXPECT_EQ(*b.closed, "");
}

TEST(ChannelTest, GarbageClosesWithError) {
  int fds[2];
  ASSERT_EQ(socketpair(AF_UNIX, SOCK_STREAM, 0, fds), 0);
  Received r;
  Channel c(fds[0], r.on_chunk(), r.on_close());
  c.start();
  ASSERT_EQ(::write(fds[1], "zz\n", 3), 3);
  ASSERT_TRUE(r.wait([&] { return r.closed.has_value(); }));
  EXPECT_NE(r.closed->find("non-digit"), std::string::npos);
  EXPECT_FALSE(c.alive());
  EXPECT_THROW(c.send("x"), ProtocolError);
  ::close(fds[1]);
}
