#include <gtest/gtest.h>

#include <csignal>

#include "pide/session.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using namespace pide;
using testing_support::checker_options;

namespace {

std::string last_writeln(const Snapshot &snap, std::size_t command_index) {
  auto st = snap.exec_state(snap.commands().at(command_index)->id);
  if (!st)
    return "";
  std::string out;
  for (const auto &m : st->messages)
    if (m.kind == MessageKind::writeln)
      out = text_content(m.body);
  return out;
}

} // namespace

TEST(SessionTest, SnapshotIsOutdatedUntilAssigned) {
  Session s(checker_options());
  auto snap = s.snapshot("main");
  EXPECT_FALSE(snap.is_outdated);
  s.submit("main", {Insert{0, "let x = fib(27)\n"}});
  auto pending = s.snapshot("main");
  EXPECT_EQ(pending.current_text(), "let x = fib(27)\n");
  ASSERT_TRUE(s.await_quiescent(std::chrono::seconds(60)));
  auto done = s.snapshot("main");
  EXPECT_FALSE(done.is_outdated);
  EXPECT_EQ(last_writeln(done, 0), "x = 196418");
}

TEST(SessionTest, InProcessCheckerSpeaksTheSameProtocol) {
  Session s(SessionOptions{});
  s.submit("main", {Insert{0, "let a = 2\nhave \"a + a = 4\"\n"}});
  ASSERT_TRUE(s.await_quiescent(std::chrono::seconds(60)));
  auto snap = s.snapshot("main");
  EXPECT_EQ(last_writeln(snap, 1), "ok: 4 = 4");
  EXPECT_FALSE(s.checker_pid().has_value());
}

TEST(SessionTest, ResultsFollowLatestEdits) {
  Session s(checker_options());
  s.submit("main", {Insert{0, "print 1\n"}});
  s.submit("main", {Remove{6, 1}, Insert{6, "2"}});
  s.submit("main", {Remove{6, 1}, Insert{6, "3"}});
  ASSERT_TRUE(s.await_quiescent(std::chrono::seconds(60)));
  auto snap = s.snapshot("main");
  EXPECT_EQ(snap.current_text(), "print 3\n");
  EXPECT_EQ(last_writeln(snap, 0), "3");
}

TEST(SessionTest, InvalidEditsCreateNoVersion) {
  Session s(checker_options());
  auto tip = s.model()->tip();
  EXPECT_THROW(s.submit("main", {Remove{0, 1}}), BoundsError);
  EXPECT_THROW(s.submit("main", {Insert{0, std::string("a\x05")}}), EncodeError);
  EXPECT_EQ(s.model()->tip(), tip);
}

TEST(SessionTest, StrayCheckerStdoutIsADiagnostic) {
  auto opts = checker_options();
  opts.checker_stray_stdout = true;
  Session s(opts);
  s.submit("main", {Insert{0, "print 5\n"}});
  ASSERT_TRUE(s.await_quiescent(std::chrono::seconds(60)));
  EXPECT_EQ(last_writeln(s.snapshot("main"), 0), "5");
  s.shutdown();
  auto diags = s.diagnostics();
  bool stray = std::any_of(diags.begin(), diags.end(),
                           [](const std::string &d) { return d.rfind("checker stdout: ", 0) == 0; });
  EXPECT_TRUE(stray);
  EXPECT_FALSE(s.failed());
}

TEST(SessionTest, ShutdownStopsCheckerQuickly) {
  Session s(checker_options(1));
  s.submit("main", {Insert{0, "print fib(60)\n"}});
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  auto pid = s.checker_pid();
  ASSERT_TRUE(pid.has_value());
  auto start = std::chrono::steady_clock::now();
  s.shutdown();
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(2500));
  EXPECT_FALSE(testing_support::process_alive(*pid));
}

TEST(SessionTest, KilledCheckerFailsTheSession) {
  Session s(checker_options());
  s.submit("main", {Insert{0, "print fib(60)\n"}});
  auto pid = s.checker_pid();
  ASSERT_TRUE(pid.has_value());
  ::kill(*pid, SIGKILL);
  EXPECT_FALSE(s.await_quiescent(std::chrono::seconds(10)));
  EXPECT_TRUE(s.failed());
  EXPECT_THROW(s.submit("main", {Insert{0, "print 1\n"}}), ProtocolError);
  // the last published state stays readable
  EXPECT_EQ(s.snapshot("main").current_text(), "print fib(60)\n");
}

TEST(SessionTest, ListenersSeePublicationsAndCanUnsubscribe) {
  Session s(checker_options());
  std::atomic<int> calls{0};
  auto id = s.subscribe([&] { ++calls; });
  s.submit("main", {Insert{0, "print 1\n"}});
  ASSERT_TRUE(s.await_quiescent(std::chrono::seconds(60)));
  EXPECT_GT(calls.load(), 0);
  s.unsubscribe(id);
  int seen = calls.load();
  s.submit("main", {Insert{0, "print 2\n"}});
  ASSERT_TRUE(s.await_quiescent(std::chrono::seconds(60)));
  EXPECT_EQ(calls.load(), seen);
}

TEST(SessionTest, TwoNodesInOneBatch) {
  Session s(checker_options());
  s.submit({NodeEdits{"a", {Insert{0, "print 1\n"}}}, NodeEdits{"b", {Insert{0, "print 2\n"}}}});
  ASSERT_TRUE(s.await_quiescent(std::chrono::seconds(60)));
  EXPECT_EQ(last_writeln(s.snapshot("a"), 0), "1");
  EXPECT_EQ(last_writeln(s.snapshot("b"), 0), "2");
}

TEST(SessionTest, RemoveVersionsKeepsResults) {
  Session s(checker_options());
  for (int i = 0; i < 5; ++i)
    s.submit("main", {Insert{0, "print " + std::to_string(i) + "\n"}});
  ASSERT_TRUE(s.await_quiescent(std::chrono::seconds(60)));
  auto tip = s.model()->tip();
  auto removed = s.remove_versions({tip});
  EXPECT_EQ(removed.size(), 5u);
  EXPECT_EQ(s.model()->versions().size(), 1u);
  // a follow-up edit reuses the surviving execs
  s.submit("main", {Insert{s.snapshot("main").current_text().size(), "print 9\n"}});
  ASSERT_TRUE(s.await_quiescent(std::chrono::seconds(60)));
  auto counts = s.model()->reuse_by_version().at(s.model()->tip());
  EXPECT_EQ(counts.reused, 5u);
  EXPECT_EQ(counts.fresh, 1u);
}

TEST(SessionTest, ConvergesToBatchResults) {
  oracle::Rng rng(99);
  const char *pieces[] = {"let a = 3\n", "have \"a * 2 = 6\"\n", "also\n", "have \"6 = 7\"\n",
                          "finally\n",   "print a + b\n",       "let b = fib(12)\n"};
  for (int round = 0; round < 10; ++round) {
    Session s(checker_options());
    std::string text;
    for (int step = 0; step < 8; ++step) {
      if (text.empty() || oracle::chance(rng, 0.6)) {
        std::string p = pieces[oracle::uniform(rng, 0, 6)];
        std::size_t at = oracle::uniform(rng, 0, text.size());
        s.submit("main", {Insert{at, p}});
        text.insert(at, p);
      } else {
        std::size_t at = oracle::uniform(rng, 0, text.size() - 1);
        std::size_t n = oracle::uniform(rng, 1, std::min<std::size_t>(4, text.size() - at));
        s.submit("main", {Remove{at, n}});
        text.erase(at, n);
      }
    }
    ASSERT_TRUE(s.await_quiescent(std::chrono::seconds(60)));
    auto snap = s.snapshot("main");
    ASSERT_EQ(snap.current_text(), text);
    auto got = oracle::snapshot_results(snap);
    auto want = oracle::batch_check(text);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_EQ(got[i].source, want[i].source);
      EXPECT_EQ(got[i].status, want[i].status) << want[i].source;
      EXPECT_EQ(got[i].messages, want[i].messages) << want[i].source;
    }
  }
}
