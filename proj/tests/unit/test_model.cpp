#include <gtest/gtest.h>

#include "pide/model.hpp"
#include "support/oracles.hpp"

using namespace pide;

namespace {

struct Fixture {
  Model model;
  IdCounter<CommandId> ids;
  std::uint64_t next_version = 1;
  std::uint64_t next_exec = 1;
  std::uint64_t serial = 0;
  std::vector<std::pair<CommandId, ExecId>> last;

  VersionPtr submit(TextEdits edits) {
    auto r = update(*model.tip_version(), {{"main", edits}}, VersionId{next_version++}, ids);
    model.add_version(r.version, {{"main", edits}});
    return r.version;
  }

  /// Assigns like the checker: prefix of unchanged commands keeps its execs.
  protocol::AssignUpdate assignment(const VersionPtr &v) {
    protocol::AssignUpdate au{v->id, {}};
    const auto &cmds = v->commands("main");
    bool prefix = true;
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      if (prefix && i < last.size() && last[i].first == cmds[i]->id) {
        au.assignment.push_back(last[i]);
        continue;
      }
      prefix = false;
      au.assignment.emplace_back(cmds[i]->id, ExecId{next_exec++});
    }
    last = au.assignment;
    return au;
  }

  OutputEffects message(ExecId exec, MessageKind kind, Body body) {
    return model.handle_output(protocol::MessageOutput{Message{++serial, kind, exec, std::nullopt, body}});
  }

  void finish_all(const protocol::AssignUpdate &au) {
    for (const auto &[c, e] : au.assignment) {
      if (model.exec(e)->status != ExecStatus::pending)
        continue;
      message(e, MessageKind::status, {elem("running")});
      message(e, MessageKind::status, {elem("finished")});
    }
  }
};

} // namespace

TEST(Model, StartsWithEmptyAssignedVersionZero) {
  Model m;
  EXPECT_EQ(m.tip(), VersionId{0});
  EXPECT_EQ(m.latest_assigned(), VersionId{0});
  EXPECT_TRUE(m.quiescent());
  EXPECT_TRUE(m.snapshot("main").commands().empty());
}

TEST(Model, MessagesAccumulate) {
  Fixture f;
  auto v = f.submit({Insert{0, "print 1\n"}});
  auto au = f.assignment(v);
  f.model.handle_output(au);
  ExecId e = au.assignment[0].second;
  auto before = f.model.exec(e);
  f.message(e, MessageKind::writeln, {text("1")});
  EXPECT_EQ(f.model.exec(e)->messages.size(), 1u);
  EXPECT_TRUE(before->messages.empty()) << "published states are immutable";
}

TEST(Model, ReportsFeedMarkupStore) {
  Fixture f;
  auto v = f.submit({Insert{0, "print x\n"}});
  auto au = f.assignment(v);
  f.model.handle_output(au);
  ExecId e = au.assignment[0].second;
  f.message(e, MessageKind::report,
            {positioned_to_element({{0, 5}, "keyword", {}}), positioned_to_element({{6, 7}, "free", {}})});
  auto hits = f.model.exec(e)->markup.query({6, 7});
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].name, "free");
  // out of span: diagnostic, store unchanged
  auto fx = f.message(e, MessageKind::report, {positioned_to_element({{6, 99}, "free", {}})});
  EXPECT_EQ(fx.notes.size(), 1u);
  EXPECT_EQ(f.model.exec(e)->markup.size(), 2u);
}

TEST(Model, StatusTransitions) {
  Fixture f;
  auto v = f.submit({Insert{0, "print 1\n"}});
  auto au = f.assignment(v);
  f.model.handle_output(au);
  ExecId e = au.assignment[0].second;
  EXPECT_EQ(f.model.exec(e)->status, ExecStatus::pending);
  f.message(e, MessageKind::status, {elem("running")});
  EXPECT_EQ(f.model.exec(e)->status, ExecStatus::running);
  f.message(e, MessageKind::status, {elem("finished")});
  EXPECT_EQ(f.model.exec(e)->status, ExecStatus::finished);
  auto fx = f.message(e, MessageKind::status, {elem("running")});
  EXPECT_EQ(f.model.exec(e)->status, ExecStatus::finished);
  EXPECT_FALSE(fx.notes.empty());
  EXPECT_TRUE(f.model.quiescent());
}

TEST(Model, BuffersOutputForUnknownExecs) {
  Fixture f;
  auto v = f.submit({Insert{0, "print 1\n"}});
  auto au = f.assignment(v);
  ExecId e = au.assignment[0].second;
  f.message(e, MessageKind::status, {elem("running")});
  f.message(e, MessageKind::writeln, {text("1")});
  EXPECT_EQ(f.model.buffered_messages(), 2u);
  f.model.handle_output(au);
  EXPECT_EQ(f.model.buffered_messages(), 0u);
  EXPECT_EQ(f.model.exec(e)->messages.size(), 2u);
  EXPECT_EQ(f.model.exec(e)->status, ExecStatus::running);
}

TEST(Model, CancelsExecsDroppedFromNewestAssignment) {
  Fixture f;
  auto v1 = f.submit({Insert{0, "let a = 1\nprint a\n"}});
  auto a1 = f.assignment(v1);
  f.model.handle_output(a1);
  f.message(a1.assignment[1].second, MessageKind::status, {elem("running")});
  auto v2 = f.submit({Insert{0, "print 2\n"}});
  auto a2 = f.assignment(v2);
  auto fx = f.model.handle_output(a2);
  ASSERT_EQ(fx.cancel.size(), 2u);
}

TEST(Model, IdentityAssignmentCountsReuse) {
  Fixture f;
  auto v1 = f.submit({Insert{0, "let a = 1\nprint a\nprint 3\n"}});
  f.model.handle_output(f.assignment(v1));
  auto v2 = f.submit({});
  f.model.handle_output(f.assignment(v2));
  auto counts = f.model.reuse_by_version().at(v2->id);
  EXPECT_EQ(counts.reused, 3u);
  EXPECT_EQ(counts.fresh, 0u);
}

TEST(Model, RemoveVersionsMustKeepTipAndLatestAssigned) {
  Fixture f;
  auto v1 = f.submit({Insert{0, "print 1\n"}});
  f.model.handle_output(f.assignment(v1));
  EXPECT_THROW(f.model.remove_versions({VersionId{0}}), Error);
  EXPECT_NO_THROW(f.model.remove_versions({v1->id}));
}

TEST(Model, GcKeepAllIsNoop) {
  Fixture f;
  std::set<VersionId> all{VersionId{0}};
  for (int i = 0; i < 5; ++i) {
    auto v = f.submit({Insert{0, "print 1\n"}});
    auto au = f.assignment(v);
    f.model.handle_output(au);
    f.finish_all(au);
    all.insert(v->id);
  }
  auto execs = f.model.execs().size();
  EXPECT_TRUE(f.model.remove_versions(all).empty());
  EXPECT_EQ(f.model.versions().size(), all.size());
  EXPECT_EQ(f.model.execs().size(), execs);
}

TEST(Model, GcKeepsReachableExecsOnly) {
  Fixture f;
  std::vector<VersionPtr> versions;
  for (int i = 0; i < 10; ++i) {
    // append one command each time: earlier execs stay shared via the prefix
    std::string cmd = "print " + std::to_string(i) + "\n";
    auto v = f.submit({Insert{f.model.tip_version()->text("main").size(), cmd}});
    auto au = f.assignment(v);
    f.model.handle_output(au);
    f.finish_all(au);
    versions.push_back(v);
  }
  // change the first command: version 10 shares nothing with version 9
  auto v = f.submit({Insert{6, "1"}});
  auto au = f.assignment(v);
  f.model.handle_output(au);
  f.finish_all(au);
  std::set<VersionId> keep{versions[4]->id, v->id};

  // independent reachability walk over the kept assignments
  std::set<ExecId> reachable;
  for (auto id : keep)
    for (const auto &[c, e] : f.model.assignments().at(id)->command_to_exec)
      reachable.insert(e);

  auto removed = f.model.remove_versions(keep);
  EXPECT_EQ(removed.size(), 10u);
  EXPECT_EQ(f.model.versions().size(), 2u);
  EXPECT_EQ(f.model.assignments().size(), 2u);
  EXPECT_EQ(f.model.execs().size(), reachable.size());
  for (auto e : reachable)
    EXPECT_NE(f.model.exec(e), nullptr);
  // the exec of "print 0" is shared by versions 1..10 and survives via version 5
  EXPECT_NE(f.model.exec(ExecId{1}), nullptr);
}

TEST(Model, GcMergesEditsIntoSuccessor) {
  Fixture f;
  auto v1 = f.submit({Insert{0, "print 1\n"}});
  f.model.handle_output(f.assignment(v1));
  f.submit({Insert{0, "also\n"}});
  f.submit({Insert{0, "also\n"}});
  auto v4 = f.submit({Remove{0, 5}});
  auto before = f.model.snapshot("main");
  f.model.remove_versions({v1->id, v4->id});
  auto after = f.model.snapshot("main");
  EXPECT_EQ(after.current_text(), before.current_text());
  EXPECT_EQ(after.pending_edits.size(), 3u);
}

TEST(Model, LateOutputOfCollectedExecIsDropped) {
  Fixture f;
  auto v1 = f.submit({Insert{0, "print 1\n"}});
  auto a1 = f.assignment(v1);
  f.model.handle_output(a1);
  auto v2 = f.submit({Insert{0, "print 2\n"}});
  auto a2 = f.assignment(v2);
  f.model.handle_output(a2);
  f.finish_all(a2);
  f.model.remove_versions({v2->id});
  ExecId old = a1.assignment[0].second;
  EXPECT_EQ(f.model.exec(old), nullptr);
  f.message(old, MessageKind::writeln, {text("late")});
  EXPECT_EQ(f.model.buffered_messages(), 0u);
}
