#include <gtest/gtest.h>

#include "pide/edit.hpp"
#include "support/oracles.hpp"

using namespace pide;

TEST(Edits, ApplyExamples) {
  EXPECT_EQ(apply_edits("abc", {Insert{1, "XY"}}), "aXYbc");
  EXPECT_EQ(apply_edits("abc", {Remove{0, 3}}), "");
  EXPECT_EQ(apply_edits("abc", {Insert{3, "d"}, Remove{0, 1}}), "bcd");
}

TEST(Edits, OutOfBoundsRejected) {
  EXPECT_THROW(apply_edits("abc", {Insert{4, "x"}}), BoundsError);
  EXPECT_THROW(apply_edits("abc", {Remove{2, 2}}), BoundsError);
  EXPECT_THROW(apply_edits("abc", {Remove{1, 0}}), BoundsError);
  EXPECT_THROW(apply_edits("abc", {Insert{0, "x"}, Remove{0, 5}}), BoundsError);
}

TEST(Edits, ConvertExamples) {
  EXPECT_EQ(convert(5, {Insert{2, "ab"}}), 7u);
  EXPECT_EQ(convert(1, {Insert{2, "ab"}}), 1u);
  EXPECT_EQ(convert(2, {Insert{2, "ab"}}), 4u);
  EXPECT_EQ(convert(2, {Insert{2, "ab"}}, Gravity::left), 2u);
  EXPECT_EQ(convert(3, {Remove{1, 4}}), 1u);
  EXPECT_EQ(convert(7, {Remove{1, 4}}), 3u);
  EXPECT_EQ(revert(7, {Insert{2, "ab"}}), 5u);
}

TEST(Edits, ConvertRevertAgainstCharacterIdentities) {
  oracle::Rng rng(31);
  for (int i = 0; i < 1000; ++i) {
    std::string s = oracle::random_string(rng, 0, 50, "abcdefghij");
    TextEdits edits = oracle::random_edits(rng, s.size(), 20);
    oracle::IdentityText ids(s.size());
    for (const auto &e : edits)
      ids.apply(e);
    std::string t = apply_edits(s, edits);
    ASSERT_EQ(ids.ids.size(), t.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      auto pos = ids.position(static_cast<long>(k));
      if (!pos)
        continue;
      EXPECT_EQ(convert(k, edits), *pos);
      EXPECT_EQ(t[*pos], s[k]);
      EXPECT_EQ(revert(convert(k, edits), edits), k);
    }
    EXPECT_EQ(convert(s.size(), edits), t.size());
    EXPECT_EQ(revert(t.size(), edits), s.size());
  }
}
