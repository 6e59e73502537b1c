#include <gtest/gtest.h>

#include "pide/pretty.hpp"
#include "pide/xml.hpp"
#include "support/oracles.hpp"

using namespace pide;
using namespace pide::pretty;

TEST(Pretty, ToMarkupExamples) {
  EXPECT_EQ(pretty_to_markup(brk(1)), elem("break", {{"width", "1"}}, {text(" ")}));
  EXPECT_EQ(pretty_to_markup(Doc("x")), text("x"));
  EXPECT_EQ(pretty_to_markup(block(0, {"x"})), elem("block", {{"indent", "0"}}, {text("x")}));
}

TEST(Pretty, BoundsAreEnforced) {
  EXPECT_THROW(pretty_to_markup(block(1001, {"x"})), BoundsError);
  EXPECT_THROW(pretty_to_markup(brk(-1)), BoundsError);
  EXPECT_NO_THROW(pretty_to_markup(block(1000, {brk(1000)})));
}

TEST(Pretty, FormatExamples) {
  EXPECT_EQ(format(block(0, {"x", brk(1), "+", brk(1), "y"}), 80), "x + y");
  EXPECT_EQ(format(Doc("abcdef"), 3), "abcdef");
  EXPECT_EQ(format(block(2, {"aaaa", brk(1), "bbbb"}), 5), "aaaa\n  bbbb");
}

TEST(Pretty, IndentationAddsToEnclosingBlocks) {
  Doc d = block(2, {"f", brk(1), block(3, {"a", brk(0), "b"})});
  EXPECT_EQ(format(d, 2), "f\n  a\n     b");
}

TEST(Pretty, ConsistentBreaking) {
  Doc d = block(0, {"aaa", brk(1), "b", brk(1), "ccc"});
  EXPECT_EQ(format(d, 6), "aaa\nb\nccc");
}

TEST(Pretty, FormatMarkupWithoutLayoutIsIdentity) {
  Tree t = elem("entity", {{"ref", "1"}}, {text("+"), elem("free", {}, {text("x")})});
  EXPECT_EQ(format_markup(t, 10), t);
}

TEST(Pretty, FormatMarkupKeepsSemanticMarkup) {
  Tree free_x = elem("hilite", {}, {elem("free", {}, {text("x")})});
  Tree t = elem("term", {},
                {elem("block", {{"indent", "0"}},
                      {free_x, text(" "), elem("entity", {{"ref", "1"}}, {text("+")}),
                       pretty_to_markup(brk(1)), elem("hilite", {}, {elem("free", {}, {text("y")})})})});
  Tree flat = format_markup(t, 80);
  EXPECT_EQ(text_content(flat), "x + y");
  std::vector<const Element *> found;
  oracle::find_all(Body{flat}, "block", found);
  EXPECT_TRUE(found.empty());
  found.clear();
  oracle::find_all(Body{flat}, "break", found);
  EXPECT_TRUE(found.empty());
  EXPECT_NE(oracle::find_element(Body{flat}, "entity"), nullptr);
  found.clear();
  oracle::find_all(Body{flat}, "free", found);
  EXPECT_EQ(found.size(), 2u);

  Tree narrow = format_markup(t, 3);
  EXPECT_NE(text_content(narrow).find('\n'), std::string::npos);
}

TEST(Pretty, TextContentAgreesWithFormat) {
  oracle::Rng rng(21);
  for (int i = 0; i < 300; ++i) {
    std::size_t budget = 6;
    Doc d = oracle::random_doc(rng, budget);
    for (int margin : {5, 12, 30}) {
      EXPECT_EQ(text_content(format_markup(pretty_to_markup(d), margin)), format(d, margin));
      EXPECT_EQ(format(markup_to_pretty(pretty_to_markup(d)), margin), format(d, margin));
    }
  }
}

TEST(Pretty, MarkupRoundTrip) {
  oracle::Rng rng(22);
  for (int i = 0; i < 300; ++i) {
    std::size_t budget = 8;
    Doc d = oracle::random_doc(rng, budget);
    EXPECT_EQ(markup_to_pretty(pretty_to_markup(d)), d);
  }
}

TEST(Pretty, FitsWheneverSomeLayoutFits) {
  oracle::Rng rng(23);
  for (int i = 0; i < 400; ++i) {
    std::size_t budget = 8;
    Doc d = oracle::random_doc(rng, budget);
    oracle::PrettyOracle o(d);
    auto layouts = o.layouts(d);
    for (std::size_t margin : {4u, 10u, 20u, 40u}) {
      std::string out = format(d, static_cast<int>(margin));
      EXPECT_TRUE(layouts.count(out)) << "not a consistent layout: " << out;
      if (o.fits(d, margin)) {
        EXPECT_LE(oracle::PrettyOracle::widest_line(out), margin) << out;
      }
    }
  }
}

TEST(Pretty, Monotonicity) {
  oracle::Rng rng(24);
  for (int i = 0; i < 200; ++i) {
    std::size_t budget = 6;
    Doc d = oracle::random_doc(rng, budget);
    for (std::size_t m = 4; m < 40; m += 3) {
      if (oracle::PrettyOracle::widest_line(format(d, static_cast<int>(m))) > m)
        continue;
      for (std::size_t m2 = m + 1; m2 < m + 8; ++m2)
        EXPECT_LE(oracle::PrettyOracle::widest_line(format(d, static_cast<int>(m2))), m2);
    }
  }
}

TEST(Pretty, SeveralRootsDissolveIntoFormattedElement) {
  Body two{text("a"), elem("hilite", {}, {text("b"), pretty_to_markup(brk(1)), text("c")})};
  Tree root = elem("block", {{"indent", "0"}}, two);
  Tree out = format_markup(root, 80);
  EXPECT_EQ(out.element().name, "formatted");
  EXPECT_EQ(text_content(out), "ab c");
}
