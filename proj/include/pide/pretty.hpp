#ifndef PIDE_PRETTY_HPP
#define PIDE_PRETTY_HPP

// Oppen-style pretty printing over blocks and breaks.
//
// Documents are kept symbolic: pretty_to_markup turns them into <block> and
// <break> elements that travel with the semantic markup, and format_markup
// resolves layout against a margin only when something needs physical text.
//
// Blocks break consistently: either every direct break of a block is taken
// or none is. A block stays on one line when its flat width fits into the
// space left on the current line. Indentation of a taken break is the sum of
// the indents of all enclosing blocks, measured from line start.
//
// When the greedy pass leaves a line over the margin, a memoized search over
// the per-block choices looks for a layout that fits, so any document with a
// fitting consistent layout gets one.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "pide/error.hpp"
#include "pide/markup.hpp"

namespace pide::pretty {

inline constexpr int kMaxIndent = 1000;
inline constexpr int kDefaultMargin = 76;

struct Doc;

struct Block {
  int indent = 0;
  std::vector<Doc> body;
  friend bool operator==(const Block &, const Block &);
};

struct Break {
  int width = 1;
  friend bool operator==(const Break &, const Break &) = default;
};

struct Doc {
  std::variant<std::string, Block, Break> node;

  Doc(std::string s) : node(std::move(s)) {}
  Doc(const char *s) : node(std::string(s)) {}
  Doc(Block b) : node(std::move(b)) {}
  Doc(Break b) : node(b) {}

  friend bool operator==(const Doc &a, const Doc &b) { return a.node == b.node; }
};

inline bool operator==(const Block &a, const Block &b) {
  return a.indent == b.indent && a.body == b.body;
}

inline Doc block(int indent, std::vector<Doc> body) { return Doc{Block{indent, std::move(body)}}; }
inline Doc brk(int width = 1) { return Doc{Break{width}}; }

// ---------------------------------------------------------------------------
// Symbolic markup

inline Tree pretty_to_markup(const Doc &doc) {
  if (auto *s = std::get_if<std::string>(&doc.node))
    return text(*s);
  if (auto *b = std::get_if<Break>(&doc.node)) {
    if (b->width < 0 || b->width > kMaxIndent)
      throw BoundsError("break width out of range: " + std::to_string(b->width));
    return elem("break", {{"width", std::to_string(b->width)}},
                {text(std::string(static_cast<std::size_t>(b->width), ' '))});
  }
  const auto &blk = std::get<Block>(doc.node);
  if (blk.indent < 0 || blk.indent > kMaxIndent)
    throw BoundsError("block indent out of range: " + std::to_string(blk.indent));
  Body body;
  body.reserve(blk.body.size());
  for (const auto &d : blk.body)
    body.push_back(pretty_to_markup(d));
  return elem("block", {{"indent", std::to_string(blk.indent)}}, std::move(body));
}

namespace detail {

inline int int_attribute(const Element &e, std::string_view key, int fallback) {
  auto v = e.attribute(key);
  if (!v || v->empty() || v->size() > 4)
    return fallback;
  int n = 0;
  for (char c : *v) {
    if (c < '0' || c > '9')
      return fallback;
    n = n * 10 + (c - '0');
  }
  return std::min(n, kMaxIndent);
}

inline int break_width(const Element &e) {
  return int_attribute(e, "width", static_cast<int>(text_content(Tree{e}).size()));
}

inline void to_docs(const Tree &tree, std::vector<Doc> &out) {
  if (tree.is_text()) {
    out.emplace_back(tree.text());
    return;
  }
  const Element &e = tree.element();
  if (e.name == "block") {
    Block b{int_attribute(e, "indent", 0), {}};
    for (const auto &child : e.body)
      to_docs(child, b.body);
    out.emplace_back(std::move(b));
  } else if (e.name == "break") {
    out.emplace_back(Break{break_width(e)});
  } else {
    // Semantic markup is transparent for layout: splice its children.
    for (const auto &child : e.body)
      to_docs(child, out);
  }
}

} // namespace detail

/// Recovers the layout document of a tree; semantic elements are spliced away.
inline Doc markup_to_pretty(const Tree &tree) {
  std::vector<Doc> docs;
  detail::to_docs(tree, docs);
  if (docs.size() == 1)
    return std::move(docs.front());
  return block(0, std::move(docs));
}

// ---------------------------------------------------------------------------
// Layout

namespace detail {

class Layout {
public:
  Layout(const Body &body, int margin) : margin_(std::max(margin, 1)) {
    blocks_.push_back(BlockInfo{0, 0, false, -1}); // virtual root
    for (const auto &t : body)
      scan(t, 0);
    compute_widths();
    decide();
  }

  Body render(const Body &body) {
    next_block_ = 1;
    Body out;
    for (const auto &t : body)
      render_tree(t, 0, out);
    return normalize(out);
  }

private:
  enum class Kind { text, brk, open, close };
  struct Token {
    Kind kind;
    int width;  // text length or break width
    int block;  // owning block (brk) or the block itself (open/close)
  };
  struct BlockInfo {
    int indent_total;
    long long flat_width;
    bool has_breaks;
    int parent;
  };

  void scan(const Tree &tree, int enclosing) {
    if (tree.is_text()) {
      tokens_.push_back({Kind::text, static_cast<int>(tree.text().size()), enclosing});
      return;
    }
    const Element &e = tree.element();
    if (e.name == "block") {
      int id = static_cast<int>(blocks_.size());
      blocks_.push_back(BlockInfo{blocks_[enclosing].indent_total + int_attribute(e, "indent", 0),
                                  0, false, enclosing});
      tokens_.push_back({Kind::open, 0, id});
      for (const auto &child : e.body)
        scan(child, id);
      tokens_.push_back({Kind::close, 0, id});
    } else if (e.name == "break") {
      tokens_.push_back({Kind::brk, break_width(e), enclosing});
      blocks_[enclosing].has_breaks = true;
    } else {
      for (const auto &child : e.body)
        scan(child, enclosing);
    }
  }

  void compute_widths() {
    std::vector<int> open{0};
    long long total = 0;
    std::vector<long long> start{0};
    for (const auto &tok : tokens_) {
      switch (tok.kind) {
      case Kind::text:
      case Kind::brk: total += tok.width; break;
      case Kind::open:
        open.push_back(tok.block);
        start.push_back(total);
        break;
      case Kind::close:
        blocks_[tok.block].flat_width = total - start.back();
        open.pop_back();
        start.pop_back();
        break;
      }
    }
    blocks_[0].flat_width = total;
  }

  void decide() {
    broken_.assign(blocks_.size(), false);
    long long col = 0;
    long long widest = 0;
    broken_[0] = blocks_[0].has_breaks && blocks_[0].flat_width > margin_;
    for (const auto &tok : tokens_) {
      switch (tok.kind) {
      case Kind::text: col += tok.width; break;
      case Kind::brk:
        if (broken_[tok.block]) {
          widest = std::max(widest, col);
          col = blocks_[tok.block].indent_total;
        } else {
          col += tok.width;
        }
        break;
      case Kind::open:
        broken_[tok.block] =
            blocks_[tok.block].has_breaks && blocks_[tok.block].flat_width > margin_ - col;
        break;
      case Kind::close: break;
      }
      widest = std::max(widest, col);
    }
    if (widest <= margin_)
      return;
    std::vector<bool> choice(blocks_.size(), false);
    if (search(choice))
      broken_ = std::move(choice);
  }

  // Depth-first search for a fitting assignment of per-block choices.
  bool search(std::vector<bool> &choice) {
    failed_.clear();
    budget_ = 2'000'000;
    choice[0] = false;
    if (blocks_[0].has_breaks) {
      if (dfs(0, 0, choice))
        return true;
      choice[0] = true;
    }
    return dfs(0, 0, choice);
  }

  std::uint64_t memo_key(std::size_t idx, long long col, const std::vector<bool> &choice,
                         int enclosing) const {
    std::uint64_t mask = 0;
    int depth = 0;
    for (int b = enclosing; b >= 0; b = blocks_[b].parent) {
      if (!blocks_[b].has_breaks)
        continue;
      if (depth >= 20)
        return ~0ULL;
      mask = (mask << 1) | (choice[b] ? 1 : 0);
      ++depth;
    }
    if (col >= (1LL << 12) || idx >= (1ULL << 32))
      return ~0ULL;
    return (static_cast<std::uint64_t>(idx) << 32) | (static_cast<std::uint64_t>(col) << 20) | mask;
  }

  bool dfs(std::size_t idx, long long col, std::vector<bool> &choice) {
    while (idx < tokens_.size()) {
      if (--budget_ <= 0)
        return false;
      const Token &tok = tokens_[idx];
      switch (tok.kind) {
      case Kind::text:
        col += tok.width;
        if (col > margin_)
          return false;
        ++idx;
        break;
      case Kind::brk:
        col = choice[tok.block] ? blocks_[tok.block].indent_total : col + tok.width;
        if (col > margin_)
          return false;
        ++idx;
        break;
      case Kind::close: ++idx; break;
      case Kind::open: {
        int b = tok.block;
        if (!blocks_[b].has_breaks) {
          choice[b] = false;
          ++idx;
          break;
        }
        std::uint64_t key = memo_key(idx, col, choice, blocks_[b].parent);
        if (key != ~0ULL && failed_.count(key))
          return false;
        choice[b] = false;
        if (dfs(idx + 1, col, choice))
          return true;
        choice[b] = true;
        if (dfs(idx + 1, col, choice))
          return true;
        if (key != ~0ULL && budget_ > 0)
          failed_.insert(key);
        return false;
      }
      }
    }
    return true;
  }

  void render_tree(const Tree &tree, int enclosing, Body &out) {
    if (tree.is_text()) {
      out.push_back(tree);
      return;
    }
    const Element &e = tree.element();
    if (e.name == "block") {
      int id = next_block_++;
      for (const auto &child : e.body)
        render_tree(child, id, out);
    } else if (e.name == "break") {
      if (broken_[enclosing])
        out.push_back(text("\n" + std::string(static_cast<std::size_t>(
                                                  blocks_[enclosing].indent_total),
                                              ' ')));
      else
        out.push_back(text(std::string(static_cast<std::size_t>(break_width(e)), ' ')));
    } else {
      Body inner;
      for (const auto &child : e.body)
        render_tree(child, enclosing, inner);
      out.push_back(elem(e.name, e.attributes, normalize(inner)));
    }
  }

  int margin_;
  std::vector<Token> tokens_;
  std::vector<BlockInfo> blocks_;
  std::vector<bool> broken_;
  std::unordered_set<std::uint64_t> failed_;
  long long budget_ = 0;
  int next_block_ = 1;
};

} // namespace detail

/// Resolves block/break markup into literal spaces and newlines; all other
/// elements are kept with their (formatted) bodies.
inline Body format_markup(const Body &body, int margin) {
  detail::Layout layout(body, margin);
  return layout.render(body);
}

inline Tree format_markup(const Tree &tree, int margin) {
  Body out = format_markup(Body{tree}, margin);
  if (out.size() == 1)
    return std::move(out.front());
  if (out.empty())
    return text("");
  // A layout root that dissolved into several siblings.
  return elem("formatted", {}, std::move(out));
}

inline std::string format(const Doc &doc, int margin) {
  return text_content(format_markup(Body{pretty_to_markup(doc)}, margin));
}

} // namespace pide::pretty

#endif // PIDE_PRETTY_HPP
