#ifndef PIDE_MARKUP_HPP
#define PIDE_MARKUP_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "pide/error.hpp"
#include "pide/ids.hpp"

namespace pide {

using Attributes = std::vector<std::pair<std::string, std::string>>;

struct Tree;
using Body = std::vector<Tree>;

struct Element {
  std::string name;
  Attributes attributes;
  Body body;

  /// Value of the first attribute named `key`, if any.
  std::optional<std::string_view> attribute(std::string_view key) const {
    for (const auto &[k, v] : attributes)
      if (k == key)
        return v;
    return std::nullopt;
  }

  friend bool operator==(const Element &, const Element &);
};

/// XML-like markup tree: either a text leaf or a named element.
struct Tree {
  std::variant<std::string, Element> node;

  Tree() = default;
  Tree(std::string text) : node(std::move(text)) {}
  Tree(Element element) : node(std::move(element)) {}

  bool is_text() const { return std::holds_alternative<std::string>(node); }
  bool is_element() const { return std::holds_alternative<Element>(node); }
  const std::string &text() const { return std::get<std::string>(node); }
  const Element &element() const { return std::get<Element>(node); }
  Element &element() { return std::get<Element>(node); }

  friend bool operator==(const Tree &a, const Tree &b) { return a.node == b.node; }
};

inline bool operator==(const Element &a, const Element &b) {
  return a.name == b.name && a.attributes == b.attributes && a.body == b.body;
}

inline Tree text(std::string s) { return Tree{std::move(s)}; }

inline Tree elem(std::string name, Attributes attributes = {}, Body body = {}) {
  return Tree{Element{std::move(name), std::move(attributes), std::move(body)}};
}

/// The two reserved structure bytes of the transfer syntax.
inline constexpr char kYxmlX = '\x05';
inline constexpr char kYxmlY = '\x06';

inline bool has_control_byte(std::string_view s) {
  return s.find(kYxmlX) != std::string_view::npos || s.find(kYxmlY) != std::string_view::npos;
}

inline void append_text_content(const Tree &tree, std::string &out) {
  if (tree.is_text()) {
    out += tree.text();
    return;
  }
  for (const auto &child : tree.element().body)
    append_text_content(child, out);
}

/// Concatenation of all text leaves in document order.
inline std::string text_content(const Tree &tree) {
  std::string out;
  append_text_content(tree, out);
  return out;
}

inline std::string text_content(const Body &body) {
  std::string out;
  for (const auto &t : body)
    append_text_content(t, out);
  return out;
}

/// Merge adjacent text siblings and drop empty text leaves, recursively.
inline Body normalize(const Body &body) {
  Body out;
  for (const auto &t : body) {
    if (t.is_text()) {
      if (t.text().empty())
        continue;
      if (!out.empty() && out.back().is_text())
        std::get<std::string>(out.back().node) += t.text();
      else
        out.push_back(t);
    } else {
      const auto &e = t.element();
      out.push_back(elem(e.name, e.attributes, normalize(e.body)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Messages

enum class MessageKind { writeln, warning, error, status, report };

inline std::string_view to_string(MessageKind kind) {
  switch (kind) {
  case MessageKind::writeln: return "writeln";
  case MessageKind::warning: return "warning";
  case MessageKind::error: return "error";
  case MessageKind::status: return "status";
  case MessageKind::report: return "report";
  }
  return "?";
}

inline std::optional<MessageKind> message_kind_from(std::string_view s) {
  if (s == "writeln") return MessageKind::writeln;
  if (s == "warning") return MessageKind::warning;
  if (s == "error") return MessageKind::error;
  if (s == "status") return MessageKind::status;
  if (s == "report") return MessageKind::report;
  return std::nullopt;
}

/// status and report only augment document content; they are never shown as text.
inline bool is_displayed(MessageKind kind) {
  return kind == MessageKind::writeln || kind == MessageKind::warning || kind == MessageKind::error;
}

/// Half-open interval [start, stop) of 0-based offsets.
struct Range {
  std::size_t start = 0;
  std::size_t stop = 0;

  std::size_t length() const { return stop - start; }
  bool empty() const { return start == stop; }

  /// Half-open intersection. An empty range acts as a point that intersects
  /// the ranges containing it.
  bool intersects(const Range &other) const {
    if (empty() && other.empty())
      return start == other.start;
    if (empty())
      return other.start <= start && start < other.stop;
    if (other.empty())
      return start <= other.start && other.start < stop;
    return start < other.stop && other.start < stop;
  }

  friend bool operator==(const Range &, const Range &) = default;
};

struct Message {
  std::uint64_t serial = 0;
  MessageKind kind = MessageKind::writeln;
  ExecId exec;
  std::optional<Range> range; // relative to the command span
  Body body;

  friend bool operator==(const Message &, const Message &) = default;
};

/// A markup annotation over a range of a command span.
struct PositionedMarkup {
  Range range;
  std::string name;
  Attributes attributes;

  friend bool operator==(const PositionedMarkup &, const PositionedMarkup &) = default;
};

/// Positioned markup carried as an element with offset/end_offset attributes
/// (0-based, half-open). Returns nullopt if the element lacks either attribute.
inline std::optional<PositionedMarkup> positioned_from_element(const Element &e) {
  auto off = e.attribute("offset");
  auto end = e.attribute("end_offset");
  if (!off || !end)
    return std::nullopt;
  PositionedMarkup pm;
  try {
    std::size_t used = 0;
    pm.range.start = std::stoull(std::string(*off), &used);
    if (used != off->size()) return std::nullopt;
    pm.range.stop = std::stoull(std::string(*end), &used);
    if (used != end->size()) return std::nullopt;
  } catch (const std::exception &) {
    return std::nullopt;
  }
  if (pm.range.stop < pm.range.start)
    return std::nullopt;
  pm.name = e.name;
  for (const auto &[k, v] : e.attributes)
    if (k != "offset" && k != "end_offset")
      pm.attributes.emplace_back(k, v);
  return pm;
}

inline Tree positioned_to_element(const PositionedMarkup &pm) {
  Attributes attrs{{"offset", std::to_string(pm.range.start)},
                   {"end_offset", std::to_string(pm.range.stop)}};
  attrs.insert(attrs.end(), pm.attributes.begin(), pm.attributes.end());
  return elem(pm.name, std::move(attrs));
}

/// Persistent, append-only collection of positioned markup for one command
/// span. Copies share storage; add() never disturbs other copies.
class MarkupStore {
public:
  MarkupStore() = default;
  explicit MarkupStore(std::size_t span_length) : span_length_(span_length) {}

  std::size_t span_length() const { return span_length_; }
  std::size_t size() const { return entries_ ? entries_->size() : 0; }
  bool empty() const { return size() == 0; }

  /// Returns a store extended by `entry`.
  [[nodiscard]] MarkupStore add(PositionedMarkup entry) const {
    if (entry.range.start > entry.range.stop || entry.range.stop > span_length_)
      throw BoundsError("markup range [" + std::to_string(entry.range.start) + "," +
                        std::to_string(entry.range.stop) + ") outside span of length " +
                        std::to_string(span_length_));
    MarkupStore out(span_length_);
    auto next = entries_ ? std::make_shared<std::vector<PositionedMarkup>>(*entries_)
                         : std::make_shared<std::vector<PositionedMarkup>>();
    next->push_back(std::move(entry));
    out.entries_ = std::move(next);
    return out;
  }

  /// All entries intersecting `range`, in insertion order.
  std::vector<PositionedMarkup> query(const Range &range) const {
    std::vector<PositionedMarkup> out;
    if (!entries_)
      return out;
    for (const auto &e : *entries_)
      if (e.range.intersects(range))
        out.push_back(e);
    return out;
  }

  std::vector<PositionedMarkup> entries() const {
    return entries_ ? *entries_ : std::vector<PositionedMarkup>{};
  }

private:
  std::size_t span_length_ = 0;
  std::shared_ptr<const std::vector<PositionedMarkup>> entries_;
};

} // namespace pide

#endif // PIDE_MARKUP_HPP
