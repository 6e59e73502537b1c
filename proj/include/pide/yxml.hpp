#ifndef PIDE_YXML_HPP
#define PIDE_YXML_HPP

// YXML transfer syntax. Two reserved bytes X = 0x05 and Y = 0x06 carry all
// structure; everything else is text:
//
//   Elem(name, attrs, body)  =>  X Y name (Y key=value)* X  body  X Y X
//   Text(s)                  =>  s
//
// The grammar is part of the wire contract and must stay byte-identical.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "pide/error.hpp"
#include "pide/markup.hpp"

namespace pide::yxml {

inline constexpr char X = kYxmlX;
inline constexpr char Y = kYxmlY;

namespace detail {

inline void check_clean(std::string_view s, std::string_view what) {
  if (has_control_byte(s))
    throw EncodeError("control byte in " + std::string(what) + ": \"" + std::string(s) + "\"");
}

inline void encode_tree(const Tree &tree, std::string &out) {
  if (tree.is_text()) {
    check_clean(tree.text(), "text");
    out += tree.text();
    return;
  }
  const Element &e = tree.element();
  if (e.name.empty())
    throw EncodeError("empty element name");
  check_clean(e.name, "element name");
  out += X;
  out += Y;
  out += e.name;
  for (const auto &[key, value] : e.attributes) {
    if (key.empty() || key.find('=') != std::string::npos)
      throw EncodeError("invalid attribute key \"" + key + "\"");
    check_clean(key, "attribute key");
    check_clean(value, "attribute value");
    out += Y;
    out += key;
    out += '=';
    out += value;
  }
  out += X;
  for (const auto &child : e.body)
    encode_tree(child, out);
  out += X;
  out += Y;
  out += X;
}

} // namespace detail

inline std::string encode(const Body &body) {
  std::string out;
  for (const auto &t : body)
    detail::encode_tree(t, out);
  return out;
}

inline std::string encode(const Tree &tree) {
  std::string out;
  detail::encode_tree(tree, out);
  return out;
}

/// Parses a YXML byte sequence into a list of trees. Adjacent text is merged
/// into a single leaf; no empty text leaves are produced.
inline Body parse(std::string_view bytes) {
  struct Frame {
    Element element;
    std::size_t opened_at;
  };
  std::vector<Frame> stack;
  Body top;

  auto current_body = [&]() -> Body & { return stack.empty() ? top : stack.back().element.body; };
  auto push_text = [&](std::string_view s) {
    if (s.empty())
      return;
    Body &body = current_body();
    if (!body.empty() && body.back().is_text())
      std::get<std::string>(body.back().node) += s;
    else
      body.emplace_back(std::string(s));
  };

  std::size_t pos = 0;
  const std::size_t n = bytes.size();
  while (pos < n) {
    char c = bytes[pos];
    if (c == Y)
      throw ParseError("stray Y marker in text", pos);
    if (c != X) {
      std::size_t next = pos;
      while (next < n && bytes[next] != X && bytes[next] != Y)
        ++next;
      push_text(bytes.substr(pos, next - pos));
      pos = next;
      continue;
    }
    // Structure chunk: X Y ... X
    const std::size_t chunk_start = pos;
    if (pos + 1 >= n || bytes[pos + 1] != Y)
      throw ParseError("X marker not followed by Y", pos);
    std::size_t close = bytes.find(X, pos + 2);
    if (close == std::string_view::npos)
      throw ParseError("unterminated markup chunk", pos);
    std::string_view chunk = bytes.substr(pos + 2, close - (pos + 2));
    pos = close + 1;

    if (chunk.empty()) {
      if (stack.empty())
        throw ParseError("close marker without open element", chunk_start);
      Element done = std::move(stack.back().element);
      stack.pop_back();
      current_body().emplace_back(std::move(done));
      continue;
    }

    // name (Y key=value)*
    std::size_t field_end = chunk.find(Y);
    std::string_view name = chunk.substr(0, field_end);
    if (name.empty())
      throw ParseError("empty element name", chunk_start);
    Element e;
    e.name = std::string(name);
    std::size_t offset = chunk_start + 2;
    while (field_end != std::string_view::npos) {
      std::size_t field_start = field_end + 1;
      field_end = chunk.find(Y, field_start);
      std::string_view field = chunk.substr(field_start, field_end == std::string_view::npos
                                                             ? std::string_view::npos
                                                             : field_end - field_start);
      std::size_t eq = field.find('=');
      if (eq == std::string_view::npos)
        throw ParseError("attribute without '='", offset + field_start);
      if (eq == 0)
        throw ParseError("empty attribute key", offset + field_start);
      e.attributes.emplace_back(std::string(field.substr(0, eq)), std::string(field.substr(eq + 1)));
    }
    stack.push_back(Frame{std::move(e), chunk_start});
  }
  if (!stack.empty())
    throw ParseError("unclosed element <" + stack.back().element.name + ">", n);
  return top;
}

/// Parses input that must contain exactly one element.
inline Element parse_element(std::string_view bytes) {
  Body body = parse(bytes);
  if (body.size() != 1 || !body.front().is_element())
    throw ParseError("expected exactly one element", 0);
  return std::move(body.front().element());
}

/// Renders YXML bytes with the two markers shown as visible escapes.
inline std::string visible(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  for (char c : bytes) {
    if (c == X)
      out += "\\x05";
    else if (c == Y)
      out += "\\x06";
    else if (c == '\\')
      out += "\\\\";
    else
      out += c;
  }
  return out;
}

} // namespace pide::yxml

#endif // PIDE_YXML_HPP
