#ifndef PIDE_XML_HPP
#define PIDE_XML_HPP

// Plain XML rendering of markup trees, and a reader for the same subset:
// elements, attributes (in order), text, and the five standard escapes.

#include <cctype>
#include <string>
#include <string_view>

#include "pide/error.hpp"
#include "pide/markup.hpp"

namespace pide::xml {

inline void escape(std::string_view s, std::string &out, bool attribute) {
  for (char c : s) {
    switch (c) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '"':
      if (attribute) out += "&quot;";
      else out += c;
      break;
    default: out += c;
    }
  }
}

inline void write(const Tree &tree, std::string &out) {
  if (tree.is_text()) {
    escape(tree.text(), out, false);
    return;
  }
  const Element &e = tree.element();
  out += '<';
  out += e.name;
  for (const auto &[k, v] : e.attributes) {
    out += ' ';
    out += k;
    out += "=\"";
    escape(v, out, true);
    out += '"';
  }
  if (e.body.empty()) {
    out += "/>";
    return;
  }
  out += '>';
  for (const auto &child : e.body)
    write(child, out);
  out += "</";
  out += e.name;
  out += '>';
}

inline std::string to_string(const Tree &tree) {
  std::string out;
  write(tree, out);
  return out;
}

inline std::string to_string(const Body &body) {
  std::string out;
  for (const auto &t : body)
    write(t, out);
  return out;
}

namespace detail {

class Reader {
public:
  explicit Reader(std::string_view in) : in_(in) {}

  Body read_all() {
    Body body = read_body(nullptr);
    return body;
  }

private:
  static bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
           c == ':';
  }

  void skip_space() {
    while (pos_ < in_.size() && std::isspace(static_cast<unsigned char>(in_[pos_])))
      ++pos_;
  }

  std::string read_name() {
    std::size_t start = pos_;
    while (pos_ < in_.size() && is_name_char(in_[pos_]))
      ++pos_;
    if (start == pos_)
      throw ParseError("expected a name", pos_);
    return std::string(in_.substr(start, pos_ - start));
  }

  std::string decode(std::string_view s, std::size_t base) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != '&') {
        out += s[i];
        continue;
      }
      std::size_t semi = s.find(';', i);
      if (semi == std::string_view::npos)
        throw ParseError("unterminated entity", base + i);
      std::string_view ent = s.substr(i + 1, semi - i - 1);
      if (ent == "amp") out += '&';
      else if (ent == "lt") out += '<';
      else if (ent == "gt") out += '>';
      else if (ent == "quot") out += '"';
      else if (ent == "apos") out += '\'';
      else throw ParseError("unknown entity &" + std::string(ent) + ";", base + i);
      i = semi;
    }
    return out;
  }

  void push_text(Body &body, std::string s) {
    if (s.empty())
      return;
    if (!body.empty() && body.back().is_text())
      std::get<std::string>(body.back().node) += s;
    else
      body.emplace_back(std::move(s));
  }

  // Reads children until the closing tag of `open` (or end of input when null).
  Body read_body(const std::string *open) {
    Body body;
    while (pos_ < in_.size()) {
      if (in_[pos_] != '<') {
        std::size_t start = pos_;
        while (pos_ < in_.size() && in_[pos_] != '<')
          ++pos_;
        push_text(body, decode(in_.substr(start, pos_ - start), start));
        continue;
      }
      if (pos_ + 1 < in_.size() && in_[pos_ + 1] == '/') {
        std::size_t at = pos_;
        if (!open)
          throw ParseError("unexpected closing tag", at);
        pos_ += 2;
        std::string name = read_name();
        skip_space();
        if (pos_ >= in_.size() || in_[pos_] != '>')
          throw ParseError("expected '>'", pos_);
        ++pos_;
        if (name != *open)
          throw ParseError("mismatched closing tag </" + name + ">", at);
        return body;
      }
      body.push_back(read_element());
    }
    if (open)
      throw ParseError("unclosed element <" + *open + ">", pos_);
    return body;
  }

  Tree read_element() {
    ++pos_; // '<'
    Element e;
    e.name = read_name();
    for (;;) {
      skip_space();
      if (pos_ >= in_.size())
        throw ParseError("unterminated tag", pos_);
      if (in_[pos_] == '/') {
        if (pos_ + 1 >= in_.size() || in_[pos_ + 1] != '>')
          throw ParseError("expected '/>'", pos_);
        pos_ += 2;
        return Tree{std::move(e)};
      }
      if (in_[pos_] == '>') {
        ++pos_;
        e.body = read_body(&e.name);
        return Tree{std::move(e)};
      }
      std::string key = read_name();
      skip_space();
      if (pos_ >= in_.size() || in_[pos_] != '=')
        throw ParseError("expected '='", pos_);
      ++pos_;
      skip_space();
      if (pos_ >= in_.size() || (in_[pos_] != '"' && in_[pos_] != '\''))
        throw ParseError("expected quoted attribute value", pos_);
      char quote = in_[pos_++];
      std::size_t start = pos_;
      std::size_t end = in_.find(quote, pos_);
      if (end == std::string_view::npos)
        throw ParseError("unterminated attribute value", start);
      pos_ = end + 1;
      e.attributes.emplace_back(std::move(key), decode(in_.substr(start, end - start), start));
    }
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

} // namespace detail

/// Parses XML text produced by `to_string` (or the printouts of the same shape).
inline Body parse(std::string_view in) { return detail::Reader(in).read_all(); }

} // namespace pide::xml

#endif // PIDE_XML_HPP
