#ifndef PIDE_SCRIPT_HPP
#define PIDE_SCRIPT_HPP

// Line-oriented edit scripts:
//
//   node <name>
//   insert <offset> "<text>"     escapes: \n \t \\ \"
//   remove <offset> <length>
//   await-quiescent
//   snapshot <start> <stop>
//
// Blank lines and lines starting with '#' are ignored.

#include <cstddef>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pide/edit.hpp"
#include "pide/error.hpp"
#include "pide/protocol.hpp"

namespace pide::script {

struct SelectNode {
  std::string name;
};
struct AwaitQuiescent {};
struct SnapshotQuery {
  std::size_t start = 0;
  std::size_t stop = 0;
};

using Step = std::variant<SelectNode, Insert, Remove, AwaitQuiescent, SnapshotQuery>;

struct Line {
  std::size_t number = 0;
  Step step;
};

class ScriptError : public Error {
public:
  ScriptError(std::size_t line, const std::string &what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::string_view next_word(std::string_view &s) {
  s = trim(s);
  std::size_t end = s.find_first_of(" \t");
  std::string_view w = s.substr(0, end);
  s = end == std::string_view::npos ? std::string_view{} : s.substr(end);
  return w;
}

inline std::size_t number(std::string_view &s, std::size_t line, const char *what) {
  std::string_view w = next_word(s);
  auto v = protocol::parse_u64(w);
  if (!v)
    throw ScriptError(line, std::string("expected ") + what + ", got '" + std::string(w) + "'");
  return static_cast<std::size_t>(*v);
}

inline std::string quoted(std::string_view &s, std::size_t line) {
  s = trim(s);
  if (s.empty() || s.front() != '"')
    throw ScriptError(line, "expected quoted string");
  std::string out;
  std::size_t i = 1;
  for (; i < s.size() && s[i] != '"'; ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size())
      break;
    switch (s[i]) {
    case 'n': out += '\n'; break;
    case 't': out += '\t'; break;
    case '\\': out += '\\'; break;
    case '"': out += '"'; break;
    default: throw ScriptError(line, std::string("unknown escape \\") + s[i]);
    }
  }
  if (i >= s.size())
    throw ScriptError(line, "unterminated string");
  s = s.substr(i + 1);
  return out;
}

inline void expect_end(std::string_view rest, std::size_t line) {
  if (!trim(rest).empty())
    throw ScriptError(line, "trailing input '" + std::string(trim(rest)) + "'");
}

} // namespace detail

/// Parses one line; returns false for blank and comment lines.
inline bool parse_line(std::string_view text, std::size_t number, Step &out) {
  using namespace detail;
  std::string_view rest = trim(text);
  if (rest.empty() || rest.front() == '#')
    return false;
  std::string_view word = next_word(rest);
  if (word == "node") {
    std::string_view name = next_word(rest);
    if (name.empty())
      throw ScriptError(number, "node needs a name");
    expect_end(rest, number);
    out = SelectNode{std::string(name)};
  } else if (word == "insert") {
    std::size_t offset = detail::number(rest, number, "offset");
    std::string s = quoted(rest, number);
    expect_end(rest, number);
    out = Insert{offset, std::move(s)};
  } else if (word == "remove") {
    std::size_t offset = detail::number(rest, number, "offset");
    std::size_t length = detail::number(rest, number, "length");
    if (length == 0)
      throw ScriptError(number, "remove length must be positive");
    expect_end(rest, number);
    out = Remove{offset, length};
  } else if (word == "await-quiescent") {
    expect_end(rest, number);
    out = AwaitQuiescent{};
  } else if (word == "snapshot") {
    std::size_t start = detail::number(rest, number, "start");
    std::size_t stop = detail::number(rest, number, "stop");
    if (stop < start)
      throw ScriptError(number, "snapshot range ends before it starts");
    expect_end(rest, number);
    out = SnapshotQuery{start, stop};
  } else {
    throw ScriptError(number, "unknown directive '" + std::string(word) + "'");
  }
  return true;
}

/// Throws ScriptError naming the first malformed line.
inline std::vector<Line> parse(std::istream &in) {
  std::vector<Line> lines;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    Step step;
    if (parse_line(text, number, step))
      lines.push_back(Line{number, std::move(step)});
  }
  return lines;
}

inline std::vector<Line> parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse(in);
}

/// Quotes `s` in the script string syntax.
inline std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
    case '\n': out += "\\n"; break;
    case '\t': out += "\\t"; break;
    case '\\': out += "\\\\"; break;
    case '"': out += "\\\""; break;
    default: out += c;
    }
  }
  return out + "\"";
}

} // namespace pide::script

#endif // PIDE_SCRIPT_HPP
