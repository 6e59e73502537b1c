#ifndef PIDE_EDIT_HPP
#define PIDE_EDIT_HPP

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "pide/error.hpp"

namespace pide {

struct Insert {
  std::size_t offset = 0;
  std::string text;
  friend bool operator==(const Insert &, const Insert &) = default;
};

struct Remove {
  std::size_t offset = 0;
  std::size_t length = 0;
  friend bool operator==(const Remove &, const Remove &) = default;
};

using TextEdit = std::variant<Insert, Remove>;
using TextEdits = std::vector<TextEdit>;

/// Which side an offset sticks to when text is inserted exactly at it.
/// Right gravity moves the offset past the inserted text.
enum class Gravity { right, left };

inline void apply_edit(std::string &text, const TextEdit &edit) {
  if (const auto *ins = std::get_if<Insert>(&edit)) {
    if (ins->offset > text.size())
      throw BoundsError("insert at " + std::to_string(ins->offset) + " beyond text of length " +
                        std::to_string(text.size()));
    text.insert(ins->offset, ins->text);
    return;
  }
  const auto &rem = std::get<Remove>(edit);
  if (rem.length == 0)
    throw BoundsError("remove of zero length");
  if (rem.offset > text.size() || rem.length > text.size() - rem.offset)
    throw BoundsError("remove [" + std::to_string(rem.offset) + "," +
                      std::to_string(rem.offset + rem.length) + ") beyond text of length " +
                      std::to_string(text.size()));
  text.erase(rem.offset, rem.length);
}

/// Applies edits left to right; on any invalid edit the input is left untouched.
inline std::string apply_edits(const std::string &text, const TextEdits &edits) {
  std::string out = text;
  for (const auto &e : edits)
    apply_edit(out, e);
  return out;
}

namespace detail {

inline std::size_t shift_insert(std::size_t k, std::size_t at, std::size_t n, Gravity g) {
  if (k > at || (k == at && g == Gravity::right))
    return k + n;
  return k;
}

inline std::size_t shift_remove(std::size_t k, std::size_t at, std::size_t n) {
  if (k >= at + n)
    return k - n;
  if (k >= at)
    return at;
  return k;
}

} // namespace detail

/// Maps an offset of the old text forward through `edits`. Offsets inside a
/// removed range collapse to the removal point.
inline std::size_t convert(std::size_t offset, const TextEdits &edits,
                           Gravity gravity = Gravity::right) {
  for (const auto &e : edits) {
    if (const auto *ins = std::get_if<Insert>(&e))
      offset = detail::shift_insert(offset, ins->offset, ins->text.size(), gravity);
    else {
      const auto &rem = std::get<Remove>(e);
      offset = detail::shift_remove(offset, rem.offset, rem.length);
    }
  }
  return offset;
}

/// Maps an offset of the new text back through `edits`, undoing them in
/// reverse order. Offsets inside inserted text collapse to the insertion point.
inline std::size_t revert(std::size_t offset, const TextEdits &edits,
                          Gravity gravity = Gravity::right) {
  for (auto it = edits.rbegin(); it != edits.rend(); ++it) {
    if (const auto *ins = std::get_if<Insert>(&*it))
      offset = detail::shift_remove(offset, ins->offset, ins->text.size());
    else {
      const auto &rem = std::get<Remove>(*it);
      offset = detail::shift_insert(offset, rem.offset, rem.length, gravity);
    }
  }
  return offset;
}

} // namespace pide

#endif // PIDE_EDIT_HPP
