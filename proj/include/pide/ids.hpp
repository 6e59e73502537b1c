#ifndef PIDE_IDS_HPP
#define PIDE_IDS_HPP

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>

namespace pide {

/// Strongly typed positive integer identifier. Each tag is its own id space.
template <class Tag>
struct Id {
  std::uint64_t value = 0;

  constexpr Id() = default;
  constexpr explicit Id(std::uint64_t v) : value(v) {}

  friend constexpr auto operator<=>(Id, Id) = default;
  friend std::ostream &operator<<(std::ostream &os, Id id) { return os << id.value; }
};

template <class Tag>
std::string to_string(Id<Tag> id) {
  return std::to_string(id.value);
}

struct VersionTag {};
struct CommandTag {};
struct ExecTag {};

using VersionId = Id<VersionTag>;
using CommandId = Id<CommandTag>;
using ExecId = Id<ExecTag>;

/// Monotonic id allocator; the first id handed out is `first`.
template <class IdT>
class IdCounter {
public:
  explicit IdCounter(std::uint64_t first = 1) : next_(first) {}
  IdT next() { return IdT{next_++}; }
  std::uint64_t peek() const { return next_; }

private:
  std::uint64_t next_;
};

} // namespace pide

template <class Tag>
struct std::hash<pide::Id<Tag>> {
  std::size_t operator()(pide::Id<Tag> id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};

#endif // PIDE_IDS_HPP
