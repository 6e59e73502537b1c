#ifndef PIDE_ERROR_HPP
#define PIDE_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pide {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A range or edit that falls outside the text it refers to.
class BoundsError : public Error {
public:
  using Error::Error;
};

/// Content that cannot be represented in the transfer syntax.
class EncodeError : public Error {
public:
  using Error::Error;
};

/// Malformed YXML or XML input. `position` is a byte offset into the input.
class ParseError : public Error {
public:
  ParseError(const std::string &what, std::size_t position)
      : Error(what + " at byte " + std::to_string(position)), position_(position) {}
  std::size_t position() const noexcept { return position_; }

private:
  std::size_t position_;
};

/// Fatal condition on the private checker channel.
class ProtocolError : public Error {
public:
  using Error::Error;
};

} // namespace pide

#endif // PIDE_ERROR_HPP
