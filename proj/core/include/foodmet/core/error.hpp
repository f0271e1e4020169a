#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace foodmet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violates an operation's precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `location` is a 1-based line number for text
/// formats and a byte offset for binary formats.
class ParseError : public Error {
 public:
  enum class Unit { kLine, kByte };

  ParseError(const std::string& what, std::size_t location, Unit unit)
      : Error(what + (unit == Unit::kLine ? " (line " : " (byte ") +
              std::to_string(location) + ")"),
        location_(location),
        unit_(unit) {}

  std::size_t location() const noexcept { return location_; }
  Unit unit() const noexcept { return unit_; }

 private:
  std::size_t location_;
  Unit unit_;
};

/// A value is well-formed syntactically but breaks a structural invariant
/// (face index out of range, inconsistent raster sizes, ...).
class StructuralError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace foodmet
