#pragma once
// Error types shared across the library.

#include <stdexcept>
#include <string>

namespace relaxfield {

/// Base class of every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A named field violated one of its constraints.
struct ValidationError : Error {
  ValidationError(std::string field, const std::string& constraint)
      : Error(field + ": " + constraint), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Two fixed-potential claims with different values landed on the same node.
struct OverlapConflict : Error {
  using Error::Error;
};

/// A layout left no free nodes to solve for.
struct EmptyInterior : Error {
  using Error::Error;
};

/// The convergence monitor was placed on a fixed node.
struct MonitorOnFixedNode : Error {
  using Error::Error;
};

/// The dense direct solver refused a system over its size guard.
struct SystemTooLarge : Error {
  using Error::Error;
};

/// Interpolation received two samples with the same coordinate.
struct DuplicateNodes : Error {
  using Error::Error;
};

/// A row/column index fell outside the grid.
struct IndexOutOfRange : Error {
  using Error::Error;
};

/// Configuration text is not well-formed; position is a byte offset.
struct SyntaxError : Error {
  SyntaxError(const std::string& what, std::size_t byte) : Error(what), byte_(byte) {}
  std::size_t byte() const { return byte_; }

 private:
  std::size_t byte_ = 0;
};

/// Strict parsing rejected a key that is not part of the schema.
struct UnknownKey : Error {
  using Error::Error;
};

/// Base for filesystem/stream failures.
struct IoError : Error {
  using Error::Error;
};

/// An export destination could not be opened or written.
struct WriteFailure : IoError {
  using IoError::IoError;
};

/// An input file could not be opened or decoded.
struct ReadFailure : IoError {
  using IoError::IoError;
};

}  // namespace relaxfield
