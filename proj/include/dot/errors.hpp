#pragma once

#include <stdexcept>
#include <string>

namespace dot {

/// Raised when a caller breaks an operation's shape or argument contract.
/// Maps to CLI exit code 2.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised for malformed user input (files, flags, point coordinates).
/// Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary format problems; the message carries the byte offset.
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A pixel ray that never reaches the ground plane.
class NoIntersection : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace dot
