#pragma once

#include <stdexcept>
#include <string>

namespace sasa {

/// Raised when an argument violates a documented precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a predictive density evaluates to zero, so the recursion and
/// the log marginal likelihood are undefined.
class NumericalDegeneracy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by enumeration routines whose input exceeds their size guard.
class SizeLimitExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace sasa
