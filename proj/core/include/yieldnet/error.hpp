#pragma once

#include <stdexcept>
#include <string>

namespace yieldnet {

/// Raised when a caller breaks an operation's precondition (bad shapes,
/// out-of-range arguments, invalid configuration).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// File system and parse failures. Carries row/column context for CSV input.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data that is well formed but unusable, e.g. a variable with no observations.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values encountered during evaluation or optimization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace yieldnet
