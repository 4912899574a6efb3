#pragma once

#include <stdexcept>
#include <string>

namespace hybridcox {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad CSV, schema mismatch, contract violations on arguments.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Estimation failures: non-convergence, separation, singular information.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Likelihood increases without bound along some direction (complete or
/// quasi-complete separation, monotone partial likelihood).
class SeparationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankDeficiencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

}  // namespace detail
}  // namespace hybridcox
