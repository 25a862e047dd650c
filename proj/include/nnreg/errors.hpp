#pragma once

#include <stdexcept>
#include <string>

namespace nnreg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition, e.g. a dimension mismatch.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Iterative routine (power iteration) did not meet its tolerance.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, double last_estimate)
      : Error(what), last_estimate_(last_estimate) {}
  double last_estimate() const { return last_estimate_; }

 private:
  double last_estimate_;
};

/// A type invariant does not hold, e.g. a preconditioner that is not SPD.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class UnsupportedConfiguration : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nnreg
