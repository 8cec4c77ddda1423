#pragma once

#include <stdexcept>
#include <string>

namespace pbe {

/// Base of every error raised by the solver. The CLI maps each subclass to a
/// distinct exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or configuration value.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Mesh sizing does not fit the domain.
class SizingError : public Error {
 public:
  using Error::Error;
};

/// Data violates a compatibility requirement (e.g. nonzero boundary trace).
class IncompatibleData : public Error {
 public:
  using Error::Error;
};

class CflViolation : public Error {
 public:
  CflViolation(const std::string& what, double ratio) : Error(what), ratio_(ratio) {}
  /// tau * max G / iota; a passing configuration has ratio <= 1.
  double ratio() const noexcept { return ratio_; }

 private:
  double ratio_;
};

/// Factorization breakdown or iterative non-convergence.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace pbe
