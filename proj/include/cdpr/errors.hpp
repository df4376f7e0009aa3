#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdpr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be positive definite failed its Cholesky factorization.
/// `step` is the timestep index when the failure is tied to a recursion.
class ConditioningError : public Error {
 public:
  ConditioningError(const std::string& what, long step = -1)
      : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class InfeasibleWrenchError : public Error {
 public:
  InfeasibleWrenchError(double lambda_lo, double lambda_hi);
  double lambda_lo() const noexcept { return lo_; }
  double lambda_hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// Malformed input file or config. Carries a line number or byte offset
/// when one is meaningful.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, long tick = -1)
      : Error(what), tick_(tick) {}
  long tick() const noexcept { return tick_; }

 private:
  long tick_;
};

}  // namespace cdpr
