#pragma once

#include <stdexcept>
#include <string>

namespace omt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a documented precondition (dimension mismatch, bad grid, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A Riccati integration or simulation produced NaN/Inf (finite-time blow-up).
class NonFinite : public Error {
 public:
  using Error::Error;
};

/// The quadratic Riccati coefficient drifted away from a symmetric matrix.
class SymmetryLoss : public Error {
 public:
  using Error::Error;
};

/// The requested payoff / model pairing has no closed form here.
class UnsupportedCombination : public Error {
 public:
  using Error::Error;
};

/// A Girsanov kernel evaluated to a non-finite value at a visited state.
class InvalidKernel : public Error {
 public:
  using Error::Error;
};

/// A sampled defaultable payoff was not strictly positive.
class SingularTerminal : public Error {
 public:
  using Error::Error;
};

}  // namespace omt
