#pragma once

#include <stdexcept>
#include <string>

namespace uqc {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a type invariant (non-Hermitian, not unit trace, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A dimension or enumeration size exceeds the configured cap.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration or CLI input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Iterative construction did not stabilise within its budget.
class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

class NotImplementedError : public Error {
 public:
  using Error::Error;
};

/// Projection of the state onto the code space has (numerically) zero weight.
class ZeroOverlapError : public Error {
 public:
  using Error::Error;
};

}  // namespace uqc
