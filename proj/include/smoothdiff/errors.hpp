#pragma once

#include <stdexcept>
#include <string>

namespace smoothdiff {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument, dimension, or configuration value.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed user input (files, config); carries a line diagnostic when known.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A computation failed: singular system, lost positive definiteness,
/// IRLS divergence. Messages are prefixed with "module::op:".
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Mathematical precondition not met (e.g. a factorization that does not exist).
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace smoothdiff
