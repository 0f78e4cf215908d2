#pragma once

#include <stdexcept>
#include <string>

namespace unfolder {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector lengths, axes or matrix shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A histogram with zero total mass cannot be normalized.
class NormalizationError : public Error {
 public:
  using Error::Error;
};

/// A response kernel returned a negative or non-finite value.
class InvalidKernelError : public Error {
 public:
  using Error::Error;
};

/// The folding operator is identically zero, so no normalization factor exists.
class DegenerateOperatorError : public Error {
 public:
  using Error::Error;
};

/// The measurement covariance has no real square root (not positive semidefinite).
class DecompositionError : public Error {
 public:
  using Error::Error;
};

/// Input violates a construction precondition (empty pair list, bad axis, ...).
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or file content. `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// The iteration produced non-finite values at order `iteration()`.
class NumericalFailure : public Error {
 public:
  NumericalFailure(long iteration, const std::string& what)
      : Error(what), iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

}  // namespace unfolder
