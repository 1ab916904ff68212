#pragma once

#include <stdexcept>
#include <string>

namespace hdpan {

// Base of every error thrown by the library. The CLI maps the concrete
// subclasses onto its exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed config, unsupported option, invalid argument.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Parameter outside the mathematical domain of an operation (e.g. alpha <= 1).
class DomainError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Dataset files missing, truncated or inconsistent.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or divergences during computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A divergence whose inner-product numerator is zero: the log-ratio is
// unbounded. Never silently mapped to a large finite number.
class InfiniteDivergence : public NumericError {
 public:
  using NumericError::NumericError;
};

// Tensor shapes that do not chain.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace hdpan
