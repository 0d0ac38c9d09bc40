#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geossl {

// Root of every library error. CLI exit codes are chosen by category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid scalar parameter (sigma <= 0, k >= n, K = 0, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, divergence, or degenerate numerical input.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Training diverged; carries the step at which the loss became non-finite.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : NumericError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents. Subclasses distinguish the failing check.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class LabelRangeError : public FormatError {
 public:
  using FormatError::FormatError;
};

class CountMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Invalid experiment configuration; raised before any compute starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace geossl
