#pragma once

#include <stdexcept>
#include <string>

namespace certfl {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: empty datasets, impossible splits, bad thresholds.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A caller passed a value that violates an operation's precondition
// (shape mismatch, bad class index, length mismatch).
class InputError : public Error {
 public:
  using Error::Error;
};

// Non-finite values produced or consumed by a numeric routine.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (IDX, model container, reports).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace certfl
