#pragma once

#include <stdexcept>
#include <string>

namespace sscc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on arguments or configuration was violated.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File missing, unreadable or unwritable.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File contents do not follow the expected binary or text layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Inputs are individually valid but inconsistent with each other, such as
/// a cube whose band count does not match a checkpoint.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity showed up in activations or the loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace sscc
