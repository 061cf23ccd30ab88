#pragma once

#include <stdexcept>
#include <string>

namespace condsamp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value (bad parameter domain, unknown key, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation precondition (dimension mismatch, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// The model does not support the requested operation.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Observed values lie outside the numerical support of the model.
class NumericalSupportError : public Error {
 public:
  using Error::Error;
};

/// Every importance weight was zero, or a similar degenerate state.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace condsamp
