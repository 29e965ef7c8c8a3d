#pragma once

#include <stdexcept>
#include <string>

namespace ticnn {

// Base class for every error raised by the library. The CLI maps the
// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or extent disagreement between operands.
class DimensionError : public Error {
 public:
  DimensionError(std::string axis, const std::string& what)
      : Error("dimension error on axis '" + axis + "': " + what), axis_(std::move(axis)) {}

  const std::string& axis() const noexcept { return axis_; }

 private:
  std::string axis_;
};

// Invalid configuration or argument value (exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or missing input data (exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// Optimizer non-convergence or other numerical failure (exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ticnn
