#pragma once

#include <stdexcept>
#include <string>

namespace mvrfd {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, labels, manifests).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Dimension or axis mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameter value or violated precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mvrfd
