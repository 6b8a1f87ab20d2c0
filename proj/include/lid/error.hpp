// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace lid {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of an operation (zero-norm vectors,
/// non one-hot targets, empty sets where one element is required).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked in the wrong order or on inconsistent state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Bad user input: malformed files, invalid configuration, unknown names.
/// The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lid
