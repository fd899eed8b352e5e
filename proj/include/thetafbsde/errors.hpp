#pragma once

#include <stdexcept>
#include <string>

namespace thetafbsde {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Caller-side mistakes: bad configuration, bad arguments, bad grids.
class ConfigError : public Error {
public:
  using Error::Error;
};

class UsageError : public Error {
public:
  using Error::Error;
};

class ParameterError : public Error {
public:
  using Error::Error;
};

class GridError : public Error {
public:
  using Error::Error;
};

// Failures of the numerics themselves.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// A second derivative in the control was found non-negative.
class AuditError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Regression design matrix is rank deficient or too badly conditioned.
class BasisError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class DivergenceError : public NumericalError {
public:
  DivergenceError(const std::string& what, std::size_t node)
      : NumericalError(what + " (node " + std::to_string(node) + ")"), node_(node) {}

  std::size_t node() const noexcept { return node_; }

private:
  std::size_t node_;
};

} // namespace thetafbsde
