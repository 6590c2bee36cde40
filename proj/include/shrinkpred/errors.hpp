#pragma once

#include <stdexcept>
#include <string>

namespace shrinkpred {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failures: the CLI maps these to exit status 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularMetricError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A finite-difference stencil leaves the chart's domain.
class StencilError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A stencil comes within the guard radius of a declared singular point.
class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegeneratePlaneError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EstimationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Importance sampling collapsed (effective sample size below threshold).
class IntegrationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Invalid arguments: wrong dimension, out-of-domain parameters, bad names.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Malformed run configuration. The CLI maps these to exit status 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace shrinkpred
