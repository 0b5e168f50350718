#pragma once

#include <stdexcept>
#include <string>

namespace frailsim {

// Base of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Iterative numerics that failed to converge (root bracketing, etc).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Quadrature failure: non-finite integrand, level cap, failed mode search.
class QuadratureError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Data cannot support the requested model (too few events, all censored).
class FitSetupError : public Error {
 public:
  using Error::Error;
};

// Malformed input files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration or unknown identifiers.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace frailsim
