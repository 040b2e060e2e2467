#pragma once

#include <stdexcept>
#include <string>

namespace mpgdrive {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Declared structure (shapes, factorization, symmetry) is inconsistent.
class StructureError : public Error {
 public:
  using Error::Error;
};

/// A configuration cannot be satisfied or fails validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An input file is malformed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A computation produced non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mpgdrive
