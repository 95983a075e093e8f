#pragma once

#include <stdexcept>
#include <string>

namespace workstat {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed something that violates a precondition (dimension mismatch,
// beta <= 0, time out of range, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A numerical post-condition failed: unitarity drift, normalization drift,
// non-PSD density matrix, overflow in a matrix function.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Phase unwrapping of ln chi could not follow the branch on the given grid.
class ResolutionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// dt certification (halved-step comparison) exceeded its tolerance.
class CertificationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string message, std::string key = {}, int line = 0, int column = 0)
      : Error(std::move(message)), key_(std::move(key)), line_(line), column_(column) {}

  const std::string& key() const noexcept { return key_; }
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  std::string key_;
  int line_;
  int column_;
};

}  // namespace workstat
