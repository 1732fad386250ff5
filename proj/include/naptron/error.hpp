#pragma once

#include <stdexcept>
#include <string>

namespace naptron {

/// Base of every error raised by the library. `exit_code()` follows the CLI
/// convention: 1 for validation/config problems, 2 for data problems.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or out-of-contract argument to a pure operation.
class InputError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

/// A dataset directory or store file failed validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Query against a class with no stored patterns.
class EmptyClassError : public DataError {
 public:
  EmptyClassError(int class_id, const std::string& what)
      : DataError(what), class_id_(class_id) {}
  int class_id() const noexcept { return class_id_; }

 private:
  int class_id_;
};

/// No class received any pattern while building a store.
class BuildError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace naptron
