#pragma once

#include <stdexcept>
#include <string>

namespace vmtco2 {

/// Exit codes shared by every CLI command.
enum class ExitCode : int {
  Ok = 0,
  InputError = 2,
  ConsistencyError = 3,
  NumericalError = 4,
};

/// Base of all engine errors; carries the exit code the CLI maps it to.
class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Malformed input, schema mismatch, argument outside its domain.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ExitCode::InputError, what) {}
};

/// Inputs individually valid but inconsistent with each other.
class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& what) : Error(ExitCode::ConsistencyError, what) {}
};

/// Estimator or solver failure.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ExitCode::NumericalError, what) {}
};

}  // namespace vmtco2
