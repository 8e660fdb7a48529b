#pragma once

#include <stdexcept>
#include <string>

namespace lexisafe {

// Process exit codes shared by every CLI command.
enum class ExitCode : int {
  ok = 0,
  config_error = 2,
  data_error = 3,
  numerical_abort = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Invalid configuration, dimension mismatch or misuse of an API contract.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::config_error, what) {}
};

/// Caller violated a runtime precondition (stepping a terminal state, bad index).
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ExitCode::config_error, what) {}
};

enum class DataErrorKind {
  io,
  bad_magic,
  version_mismatch,
  truncated_columns,
  length_disagreement,
  checksum_mismatch,
  bad_header,
  dims_mismatch,
};

const char* to_string(DataErrorKind kind);

class DataError : public Error {
 public:
  DataError(DataErrorKind kind, const std::string& detail)
      : Error(ExitCode::data_error, std::string(to_string(kind)) + ": " + detail), kind_(kind) {}
  DataErrorKind kind() const noexcept { return kind_; }

 private:
  DataErrorKind kind_;
};

/// NaN/Inf encountered during optimization.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ExitCode::numerical_abort, what) {}
};

}  // namespace lexisafe
