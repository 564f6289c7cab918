// ============================================================================
// errors.hpp -- exception hierarchy shared by all pdcal modules
//
// Every failure is one of three families, each mapped to a CLI exit code:
//   ParameterError     -> 2  (bad configuration, invalid distribution, ...)
//   DataError          -> 3  (malformed input, degenerate moments, ...)
//   MethodUnavailable  -> 4  (estimator inputs missing, e.g. no `c` column)
// ============================================================================
#pragma once
#include <stdexcept>
#include <string>

namespace pdcal {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual int exit_code() const noexcept { return 1; }
};

class ParameterError : public Error {
public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 2; }
};

/// Distribution support could not be truncated within the tail-mass budget.
class TruncationError : public ParameterError {
public:
  using ParameterError::ParameterError;
};

/// A quantity diverges at the requested parameter (e.g. eta = 0).
class DivergenceError : public ParameterError {
public:
  using ParameterError::ParameterError;
};

class DataError : public Error {
public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 3; }
};

class InsufficientDataError : public DataError {
public:
  using DataError::DataError;
};

/// Zero singles in an arm; the estimator would divide by zero.
class DegenerateDataError : public DataError {
public:
  using DataError::DataError;
};

class BackgroundDominatesError : public DataError {
public:
  using DataError::DataError;
};

class ParseError : public DataError {
public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_{line} {}
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class MethodUnavailable : public Error {
public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 4; }
};

}  // namespace pdcal
