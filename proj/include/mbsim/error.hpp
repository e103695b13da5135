#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mbsim {

// Base of every error raised by the library. The CLI maps the two families
// below onto exit codes: InputError -> 2, RuntimeFailure -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: configuration, files, arguments.
class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

// Malformed text. `line` is 1-based; 0 when no single line is to blame.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : InputError(line == 0 ? what
                             : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Failures that happen while running: solver crashes, timeouts, and
// violated internal contracts (scheduler or solver bugs).
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

class ContractError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class SolverError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class SolverTimeout : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace mbsim
