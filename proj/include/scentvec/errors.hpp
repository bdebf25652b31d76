#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scentvec {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable or unwritable files. The CLI maps these to exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input; carries the 1-based line number. CLI exit code 2.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Structurally readable input with missing or invalid fields. CLI exit code 2.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation precondition. CLI exit code 2.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Data too degenerate or too small for the requested analysis. CLI exit code 1.
class AnalysisError : public Error {
 public:
  using Error::Error;
};

}  // namespace scentvec
