#pragma once

#include <stdexcept>
#include <string>

namespace distillrank {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed data with the wrong shape or non-finite values.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A configuration value is out of its allowed range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training could not proceed (no data, divergence).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Broken internal contract, e.g. a forward trace reused with other parameters.
class InternalError : public Error {
 public:
  using Error::Error;
};

/// Exposure matching did not converge.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace distillrank
