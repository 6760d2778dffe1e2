#pragma once

#include <stdexcept>
#include <string>

namespace routescan {

/// Base class for every error raised by the auditing pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent MoE topology (K > E, expert index out of range, ...).
class TopologyError : public Error {
 public:
  using Error::Error;
};

/// Malformed numeric input (negative loads, non-finite logits).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Features or records that do not belong to the same deployment profile.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Violation of an evaluation protocol: missing classes, leakage, bad folds.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

/// JSONL / config parse failure. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace routescan
