#pragma once

#include <stdexcept>
#include <string>

namespace rmf {

enum class ErrorCode {
  InvalidArgument,
  CutLocus,
  ScheduleSingularity,
  NonFinite,
  IoError,
  FormatError,
  ConfigMismatch,
  ConfigError,
  UnconditionalNet,
  InvalidSpec,
  ParseError,
  InvariantViolation,
};

const char* to_string(ErrorCode code);

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Error tied to a line of an input file (CSV rows, config files).
class LineError : public Error {
 public:
  LineError(ErrorCode code, long line, const std::string& what)
      : Error(code, "line " + std::to_string(line) + ": " + what), line_(line) {}

  long line() const noexcept { return line_; }

 private:
  long line_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::CutLocus: return "CutLocus";
    case ErrorCode::ScheduleSingularity: return "ScheduleSingularity";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::UnconditionalNet: return "UnconditionalNet";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

}  // namespace rmf
