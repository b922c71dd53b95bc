#pragma once

#include <stdexcept>
#include <string>

namespace kpose {

enum class ErrorKind {
  NonPositiveDepth,
  ParseError,
  DegenerateInput,
  InvalidK,
  InsufficientPoints,
  ShapeMismatch,
  DegenerateConfiguration,
  NotConverged,
  NoConsensus,
  StepOutOfRange,
  InvalidArgument,
  IoError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::InvalidK: return "InvalidK";
    case ErrorKind::InsufficientPoints: return "InsufficientPoints";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::NoConsensus: return "NoConsensus";
    case ErrorKind::StepOutOfRange: return "StepOutOfRange";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace kpose
