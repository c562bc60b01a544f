#pragma once

#include <stdexcept>
#include <string>

namespace sparseplan {

enum class ErrorCode {
  InvalidDimension,
  UnknownTemplate,
  EmptyInput,
  Domain,
  Shape,
  DegenerateLine,
  Io,
  Parse,
};

const char* to_string(ErrorCode code);

/// Library-wide exception. Every throw site tags the failure with a code so
/// callers (the CLI in particular) can map failures onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidDimension: return "invalid-dimension";
    case ErrorCode::UnknownTemplate: return "unknown-template";
    case ErrorCode::EmptyInput: return "empty-input";
    case ErrorCode::Domain: return "domain";
    case ErrorCode::Shape: return "shape";
    case ErrorCode::DegenerateLine: return "degenerate-line";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
  }
  return "unknown";
}

}  // namespace sparseplan
