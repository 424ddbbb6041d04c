#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mf {

enum class ErrorCode {
  InvalidArgument,
  NonPositiveDepth,
  NearSingularRotation,
  DegenerateConfiguration,
  BadDimensions,
  FormatError,
  ShapeMismatch,
  EmptyPrior,
  TooFewViews,
  NonPositiveInput,
  ResolutionMismatch,
  InsufficientDepth,
  Diverged,
  NoValidPixels,
  EmptySequence,
  TooFewMatches,
  EmptyInput,
  DatasetError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::NearSingularRotation: return "NearSingularRotation";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::BadDimensions: return "BadDimensions";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyPrior: return "EmptyPrior";
    case ErrorCode::TooFewViews: return "TooFewViews";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::InsufficientDepth: return "InsufficientDepth";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::NoValidPixels: return "NoValidPixels";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::TooFewMatches: return "TooFewMatches";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DatasetError: return "DatasetError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; the code identifies the failure kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace mf
