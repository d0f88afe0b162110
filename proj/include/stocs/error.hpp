#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stocs {

enum class ErrorCode {
  DegenerateCorrespondences,
  TooFewPoints,
  MissingNormals,
  CoincidentPoints,
  BinOverflow,
  SegmentTooSmall,
  AllZeroWeights,
  NoValidBase,
  DegenerateBase,
  NoHypothesisFound,
  InvalidSpec,
  InvalidConfig,
  ParseError,
  CountMismatch,
  NonFiniteValue,
  FormatError,
  IoError,
  InvalidInput,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateCorrespondences: return "DegenerateCorrespondences";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::MissingNormals: return "MissingNormals";
    case ErrorCode::CoincidentPoints: return "CoincidentPoints";
    case ErrorCode::BinOverflow: return "BinOverflow";
    case ErrorCode::SegmentTooSmall: return "SegmentTooSmall";
    case ErrorCode::AllZeroWeights: return "AllZeroWeights";
    case ErrorCode::NoValidBase: return "NoValidBase";
    case ErrorCode::DegenerateBase: return "DegenerateBase";
    case ErrorCode::NoHypothesisFound: return "NoHypothesisFound";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

/// Every failure raised by the library. The code identifies the failure
/// class; the message carries context (file, line, offending value).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stocs
