#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cvt {

enum class ErrorCode {
  ZeroNorm,
  GridMismatch,
  GridTooNarrow,
  ShiftOffGrid,
  InvalidGrid,
  InvalidArgument,
  SentinelNotMaterializable,
  OracleGridTooLarge,
  IdealChannelOutcomeUnbounded,
  EmptyScenarioList,
  ParseError,
  NonUniformSpacing,
  UnsupportedFormat,
  ZeroNormColumn,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::GridTooNarrow: return "GridTooNarrow";
    case ErrorCode::ShiftOffGrid: return "ShiftOffGrid";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SentinelNotMaterializable: return "SentinelNotMaterializable";
    case ErrorCode::OracleGridTooLarge: return "OracleGridTooLarge";
    case ErrorCode::IdealChannelOutcomeUnbounded: return "IdealChannelOutcomeUnbounded";
    case ErrorCode::EmptyScenarioList: return "EmptyScenarioList";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonUniformSpacing: return "NonUniformSpacing";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::ZeroNormColumn: return "ZeroNormColumn";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the sweep runner in particular) can record it per scenario.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cvt
