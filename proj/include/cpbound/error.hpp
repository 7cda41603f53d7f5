#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cpbound {

enum class ErrorCode {
  InvalidArgument,
  InvalidDistribution,
  NonFiniteMoment,
  ModeMismatch,
  GNotMonotone,
  SigmaExceedsBound,
  Inapplicable,
  AllInapplicable,
  ZeroC0,
  NotNormalized,
  InvalidModel,
  BUnreachable,
  InfeasibleMu,
  WindowExceedsHorizon,
  SingularSystem,
  ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception type for every recoverable failure in the library. The code is
/// stable and is what the CLI maps onto exit statuses and JSON error records.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidDistribution: return "InvalidDistribution";
    case ErrorCode::NonFiniteMoment: return "NonFiniteMoment";
    case ErrorCode::ModeMismatch: return "ModeMismatch";
    case ErrorCode::GNotMonotone: return "GNotMonotone";
    case ErrorCode::SigmaExceedsBound: return "SigmaExceedsBound";
    case ErrorCode::Inapplicable: return "Inapplicable";
    case ErrorCode::AllInapplicable: return "AllInapplicable";
    case ErrorCode::ZeroC0: return "ZeroC0";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::BUnreachable: return "BUnreachable";
    case ErrorCode::InfeasibleMu: return "InfeasibleMu";
    case ErrorCode::WindowExceedsHorizon: return "WindowExceedsHorizon";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace cpbound
