#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace biharm {

enum class ErrorCode {
  InvalidGeometry,
  InvalidExponent,
  InvalidLambda,
  InvalidConfig,
  OutOfDomain,
  UndefinedForm,
  NotFound,
  DimensionTooLow,
  ResourceLimit,
  FactorizationFailure,
  InsufficientRange,
  PrerequisiteFailed,
  QuadratureOverflow,
  GeometryNotFound,
  NoConvergence,
  DegenerateToZero,
  InnerMaxDiverged,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidGeometry: return "InvalidGeometry";
    case ErrorCode::InvalidExponent: return "InvalidExponent";
    case ErrorCode::InvalidLambda: return "InvalidLambda";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::UndefinedForm: return "UndefinedForm";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::DimensionTooLow: return "DimensionTooLow";
    case ErrorCode::ResourceLimit: return "ResourceLimit";
    case ErrorCode::FactorizationFailure: return "FactorizationFailure";
    case ErrorCode::InsufficientRange: return "InsufficientRange";
    case ErrorCode::PrerequisiteFailed: return "PrerequisiteFailed";
    case ErrorCode::QuadratureOverflow: return "QuadratureOverflow";
    case ErrorCode::GeometryNotFound: return "GeometryNotFound";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateToZero: return "DegenerateToZero";
    case ErrorCode::InnerMaxDiverged: return "InnerMaxDiverged";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace biharm
