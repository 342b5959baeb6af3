#pragma once

#include <stdexcept>
#include <string>

namespace switchsolve {

enum class ErrorCode {
  TriangleViolation,
  NonpositiveCost,
  DegenerateVolatility,
  NonpositiveDiscount,
  InvalidDomain,
  InvalidCoefficient,
  DomainTooSmall,
  MaxItersExceeded,
  SingularSystem,
  InfeasibleTimestep,
  BoundaryAtEdge,
  InvalidHorizon,
  InvalidPaths,
  InvalidArgument,
  ConfigError,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::TriangleViolation: return "TriangleViolation";
    case ErrorCode::NonpositiveCost: return "NonpositiveCost";
    case ErrorCode::DegenerateVolatility: return "DegenerateVolatility";
    case ErrorCode::NonpositiveDiscount: return "NonpositiveDiscount";
    case ErrorCode::InvalidDomain: return "InvalidDomain";
    case ErrorCode::InvalidCoefficient: return "InvalidCoefficient";
    case ErrorCode::DomainTooSmall: return "DomainTooSmall";
    case ErrorCode::MaxItersExceeded: return "MaxItersExceeded";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::InfeasibleTimestep: return "InfeasibleTimestep";
    case ErrorCode::BoundaryAtEdge: return "BoundaryAtEdge";
    case ErrorCode::InvalidHorizon: return "InvalidHorizon";
    case ErrorCode::InvalidPaths: return "InvalidPaths";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Base exception for every failure raised by the library. The code is
/// stable and is what the command-line tool maps onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace switchsolve
