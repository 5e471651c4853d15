#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rmtu {

enum class ErrorKind {
  SingularMatrix,
  NotPositiveDefinite,
  DomainError,
  ShapeMismatch,
  DofTooSmall,
  DispersionTooLarge,
  NormBoundViolated,
  SingularDraw,
  Unsupported,
  JointLimit,
  NearSingularTrajectory,
  InsufficientRuns,
  InsufficientSamples,
  WeightCollapse,
  ConfigError,
};

constexpr std::string_view error_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DofTooSmall: return "DofTooSmall";
    case ErrorKind::DispersionTooLarge: return "DispersionTooLarge";
    case ErrorKind::NormBoundViolated: return "NormBoundViolated";
    case ErrorKind::SingularDraw: return "SingularDraw";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::JointLimit: return "JointLimit";
    case ErrorKind::NearSingularTrajectory: return "NearSingularTrajectory";
    case ErrorKind::InsufficientRuns: return "InsufficientRuns";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::WeightCollapse: return "WeightCollapse";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a kind so callers (and the
/// CLI exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_name(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return error_name(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace rmtu
