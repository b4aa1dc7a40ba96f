#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qnest {

enum class ErrorKind {
  ParamOutOfRange,
  PreconditionViolated,
  VerificationFailed,
  NotDiffeomorphic,
  Inconclusive,
  NoOrientationReversingPoint,
  ParabolicObstruction,
  NotNice,
  InvalidAddress,
  CentralReturnCascade,
  PrecisionFailure,
  OrbitEntersNest,
  MissingLevelData,
  InsufficientDepth,
  GammaOutOfRange,
  CoverViolation,
  HypothesisViolated,
  CriticalOrbitHitsZero,
  CombinatoricsUnstable,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::ParamOutOfRange: return "ParamOutOfRange";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::VerificationFailed: return "VerificationFailed";
    case ErrorKind::NotDiffeomorphic: return "NotDiffeomorphic";
    case ErrorKind::Inconclusive: return "Inconclusive";
    case ErrorKind::NoOrientationReversingPoint: return "NoOrientationReversingPoint";
    case ErrorKind::ParabolicObstruction: return "ParabolicObstruction";
    case ErrorKind::NotNice: return "NotNice";
    case ErrorKind::InvalidAddress: return "InvalidAddress";
    case ErrorKind::CentralReturnCascade: return "CentralReturnCascade";
    case ErrorKind::PrecisionFailure: return "PrecisionFailure";
    case ErrorKind::OrbitEntersNest: return "OrbitEntersNest";
    case ErrorKind::MissingLevelData: return "MissingLevelData";
    case ErrorKind::InsufficientDepth: return "InsufficientDepth";
    case ErrorKind::GammaOutOfRange: return "GammaOutOfRange";
    case ErrorKind::CoverViolation: return "CoverViolation";
    case ErrorKind::HypothesisViolated: return "HypothesisViolated";
    case ErrorKind::CriticalOrbitHitsZero: return "CriticalOrbitHitsZero";
    case ErrorKind::CombinatoricsUnstable: return "CombinatoricsUnstable";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

// Every failure raised by the library. `index` carries the time or position
// an error refers to (first entry time, hit time, failing level), if any.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::optional<long> index = std::nullopt)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), index_(index) {}

  ErrorKind kind() const { return kind_; }
  std::optional<long> index() const { return index_; }

 private:
  ErrorKind kind_;
  std::optional<long> index_;
};

}  // namespace qnest
