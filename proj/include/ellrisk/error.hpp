#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ellrisk {

enum class ErrorCode {
  NotSymmetric,
  NotPositiveDefinite,
  DimensionMismatch,
  IndexOutOfRange,
  OverlappingSets,
  EmptySet,
  InvalidQuantile,
  NonPositiveScale,
  InvalidParameters,
  DegenerateTopEigenvalue,
  InternalConsistency,
  NonPositivePrice,
  RankDeficient,
  InvalidNu,
  KurtosisTooLow,
  UnmappedTicker,
  ParseError,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::OverlappingSets: return "OverlappingSets";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::InvalidQuantile: return "InvalidQuantile";
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::InvalidParameters: return "InvalidParameters";
    case ErrorCode::DegenerateTopEigenvalue: return "DegenerateTopEigenvalue";
    case ErrorCode::InternalConsistency: return "InternalConsistency";
    case ErrorCode::NonPositivePrice: return "NonPositivePrice";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::InvalidNu: return "InvalidNu";
    case ErrorCode::KurtosisTooLow: return "KurtosisTooLow";
    case ErrorCode::UnmappedTicker: return "UnmappedTicker";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Numerical failures (as opposed to bad input) map to a distinct CLI exit code.
inline bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::NotSymmetric:
    case ErrorCode::DegenerateTopEigenvalue:
    case ErrorCode::InternalConsistency:
    case ErrorCode::RankDeficient:
    case ErrorCode::KurtosisTooLow:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Thrown by validate_spd; carries the first pivot that failed.
class NotPositiveDefiniteError : public Error {
 public:
  NotPositiveDefiniteError(long pivot, const std::string& message)
      : Error(ErrorCode::NotPositiveDefinite, message), pivot_(pivot) {}

  long pivot() const noexcept { return pivot_; }

 private:
  long pivot_;
};

}  // namespace ellrisk
