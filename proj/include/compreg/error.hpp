#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace compreg {

enum class Errc {
  // configuration
  InvalidArgument,
  InvalidDimension,
  AlphaIsZero,
  // data
  AllZeroVector,
  NegativePart,
  ZeroPart,
  ZeroWithNonpositiveAlpha,
  AllZeroComponent,
  NoCompleteComponent,
  ReplacementExceedsUnity,
  DimensionMismatch,
  LabelMismatch,
  UnknownFactorLevel,
  TooFewRows,
  FoldTooSmall,
  ParseError,
  MissingColumn,
  EmptyData,
  // numeric
  OutOfRange,
  FittedZero,
  SingularCovariance,
  RankDeficientDesign,
  SingularScores,
  DegenerateVariance,
  OptimizerFailure,
};

inline constexpr std::string_view errc_name(Errc e) noexcept {
  switch (e) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidDimension: return "InvalidDimension";
    case Errc::AlphaIsZero: return "AlphaIsZero";
    case Errc::AllZeroVector: return "AllZeroVector";
    case Errc::NegativePart: return "NegativePart";
    case Errc::ZeroPart: return "ZeroPart";
    case Errc::ZeroWithNonpositiveAlpha: return "ZeroWithNonpositiveAlpha";
    case Errc::AllZeroComponent: return "AllZeroComponent";
    case Errc::NoCompleteComponent: return "NoCompleteComponent";
    case Errc::ReplacementExceedsUnity: return "ReplacementExceedsUnity";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::LabelMismatch: return "LabelMismatch";
    case Errc::UnknownFactorLevel: return "UnknownFactorLevel";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::FoldTooSmall: return "FoldTooSmall";
    case Errc::ParseError: return "ParseError";
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::EmptyData: return "EmptyData";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::FittedZero: return "FittedZero";
    case Errc::SingularCovariance: return "SingularCovariance";
    case Errc::RankDeficientDesign: return "RankDeficientDesign";
    case Errc::SingularScores: return "SingularScores";
    case Errc::DegenerateVariance: return "DegenerateVariance";
    case Errc::OptimizerFailure: return "OptimizerFailure";
  }
  return "Unknown";
}

/// Process exit status for an error: 2 config, 3 data, 4 numeric failure.
inline constexpr int exit_code(Errc e) noexcept {
  switch (e) {
    case Errc::InvalidArgument:
    case Errc::InvalidDimension:
    case Errc::AlphaIsZero:
      return 2;
    case Errc::OutOfRange:
    case Errc::FittedZero:
    case Errc::SingularCovariance:
    case Errc::RankDeficientDesign:
    case Errc::SingularScores:
    case Errc::DegenerateVariance:
    case Errc::OptimizerFailure:
      return 4;
    default:
      return 3;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace compreg
