#include "scsf/error.hpp"

namespace scsf {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnreadableSource: return "UnreadableSource";
    case ErrorCode::NoParseableRows: return "NoParseableRows";
    case ErrorCode::AmbiguousSchema: return "AmbiguousSchema";
    case ErrorCode::IntervalInvalid: return "IntervalInvalid";
    case ErrorCode::SpanTooShort: return "SpanTooShort";
    case ErrorCode::TauOutOfRange: return "TauOutOfRange";
    case ErrorCode::AxisTooShort: return "AxisTooShort";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonpositiveDenominator: return "NonpositiveDenominator";
    case ErrorCode::RankTooLarge: return "RankTooLarge";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::StepInvalid: return "StepInvalid";
    case ErrorCode::TooFewClearDays: return "TooFewClearDays";
    case ErrorCode::TooFewValues: return "TooFewValues";
    case ErrorCode::NoSites: return "NoSites";
    case ErrorCode::NothingAccepted: return "NothingAccepted";
    case ErrorCode::EmptyJoin: return "EmptyJoin";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace scsf
