#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scsf {

enum class ErrorCode {
  UnreadableSource,
  NoParseableRows,
  AmbiguousSchema,
  IntervalInvalid,
  SpanTooShort,
  TauOutOfRange,
  AxisTooShort,
  DimensionMismatch,
  NonpositiveDenominator,
  RankTooLarge,
  Infeasible,
  MaxIterations,
  StepInvalid,
  TooFewClearDays,
  TooFewValues,
  NoSites,
  NothingAccepted,
  EmptyJoin,
  InvalidScenario,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace scsf
