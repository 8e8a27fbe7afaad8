#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vsf {

enum class ErrorCode {
  MalformedFile,
  InvariantViolation,
  EmptyTrajectory,
  InvalidParams,
  MissingMapData,
  InvalidWeights,
  StageMismatch,
  DegenerateDesign,
  DimensionMismatch,
  InvalidConfig,
  LengthMismatch,
  EmptyCandidates,
  NumericalFailure,
  HorizonMismatch,
  EmptyRanking,
  NoVisiblePoints,
  Transport,
  ProtocolError,
  UnparseableSelection,
  UnrecognizedDirective,
  BindFailure,
  MalformedRecords,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

  /// Transport failures map to a distinct CLI exit code.
  [[nodiscard]] bool is_transport() const noexcept { return code_ == ErrorCode::Transport; }

 private:
  ErrorCode code_;
};

}  // namespace vsf
