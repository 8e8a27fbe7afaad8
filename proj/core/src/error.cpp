#include "vsf/error.hpp"

namespace vsf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::EmptyTrajectory: return "EmptyTrajectory";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::MissingMapData: return "MissingMapData";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::StageMismatch: return "StageMismatch";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::HorizonMismatch: return "HorizonMismatch";
    case ErrorCode::EmptyRanking: return "EmptyRanking";
    case ErrorCode::NoVisiblePoints: return "NoVisiblePoints";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::UnparseableSelection: return "UnparseableSelection";
    case ErrorCode::UnrecognizedDirective: return "UnrecognizedDirective";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::MalformedRecords: return "MalformedRecords";
  }
  return "Unknown";
}

}  // namespace vsf
