#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace valse {

enum class ErrorCode {
  kShapeMismatch,
  kFullyMaskedRow,
  kZeroMatrix,
  kNoConvergence,
  kRankDeficient,
  kNonFiniteEvaluation,
  kInvalidConfig,
  kSequenceTooLong,
  kPositionOutOfRange,
  kLayerOutOfRange,
  kDivergedLoss,
  kEmptyResponse,
  kGridMismatch,
  kTokenNotFound,
  kNoVisionAwareSamples,
  kDegenerateDifference,
  kLayerCountMismatch,
  kInvalidRate,
  kUnknownObjectInGroundTruth,
  kFormatError,
  kDimError,
  kIoError,
  kBindError,
  kCheckpointError,
  kInvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kFullyMaskedRow: return "FullyMaskedRow";
    case ErrorCode::kZeroMatrix: return "ZeroMatrix";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kNonFiniteEvaluation: return "NonFiniteEvaluation";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kSequenceTooLong: return "SequenceTooLong";
    case ErrorCode::kPositionOutOfRange: return "PositionOutOfRange";
    case ErrorCode::kLayerOutOfRange: return "LayerOutOfRange";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kEmptyResponse: return "EmptyResponse";
    case ErrorCode::kGridMismatch: return "GridMismatch";
    case ErrorCode::kTokenNotFound: return "TokenNotFound";
    case ErrorCode::kNoVisionAwareSamples: return "NoVisionAwareSamples";
    case ErrorCode::kDegenerateDifference: return "DegenerateDifference";
    case ErrorCode::kLayerCountMismatch: return "LayerCountMismatch";
    case ErrorCode::kInvalidRate: return "InvalidRate";
    case ErrorCode::kUnknownObjectInGroundTruth: return "UnknownObjectInGroundTruth";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kDimError: return "DimError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kBindError: return "BindError";
    case ErrorCode::kCheckpointError: return "CheckpointError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace valse
