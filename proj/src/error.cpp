// SPDX-License-Identifier: Apache-2.0
#include "daps/error.hpp"

namespace daps {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kInvalidPartition: return "InvalidPartition";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDimensionHeaderMismatch: return "DimensionHeaderMismatch";
    case ErrorCode::kSingularGram: return "SingularGram";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDeltaOutOfRange: return "DeltaOutOfRange";
    case ErrorCode::kSingularLeftFactor: return "SingularLeftFactor";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kAborted: return "Aborted";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace daps
