// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace daps {

enum class ErrorCode {
  kRankDeficient,
  kDimensionMismatch,
  kInvalidSpec,
  kInvalidPartition,
  kParseError,
  kDimensionHeaderMismatch,
  kSingularGram,
  kInvalidConfig,
  kShapeMismatch,
  kDeltaOutOfRange,
  kSingularLeftFactor,
  kNonFinite,
  kAborted,
  kIoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace daps
