// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "daps/linalg.hpp"

#include <cstdint>
#include <random>

namespace daps {

/// Seedable generator with a platform-independent bit stream: mt19937_64 is
/// fully specified by the standard, and the uniform mapping below is done by
/// hand instead of through std::uniform_real_distribution (whose output is
/// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) from the top 53 bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [-1, 1).
  double uniform_pm1() { return 2.0 * uniform01() - 1.0; }

  /// rows x cols matrix of uniform[-1, 1) entries, filled column by column.
  Matrix uniform_matrix(Index rows, Index cols);

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a base seed and a salt.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace daps
