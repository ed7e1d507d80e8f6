// SPDX-License-Identifier: Apache-2.0
//
// Per-iteration log rows shared by DAPS and the baselines.
#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace daps {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct IterationRecord {
  int k = 0;
  double objective = 0.0;  ///< sum_i f_i(Z) = -1/2 ||A^T Z||_F^2
  double scaled_kkt = 0.0;
  double kkt_raw = 0.0;
  double rel_error = kNaN;             ///< singular values vs ground truth, if known
  double augmented_lagrangian = kNaN;  ///< DAPS only
  std::uint64_t comm_bytes = 0;        ///< cumulative, all nodes
  double realized_c2 = kNaN;
  bool conditions_ok = true;
  bool z_restarted = false;
  std::vector<double> dist;  ///< d_i = dist(X_i, Z) per node
  std::vector<double> beta;
  std::vector<int> inner_iters;
};

}  // namespace daps
