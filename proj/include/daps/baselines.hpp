// SPDX-License-Identifier: Apache-2.0
//
// Directly parallelized block eigensolvers over the same fabric as DAPS.
// Each node shares a full n x p product of its private operator per
// iteration: S_i(X) for SLRPGN, A_i A_i^T X for SSI.
#pragma once

#include "daps/data.hpp"
#include "daps/linalg.hpp"
#include "daps/netsim.hpp"
#include "daps/records.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace daps {

struct BaselineConfig {
  Index p = 1;
  double tau = 0.0;       ///< SLRPGN step; <= 0: 1 / ||A A^T||_2 by distributed power iteration
  int tau_power_steps = 10;
  int ortho_every = 10;   ///< SLRPGN re-orthonormalization period
  double rel_tol = 1e-10;
  int max_iter = 20000;
  std::uint64_t seed = 0;
  int max_snapshots = -1;  ///< trace length cap, -1 = unlimited
};

void validate(const BaselineConfig& cfg);

/// One iteration's publicly shared data: the iterate and every node's share.
struct BaselineSnapshot {
  int k = 0;
  Matrix x;
  std::vector<Matrix> shared;
};

struct BaselineTrace {
  std::string algorithm;  ///< "slrpgn" or "ssi"
  std::vector<BaselineSnapshot> snapshots;
};

/// Directory layout: index.json plus one raw-binary file per matrix.
void save_trace(const std::filesystem::path& dir, const BaselineTrace& trace);
BaselineTrace load_trace(const std::filesystem::path& dir);

struct BaselineResult {
  StiefelPoint x;
  std::vector<IterationRecord> records;
  int iterations = 0;
  bool budget_exhausted = false;
  double tau = 0.0;
  std::optional<BaselineTrace> trace;
};

/// X+ = X + tau (sum_i S_i(X) - X / 2) with sum_i S_i by one all-reduce,
/// orthonormalized every ortho_every steps and at the end. Throws
/// SingularGram if X loses rank.
BaselineResult run_parallel_slrpgn(std::vector<Matrix> blocks, const Matrix& x0,
                                   const BaselineConfig& cfg, Fabric& net, bool record_trace,
                                   const GroundTruth* truth = nullptr);

/// X+ = orth(sum_i A_i A_i^T X). Throws RankDeficient.
BaselineResult run_parallel_ssi(std::vector<Matrix> blocks, const StiefelPoint& x0,
                                const BaselineConfig& cfg, Fabric& net, bool record_trace = false,
                                const GroundTruth* truth = nullptr);

/// First record index whose scaled KKT is <= target (the record's k), or
/// the last k if none reaches it.
int iterations_to_reach(const std::vector<IterationRecord>& records, double scaled_kkt_target);

}  // namespace daps
