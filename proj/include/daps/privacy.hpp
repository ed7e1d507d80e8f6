// SPDX-License-Identifier: Apache-2.0
//
// Linear reconstruction attacks on what an outsider sees on the wire.
//
// Against SLRPGN, each snapshot (X, S_i(X)) yields n p linear equations
// A_i A_i^T X = (I + X G^{-1} X^T) S_i(X) G in the n(n+1)/2 entries of the
// symmetric unknown, since (I - X G^{-1} X^T / 2)^{-1} = I + X G^{-1} X^T.
// Against DAPS the best linear strategy recovers at most the per-iteration
// operator Q_i, whose rank is at most 3p, which does not determine A_i A_i^T.
#pragma once

#include "daps/baselines.hpp"
#include "daps/linalg.hpp"
#include "daps/netsim.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace daps {

struct AttackReport {
  int target_node = 0;
  Index n = 0;
  Index p = 0;
  std::size_t snapshots_used = 0;
  std::size_t snapshots_skipped = 0;  ///< singular left factor
  std::size_t equations_collected = 0;
  std::size_t unknown_dof = 0;  ///< n (n + 1) / 2
  std::size_t system_rank = 0;
  std::optional<Matrix> recovered;  ///< minimum-norm least-squares solution
  std::optional<double> relative_error;  ///< vs the true A_i A_i^T when supplied
  double residual = 0.0;
  /// True when the system pins down A_i A_i^T uniquely.
  bool identifiable = false;
  /// DAPS attack: largest rank among the per-iteration operator fits, and
  /// whether 3p >= n makes the rank argument inconclusive.
  std::optional<Index> recovered_rank;
  bool rank_argument_inconclusive = false;
  std::vector<std::string> notes;
};

/// Symmetric least squares for M from pairs M Y_k = R_k. Fills the
/// equation/rank/residual fields and `recovered`.
void solve_symmetric_system(const std::vector<Matrix>& probes, const std::vector<Matrix>& responses,
                            AttackReport& report);

/// Reconstruction of A_i A_i^T from SLRPGN snapshots. `truth` (optional) is
/// the true A_i A_i^T for error reporting.
AttackReport attack_slrpgn_trace(const BaselineTrace& trace, int target_node,
                                 const Matrix* truth = nullptr, int max_snapshots = -1);

/// A probe/response pair (Y, Q_i Y) seen by an outsider.
struct ProbePair {
  std::uint64_t collective = 0;
  Matrix probe;
  Matrix response;
};

/// Pairs the public Z preceding each "Q" all-reduce with node `target`'s
/// contribution as recoverable from payloads, using the public schedule: a
/// payload summing the target alone, or the difference of two payloads whose
/// node groups differ by the target.
std::vector<ProbePair> extract_daps_pairs(const std::vector<MessageRecord>& trace, int target,
                                          int nodes, Schedule schedule);

/// Fits each observed pair on its own (per-iteration operator) and all pairs
/// pooled as one symmetric unknown; `recovered` is the pooled fit. A_i A_i^T is reported unidentifiable whenever 3p < n; when 3p >= n the
/// rank argument is flagged inconclusive.
AttackReport attack_daps_trace(const std::vector<ProbePair>& pairs, int target_node,
                               const Matrix* truth = nullptr);

nlohmann::json to_json(const AttackReport& report, bool include_matrix = false);

}  // namespace daps
