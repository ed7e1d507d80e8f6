// SPDX-License-Identifier: Apache-2.0
//
// Constants of the convergence theory (penalty floors) and monitors for the
// observable invariants on recorded runs: augmented-Lagrangian descent, the
// distance bound d_i^2 <= 1 / (rho d), and the min_{k<N} v_k * N envelope.
#pragma once

#include "daps/eigensolvers.hpp"
#include "daps/records.hpp"

#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace daps {

struct AssumptionConstants {
  double rho = 1.0;          ///< max_{i,j} beta_i / beta_j
  double sigma_lower = 0.0;  ///< sqrt(1 - 1 / (2 rho d))
  double delta_bound = 0.0;  ///< sigma_lower / (2 sqrt(rho d))
  std::vector<double> omega;
  std::vector<double> beta_floor;  ///< omega_i ||A||_F^2
};

/// Evaluates the penalty constants for d = betas.size() nodes. `deltas` holds
/// the per-node X2 ratio delta_i (empty: cc.delta everywhere). Throws
/// DeltaOutOfRange when some delta_i >= delta_bound and InvalidConfig on
/// nonpositive betas.
AssumptionConstants assumption_constants(std::span<const double> betas, Index p,
                                         double norm_a_fro2, const ConditionConstants& cc,
                                         std::span<const double> deltas = {});

/// Equal penalties at the floor: beta_i = omega ||A||_F^2 with rho = 1.
std::vector<double> theory_betas(int d, Index p, double norm_a_fro2,
                                 const ConditionConstants& cc);

struct Violation {
  int k = 0;
  int node = -1;  ///< -1 when not node-specific
  double value = 0.0;
  double limit = 0.0;
};

struct DescentReport {
  bool enabled = true;
  std::string note;
  double slack = 0.0;
  std::vector<Violation> violations;
};

/// Checks L^{k+1} <= L^k + 1e-10 (1 + |L^0|). Disabled (with a note) when the
/// penalties change during the run.
DescentReport descent_monitor(std::span<const IterationRecord> records);

struct DistanceReport {
  double bound = 0.0;  ///< 1 / (rho d) + slack
  bool assumption_satisfied = true;
  std::string note;
  std::vector<Violation> violations;
};

/// Checks d_i^2 <= 1 / (rho d) + 1e-10 at every record. `assumption_satisfied`
/// is false when the penalties in the log sit below `beta_floor`.
DistanceReport distance_bound_check(std::span<const IterationRecord> records,
                                    std::span<const double> beta_floor = {});

struct ComplexityMonitor {
  std::vector<double> v;            ///< v_k = ||(I-ZZ^T)AA^TZ||^2 + (1/d) sum d_i^2
  std::vector<double> running_min;  ///< min_{k < N} v_k, index N - 1
  std::vector<double> envelope;     ///< running_min[N-1] * N
  double envelope_sup = 0.0;
  /// envelope[N-1] <= envelope[0] for every N (bounded by its N = 1 value).
  bool bounded_by_first = true;
  int first_exceeding_n = 0;  ///< 0 if none
};

ComplexityMonitor complexity_envelope(std::span<const IterationRecord> records);

struct TheoryReport {
  AssumptionConstants constants;
  DescentReport descent;
  DistanceReport distance;
  ComplexityMonitor complexity;
};

TheoryReport theory_report(std::span<const IterationRecord> records,
                           const AssumptionConstants& constants);

nlohmann::json to_json(const TheoryReport& report);

}  // namespace daps
