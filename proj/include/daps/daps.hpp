// SPDX-License-Identifier: Apache-2.0
//
// Distributed ADMM with projection splitting for the dominant left singular
// subspace of A = [A_1, ..., A_d], where node i privately holds A_i.
//
// Each outer iteration: every node refines X_i against
//   H_i = A_i A_i^T + Lambda_i + beta_i Z Z^T,  Lambda_i = X_i W_i^T + W_i X_i^T,
// recomputes its low-rank multiplier factor W_i = -(I - X_i X_i^T) A_i A_i^T X_i,
// and the nodes then agree on Z through one all-reduce of
//   Q_i Z = beta_i X_i (X_i^T Z) - X_i (W_i^T Z) - W_i (X_i^T Z).
// No n x n matrix is ever formed.
#pragma once

#include "daps/audit.hpp"
#include "daps/data.hpp"
#include "daps/eigensolvers.hpp"
#include "daps/linalg.hpp"
#include "daps/netsim.hpp"
#include "daps/records.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace daps {

enum class ZSolver { kSlrpgn, kSsi };
std::string_view to_string(ZSolver s) noexcept;
ZSolver z_solver_from_string(std::string_view s);

/// Where d_i is measured for the penalty update.
enum class BetaMeasurePoint {
  kAfterGlobalStep,  ///< dist(X_i^{k+1}, Z^{k+1})
  kBeforeGlobalStep  ///< dist(X_i^{k+1}, Z^k)
};
std::string_view to_string(BetaMeasurePoint m) noexcept;
BetaMeasurePoint beta_measure_point_from_string(std::string_view s);

struct DapsConfig {
  Index p = 1;
  double beta0_coeff = 0.15;  ///< beta_i^0 = beta0_coeff * ||A_i||_2^2
  double theta = 0.1;         ///< penalty growth factor
  double mu = 0.01;           ///< stall threshold
  double eps_x = 1e-2;        ///< inner stopping tolerance
  double rel_tol = 1e-10;     ///< outer stopping tolerance
  int max_iter = 20000;
  int max_inner = 100;
  int norm_power_steps = 20;  ///< power steps for ||A_i||_2
  double tau_inner = 0.0;     ///< <= 0: 1 / ||H_i / beta_i||_2 estimate
  double tau_z = 1.0;
  ZSolver z_solver = ZSolver::kSlrpgn;
  ConditionConstants condition_constants;
  BetaMeasurePoint beta_measure_point = BetaMeasurePoint::kAfterGlobalStep;
  bool theory_mode = false;      ///< freeze beta_i at the theory floor
  bool verify_conditions = false;
  bool strict_conditions = false;  ///< retry local solves that miss X1/X2
  std::uint64_t seed = 0;
};

/// Throws InvalidConfig unless every knob is in range.
void validate(const DapsConfig& cfg);

struct NodeState {
  int node_id = 0;
  Matrix a;  ///< private block A_i (n x m_i)
  StiefelPoint x;
  Matrix w;
  double beta = 0.0;
  double dist = 0.0;  ///< last projection distance to Z
  double norm_a2 = 0.0;  ///< ||A_i||_2^2 estimate
  std::vector<double> dist_history;  ///< d_i^{(k)}, index k
};

struct LocalStepReport {
  int inner_iterations = 0;
  bool budget_exhausted = false;
  int retries = 0;
  std::optional<ConditionReport> conditions;
};

/// Random n x p start, identical for equal seeds.
StiefelPoint initial_subspace(Index n, Index p, std::uint64_t seed);

/// ||A_i||_2^2 by power iteration on A_i A_i^T.
double block_norm2(const Matrix& a, int steps, std::uint64_t seed);

/// W = -(I - X X^T) A A^T X.
Matrix update_multiplier(const Matrix& a, const StiefelPoint& x);

/// Densified Lambda = X W^T + W X^T (small problems and tests only).
Matrix dense_multiplier(const StiefelPoint& x, const Matrix& w);

/// H_i Y.
Matrix apply_h(const NodeState& node, const StiefelPoint& z, const Matrix& y);

/// Q_i Y.
Matrix apply_q_local(const NodeState& node, const Matrix& y);

/// Builds node i with X_i = Z0, W_i from Z0 and the given penalty.
NodeState make_node(int node_id, Matrix a, const StiefelPoint& z0, double beta);

/// Serial initialization: Z0 from cfg.seed, X_i = Z0, beta_i^0 =
/// beta0_coeff ||A_i||_2^2 (or the theory floor in theory mode).
/// Throws InvalidConfig if p >= m_i or p > n.
struct DapsInit {
  std::vector<NodeState> nodes;
  StiefelPoint z;
};
DapsInit initialize(std::vector<Matrix> blocks, const DapsConfig& cfg);

/// Refines X_i by warm-started SLRPGN on H_i / beta_i, then refreshes W_i.
LocalStepReport local_step(NodeState& node, const StiefelPoint& z, const DapsConfig& cfg, int k);

struct GlobalStepResult {
  StiefelPoint z;
  bool restarted = false;  ///< orthonormalization failed and a perturbed start was used
};

/// Node-side consensus update: all-reduces Q_i Z, scales by q_scale
/// (= 1 / sum_i beta_i^0) and takes one z_solver step.
GlobalStepResult global_step(const NodeState& node, const StiefelPoint& z,
                             const DapsConfig& cfg, Fabric& net, double q_scale, int k);

/// Convenience form running every node's share on its own worker.
StiefelPoint global_step(std::span<const NodeState> nodes, const StiefelPoint& z,
                         const DapsConfig& cfg, Fabric& net, double q_scale);

/// Penalty update at outer iteration k (k >= 1) given d_i^{(0..k)}.
double adapt_beta(double beta, int k, std::span<const double> dist_history,
                  const DapsConfig& cfg);

struct TerminationDecision {
  bool stop = false;
  bool budget_exhausted = false;
};

/// prev/curr are sum_i ||A_i^T Z||_F^2 at iterations k - 1 and k.
TerminationDecision check_termination(double prev, double curr, double rel_tol, int k,
                                      int max_iter);

double augmented_lagrangian(std::span<const NodeState> nodes, const StiefelPoint& z);

struct KktCertificate {
  Matrix theta;                       ///< p x p, zero for the closed-form multipliers
  std::vector<Matrix> gamma;          ///< -X_i^T A_i A_i^T X_i
  double lambda_residual = 0.0;       ///< ||sum_i Lambda_i Z - Z Theta||_F
  std::vector<double> local_residuals;
  std::vector<double> feasibility;    ///< dist(X_i, Z)
};

KktCertificate kkt_certificate(std::span<const NodeState> nodes, const StiefelPoint& z);

struct SvdRecovery {
  Vector sigma;  ///< p values, nonincreasing
  StiefelPoint u;
  std::optional<double> rel_error;
  bool clipped = false;  ///< a negative Ritz value was clipped to 0
};

/// Ritz values sqrt(eig(G)) of G = sum_i (A_i^T Z)^T (A_i^T Z).
SvdRecovery ritz_from_gram(const Matrix& gram, const StiefelPoint& z, const GroundTruth* truth);

/// Distributed form: G is formed with one p x p all-reduce.
SvdRecovery recover_svd(std::span<const Matrix> blocks, const StiefelPoint& z, Fabric& net,
                        const GroundTruth* truth = nullptr);

/// ||sigma - sigma*_p|| / ||sigma*_p||.
double singular_value_error(const Vector& sigma, const GroundTruth& truth);

struct RunOptions {
  const GroundTruth* truth = nullptr;
  bool audit = false;  ///< scan every wire payload against private data
  bool evaluate_lagrangian = true;
  std::function<void(const IterationRecord&)> on_record;
};

struct DapsResult {
  StiefelPoint z;
  std::vector<IterationRecord> records;
  std::vector<NodeState> nodes;
  int iterations = 0;
  bool budget_exhausted = false;
  double norm_a_fro2 = 0.0;
  std::vector<double> initial_betas;
  std::optional<WireAudit> audit;
};

/// Full distributed run, one worker per node over `net`. Records 0..K are
/// logged, record 0 being the initial point. Diagnostics in the records are
/// computed off the wire at a barrier and do not touch the byte counts.
DapsResult run_daps(std::vector<Matrix> blocks, const DapsConfig& cfg, Fabric& net,
                    const RunOptions& options = {});

}  // namespace daps
