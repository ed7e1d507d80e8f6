// SPDX-License-Identifier: Apache-2.0
//
// Block eigensolvers over operator access Y -> B Y, used for the node-local
// and consensus subproblems, plus checks for the inexact-solve conditions.
#pragma once

#include "daps/linalg.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace daps {

/// Probes <X, BY> == <BX, Y> on random n x p blocks.
bool is_symmetric_on_probes(const SymmetricOperator& b, Index p, std::uint64_t seed,
                            double rel_tol = 1e-8);

/// Power-iteration estimate of ||B||_2 for symmetric B.
double estimate_norm(const SymmetricOperator& b, int steps, std::uint64_t seed);

/// One step of simultaneous subspace iteration: orth(B X).
StiefelPoint ssi_step(const SymmetricOperator& b, const StiefelPoint& x);

/// S(X) = (I - X G^{-1} X^T / 2) (B X) G^{-1} with G = X^T X, given B X.
/// Throws SingularGram if G is not numerically positive definite.
Matrix slrpgn_direction(const Matrix& x, const Matrix& bx);

/// X + tau (sum_i S_i(X) - X / 2). No orthonormalization.
Matrix slrpgn_step(const SymmetricOperator& b, const Matrix& x, double tau);
Matrix slrpgn_step(std::span<const SymmetricOperator> blocks, const Matrix& x, double tau);

struct SlrpgnConfig {
  double tau = 0.0;  ///< step size; <= 0 means 1 / (power estimate of ||B||_2)
  int max_inner = 100;
  double eps_x = 1e-2;
  int tau_power_steps = 10;
  std::uint64_t seed = 0;  ///< start vector of the norm estimate
};

struct InnerResult {
  StiefelPoint x;
  int iterations = 0;
  bool budget_exhausted = false;
  double tau = 0.0;
};

/// Warm-started SLRPGN iterations on B, stopped once
/// | ||X_j||_F - ||X_{j-1}||_F | <= eps_x ||X_j||_F, returning orth(X_j).
/// When max_inner is hit the last iterate is returned with the flag set.
InnerResult inner_solve(const SymmetricOperator& b, const StiefelPoint& x0,
                        const SlrpgnConfig& cfg);

struct ConditionConstants {
  double c1 = 1e-3;
  double c1_prime = 1.0;
  double delta = 0.1;
  double c2 = 0.0;  ///< 0: only measure the realized constant
};

enum class Subproblem { kLocal, kGlobal };

struct ConditionCheck {
  bool holds = false;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct ConditionReport {
  std::optional<ConditionCheck> x1;  ///< sufficient reduction in h
  std::optional<ConditionCheck> x2;  ///< KKT residual ratio <= delta
  std::optional<ConditionCheck> z;   ///< sufficient decrease in q
  double realized_c2 = 0.0;          ///< (q_old - q_new) / ||(I-ZZ^T)QZ||^2

  bool all_hold() const;
};

/// Evaluates the inexactness conditions for a subproblem
/// min -1/2 tr(X^T B X). For kLocal, B is the unscaled H_i, `beta` its
/// penalty and `norm_a2` = ||A_i||_2^2; both X1 and X2 are reported.
/// For kGlobal, B is Q and only the Z condition is reported.
ConditionReport verify_conditions(const SymmetricOperator& b, const StiefelPoint& x_old,
                                  const StiefelPoint& x_new, double beta, double norm_a2,
                                  const ConditionConstants& cc, Subproblem which);

}  // namespace daps
