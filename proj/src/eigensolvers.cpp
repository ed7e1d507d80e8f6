// SPDX-License-Identifier: Apache-2.0
#include "daps/eigensolvers.hpp"

#include "daps/error.hpp"
#include "daps/rng.hpp"

#include <cmath>

namespace daps {

bool is_symmetric_on_probes(const SymmetricOperator& b, Index p, std::uint64_t seed,
                            double rel_tol) {
  Rng rng(seed);
  const Matrix x = rng.uniform_matrix(b.dim, p);
  const Matrix y = rng.uniform_matrix(b.dim, p);
  const Matrix bx = b(x);
  const Matrix by = b(y);
  const double lhs = (x.transpose() * by).trace();
  const double rhs = (bx.transpose() * y).trace();
  const double scale = std::max({bx.norm() * y.norm(), by.norm() * x.norm(), 1e-300});
  return std::abs(lhs - rhs) <= rel_tol * scale;
}

double estimate_norm(const SymmetricOperator& b, int steps, std::uint64_t seed) {
  Rng rng(seed);
  Matrix v = rng.uniform_matrix(b.dim, 1);
  v /= v.norm();
  double lambda = 0.0;
  for (int i = 0; i < steps; ++i) {
    Matrix w = b(v);
    lambda = w.norm();
    if (lambda == 0.0) return 0.0;
    v = w / lambda;
  }
  return lambda;
}

StiefelPoint ssi_step(const SymmetricOperator& b, const StiefelPoint& x) {
  if (b.dim != x.n()) throw Error(ErrorCode::kDimensionMismatch, "ssi_step operator size");
  return orthonormalize(b(x.basis()));
}

Matrix slrpgn_direction(const Matrix& x, const Matrix& bx) {
  if (x.rows() != bx.rows() || x.cols() != bx.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "slrpgn_direction shapes");
  }
  const Matrix gram = x.transpose() * x;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kSingularGram, "X^T X is not positive definite");
  }
  const Vector diag = llt.matrixL().toDenseMatrix().diagonal();
  if (diag.minCoeff() <= 1e-10 * std::max(1.0, diag.maxCoeff())) {
    throw Error(ErrorCode::kSingularGram, "X^T X is numerically singular");
  }
  // (B X) G^{-1}, using symmetry of G
  const Matrix bxg = llt.solve(bx.transpose()).transpose();
  // X G^{-1} X^T (B X G^{-1}) / 2
  const Matrix correction = x * llt.solve(x.transpose() * bxg);
  return bxg - 0.5 * correction;
}

Matrix slrpgn_step(const SymmetricOperator& b, const Matrix& x, double tau) {
  if (b.dim != x.rows()) throw Error(ErrorCode::kDimensionMismatch, "slrpgn_step operator size");
  return x + tau * (slrpgn_direction(x, b(x)) - 0.5 * x);
}

Matrix slrpgn_step(std::span<const SymmetricOperator> blocks, const Matrix& x, double tau) {
  if (blocks.empty()) throw Error(ErrorCode::kDimensionMismatch, "no operator blocks");
  // S_i is linear in B_i, so sum_i S_i(X) = S(sum_i B_i X).
  Matrix bx = Matrix::Zero(x.rows(), x.cols());
  for (const auto& b : blocks) {
    if (b.dim != x.rows()) throw Error(ErrorCode::kDimensionMismatch, "slrpgn_step block size");
    bx += b(x);
  }
  return x + tau * (slrpgn_direction(x, bx) - 0.5 * x);
}

InnerResult inner_solve(const SymmetricOperator& b, const StiefelPoint& x0,
                        const SlrpgnConfig& cfg) {
  if (b.dim != x0.n()) throw Error(ErrorCode::kDimensionMismatch, "inner_solve operator size");
  if (cfg.max_inner <= 0 || cfg.eps_x < 0.0) {
    throw Error(ErrorCode::kInvalidConfig, "inner_solve needs max_inner > 0 and eps_x >= 0");
  }
  double tau = cfg.tau;
  if (tau <= 0.0) {
    const double norm = estimate_norm(b, cfg.tau_power_steps, cfg.seed);
    tau = norm > 0.0 ? 1.0 / norm : 1.0;
  }
  Matrix x = x0.basis();
  double prev_norm = x.norm();
  InnerResult out{x0, 0, true, tau};
  for (int j = 1; j <= cfg.max_inner; ++j) {
    x = slrpgn_step(b, x, tau);
    out.iterations = j;
    const double norm = x.norm();
    if (std::abs(norm - prev_norm) <= cfg.eps_x * norm) {
      out.budget_exhausted = false;
      break;
    }
    prev_norm = norm;
  }
  out.x = orthonormalize(x);
  return out;
}

bool ConditionReport::all_hold() const {
  return (!x1 || x1->holds) && (!x2 || x2->holds) && (!z || z->holds);
}

ConditionReport verify_conditions(const SymmetricOperator& b, const StiefelPoint& x_old,
                                  const StiefelPoint& x_new, double beta, double norm_a2,
                                  const ConditionConstants& cc, Subproblem which) {
  if (x_old.n() != b.dim || x_new.n() != b.dim || x_old.p() != x_new.p()) {
    throw Error(ErrorCode::kDimensionMismatch, "verify_conditions shapes");
  }
  const Matrix b_old = b(x_old.basis());
  const Matrix b_new = b(x_new.basis());
  const double f_old = -0.5 * (x_old.basis().transpose() * b_old).trace();
  const double f_new = -0.5 * (x_new.basis().transpose() * b_new).trace();
  const double r_old = project_out(x_old.basis(), b_old).norm();
  const double decrease = f_old - f_new;

  ConditionReport report;
  report.realized_c2 = r_old > 0.0 ? decrease / (r_old * r_old) : 0.0;
  if (which == Subproblem::kLocal) {
    const double r_new = project_out(x_new.basis(), b_new).norm();
    const double rhs1 = cc.c1 / (cc.c1_prime * norm_a2 + beta) * r_old * r_old;
    // Roundoff slack scaled to the magnitude of h.
    const double slack = 1e-13 * (std::abs(f_old) + std::abs(f_new));
    report.x1 = ConditionCheck{decrease + slack >= rhs1, decrease, rhs1};
    const double rhs2 = cc.delta * r_old;
    report.x2 = ConditionCheck{r_new <= rhs2 || r_new <= 1e-13 * (b_new.norm() + 1e-300),
                               r_new, rhs2};
  } else {
    const double rhs = cc.c2 * r_old * r_old;
    const double slack = 1e-13 * (std::abs(f_old) + std::abs(f_new));
    report.z = ConditionCheck{decrease + slack >= rhs, decrease, rhs};
  }
  return report;
}

}  // namespace daps
