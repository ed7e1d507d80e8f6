// SPDX-License-Identifier: Apache-2.0
//
// Dense primitives shared by every module: matrix aliases, points on the
// Stiefel manifold St(n, p), subspace distances and the residual metrics of
// the trace-minimization model min -1/2 tr(X^T A A^T X) over St(n, p).
//
// Matrices are Eigen column-major doubles. No routine here ever forms an
// n x n intermediate; everything goes through n x p blocks.
#pragma once

#include <Eigen/Dense>

#include <functional>

namespace daps {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Orthonormality tolerance per column: ||X^T X - I_p||_F <= kOrthoTol * p.
inline constexpr double kOrthoTol = 1e-12;

/// Throws NonFinite if any entry is NaN or Inf. `what` names the offender.
void require_finite(const Matrix& m, const char* what);

/// Throws DimensionMismatch unless rows/cols match.
void require_shape(const Matrix& m, Index rows, Index cols, const char* what);

/// Symmetric linear map Y -> B Y given only through block products.
struct SymmetricOperator {
  Index dim = 0;
  std::function<Matrix(const Matrix&)> apply;

  Matrix operator()(const Matrix& y) const { return apply(y); }
};

/// Operator Y -> A (A^T Y) for a (possibly wide) data block A.
SymmetricOperator gram_operator(const Matrix& a);

/// Operator Y -> B Y for an explicit symmetric matrix (small dense cases).
SymmetricOperator dense_operator(Matrix b);

/// An n x p matrix with orthonormal columns.
class StiefelPoint {
 public:
  /// Validates orthonormality (and finiteness) and wraps the basis.
  /// Throws DimensionMismatch if p > n and RankDeficient if the columns are
  /// not orthonormal within kOrthoTol * p.
  static StiefelPoint from_orthonormal(Matrix basis);

  const Matrix& basis() const noexcept { return basis_; }
  Index n() const noexcept { return basis_.rows(); }
  Index p() const noexcept { return basis_.cols(); }

  /// ||X^T X - I||_F
  double orthogonality_error() const;

 private:
  explicit StiefelPoint(Matrix basis) : basis_(std::move(basis)) {}
  friend StiefelPoint orthonormalize(const Matrix& m);

  Matrix basis_;
};

/// Orthonormal basis of range(M) by economy Householder QR, with the sign of
/// each column fixed so that diag(R) > 0. Throws RankDeficient when some
/// |R_jj| < 1e-12 * ||M||_F.
StiefelPoint orthonormalize(const Matrix& m);

struct ProjectionMetrics {
  double distance = 0.0;               ///< ||X X^T - Y Y^T||_F
  double min_principal_cosine = 1.0;   ///< sigma_min(X^T Y)
};

/// Subspace distance between equal-size Stiefel points.
ProjectionMetrics projection_distance(const StiefelPoint& x, const StiefelPoint& y);

/// -1/2 tr(X^T B X) for B = A A^T given in operator form.
double trace_objective(const SymmetricOperator& aat, const StiefelPoint& x);
/// -1/2 ||A^T X||_F^2
double trace_objective(const Matrix& a, const StiefelPoint& x);

struct KktResidual {
  double raw = 0.0;     ///< ||(I - Z Z^T) A A^T Z||_F
  double scaled = 0.0;  ///< raw / ||A||_F^2
};

KktResidual kkt_residual(const SymmetricOperator& aat, double norm_a_fro2, const StiefelPoint& z);
KktResidual kkt_residual(const Matrix& a, const StiefelPoint& z);

/// (I - X X^T) Y for orthonormal X.
Matrix project_out(const Matrix& x, const Matrix& y);

/// Numerical rank: number of singular values above rel_cutoff * sigma_max
/// (or above abs_cutoff when rel_cutoff is zero).
Index numerical_rank(const Matrix& m, double cutoff, bool relative = true);

}  // namespace daps
