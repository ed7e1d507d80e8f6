// SPDX-License-Identifier: Apache-2.0
#include "daps/linalg.hpp"

#include "daps/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace daps {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::kNonFinite, std::string(what) + " contains NaN or Inf");
  }
}

void require_shape(const Matrix& m, Index rows, Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + ": expected " + std::to_string(rows) + "x" +
                    std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()));
  }
}

SymmetricOperator gram_operator(const Matrix& a) {
  return {a.rows(), [&a](const Matrix& y) -> Matrix { return a * (a.transpose() * y); }};
}

SymmetricOperator dense_operator(Matrix b) {
  const Index n = b.rows();
  return {n, [b = std::move(b)](const Matrix& y) -> Matrix { return b * y; }};
}

StiefelPoint StiefelPoint::from_orthonormal(Matrix basis) {
  require_finite(basis, "Stiefel basis");
  if (basis.cols() > basis.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "Stiefel point needs p <= n");
  }
  StiefelPoint x(std::move(basis));
  const double err = x.orthogonality_error();
  const double tol = kOrthoTol * static_cast<double>(std::max<Index>(1, x.p()));
  if (err > tol) {
    throw Error(ErrorCode::kRankDeficient,
                "columns are not orthonormal (||X^T X - I||_F = " + std::to_string(err) + ")");
  }
  return x;
}

double StiefelPoint::orthogonality_error() const {
  const Matrix g = basis_.transpose() * basis_;
  return (g - Matrix::Identity(p(), p())).norm();
}

StiefelPoint orthonormalize(const Matrix& m) {
  require_finite(m, "orthonormalize input");
  const Index n = m.rows();
  const Index p = m.cols();
  if (p > n || p == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "orthonormalize needs 0 < p <= n");
  }
  Eigen::HouseholderQR<Matrix> qr(m);
  const Matrix& packed = qr.matrixQR();
  const double floor = 1e-12 * m.norm();
  Vector signs(p);
  for (Index j = 0; j < p; ++j) {
    const double r = packed(j, j);
    if (!(std::abs(r) >= floor) || r == 0.0) {
      throw Error(ErrorCode::kRankDeficient,
                  "R factor diagonal " + std::to_string(j) + " below 1e-12*||M||_F");
    }
    signs(j) = r < 0.0 ? -1.0 : 1.0;
  }
  Matrix q = qr.householderQ() * Matrix::Identity(n, p);
  q = q * signs.asDiagonal();
  return StiefelPoint(std::move(q));
}

Matrix project_out(const Matrix& x, const Matrix& y) {
  return y - x * (x.transpose() * y);
}

ProjectionMetrics projection_distance(const StiefelPoint& x, const StiefelPoint& y) {
  if (x.n() != y.n() || x.p() != y.p()) {
    throw Error(ErrorCode::kDimensionMismatch, "projection_distance needs equal n and p");
  }
  // ||XX^T - YY^T||_F^2 = 2p - 2||X^T Y||_F^2 = 2||(I - YY^T)X||_F^2; the
  // last form keeps full relative accuracy for nearby subspaces.
  const Matrix xy = x.basis().transpose() * y.basis();
  const Matrix residual = x.basis() - y.basis() * xy.transpose();
  ProjectionMetrics out;
  out.distance = std::sqrt(2.0) * residual.norm();
  Eigen::JacobiSVD<Matrix> svd(xy);
  const Vector& s = svd.singularValues();
  out.min_principal_cosine = s.size() == 0 ? 1.0 : std::clamp(s(s.size() - 1), 0.0, 1.0);
  return out;
}

double trace_objective(const SymmetricOperator& aat, const StiefelPoint& x) {
  if (aat.dim != x.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "trace_objective operator/point size");
  }
  const Matrix bx = aat(x.basis());
  return -0.5 * (x.basis().transpose() * bx).trace();
}

double trace_objective(const Matrix& a, const StiefelPoint& x) {
  if (a.rows() != x.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "trace_objective data/point rows");
  }
  return -0.5 * (a.transpose() * x.basis()).squaredNorm();
}

KktResidual kkt_residual(const SymmetricOperator& aat, double norm_a_fro2, const StiefelPoint& z) {
  if (aat.dim != z.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "kkt_residual operator/point size");
  }
  const Matrix bz = aat(z.basis());
  KktResidual out;
  out.raw = project_out(z.basis(), bz).norm();
  out.scaled = norm_a_fro2 > 0.0 ? out.raw / norm_a_fro2 : 0.0;
  return out;
}

KktResidual kkt_residual(const Matrix& a, const StiefelPoint& z) {
  if (a.rows() != z.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "kkt_residual data/point rows");
  }
  return kkt_residual(gram_operator(a), a.squaredNorm(), z);
}

Index numerical_rank(const Matrix& m, double cutoff, bool relative) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0) return 0;
  const double threshold = relative ? cutoff * s(0) : cutoff;
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > threshold) ++rank;
  }
  return rank;
}

}  // namespace daps
