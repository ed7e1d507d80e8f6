// SPDX-License-Identifier: Apache-2.0
//
// Dense n x n reference implementations used only by the tests. They follow
// the textbook formulas directly and share no code path with the library
// beyond the data types.
#pragma once

#include "daps/daps.hpp"
#include "daps/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace oracle {

using daps::Index;
using daps::Matrix;

inline Matrix projector(const Matrix& x) { return x * x.transpose(); }

/// Modified Gram-Schmidt with positive diagonal.
inline Matrix mgs(Matrix m) {
  for (Index j = 0; j < m.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Index i = 0; i < j; ++i) m.col(j) -= m.col(i).dot(m.col(j)) * m.col(i);
    }
    m.col(j) /= m.col(j).norm();
  }
  return m;
}

inline daps::StiefelPoint stiefel(const Matrix& m) {
  return daps::StiefelPoint::from_orthonormal(mgs(m));
}

inline daps::StiefelPoint random_stiefel(Index n, Index p, std::uint64_t seed) {
  daps::Rng rng(seed);
  return stiefel(rng.uniform_matrix(n, p));
}

inline double distance(const Matrix& x, const Matrix& y) {
  return (projector(x) - projector(y)).norm();
}

/// Lambda = -X X^T B (I - X X^T) - (I - X X^T) B X X^T with B = A A^T.
inline Matrix multiplier(const Matrix& a, const Matrix& x) {
  const Index n = x.rows();
  const Matrix b = a * a.transpose();
  const Matrix px = projector(x);
  const Matrix i = Matrix::Identity(n, n);
  return -px * b * (i - px) - (i - px) * b * px;
}

inline Matrix h(const daps::NodeState& s, const Matrix& z) {
  const Matrix lam = s.x.basis() * s.w.transpose() + s.w * s.x.basis().transpose();
  return s.a * s.a.transpose() + lam + s.beta * projector(z);
}

inline Matrix q(const daps::NodeState& s) {
  const Matrix lam = s.x.basis() * s.w.transpose() + s.w * s.x.basis().transpose();
  return s.beta * projector(s.x.basis()) - lam;
}

inline double augmented_lagrangian(const std::vector<daps::NodeState>& nodes, const Matrix& z) {
  double total = 0.0;
  for (const auto& s : nodes) {
    const Matrix& x = s.x.basis();
    const Matrix lam = x * s.w.transpose() + s.w * x.transpose();
    const Matrix gap = projector(x) - projector(z);
    total += -0.5 * (x.transpose() * s.a * s.a.transpose() * x).trace() -
             0.5 * (lam.cwiseProduct(gap)).sum() + 0.25 * s.beta * gap.squaredNorm();
  }
  return total;
}

/// Dominant p-dimensional eigenspace of a symmetric matrix.
inline Matrix dominant_subspace(const Matrix& b, Index p) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(b);
  return eig.eigenvectors().rightCols(p).rowwise().reverse();
}

inline Matrix slrpgn_direction(const Matrix& x, const Matrix& bx) {
  const Matrix ginv = (x.transpose() * x).inverse();
  const Index n = x.rows();
  return (Matrix::Identity(n, n) - 0.5 * x * ginv * x.transpose()) * bx * ginv;
}

struct SerialRecord {
  double objective;
  double scaled_kkt;
  std::vector<double> dist;
  std::vector<double> beta;
};

/// Serial DAPS iteration with dense operators. Starts from the states built
/// by `initialize` and needs a fixed inner step size (cfg.tau_inner > 0).
inline std::vector<SerialRecord> serial_daps(const daps::DapsInit& init, const daps::DapsConfig& cfg) {
  const Index n = init.z.n();
  const Matrix eye = Matrix::Identity(n, n);
  std::vector<Matrix> a, x, w;
  std::vector<double> beta, beta0;
  Matrix aat = Matrix::Zero(n, n);
  double fro2 = 0.0;
  for (const auto& s : init.nodes) {
    a.push_back(s.a);
    x.push_back(s.x.basis());
    w.push_back(-(eye - projector(s.x.basis())) * s.a * s.a.transpose() * s.x.basis());
    beta.push_back(s.beta);
    aat += s.a * s.a.transpose();
    fro2 += s.a.squaredNorm();
  }
  beta0 = beta;
  double beta0_sum = 0.0;
  for (double b : beta0) beta0_sum += b;
  const std::size_t d = a.size();
  std::vector<std::vector<double>> hist(d, std::vector<double>{0.0});
  Matrix z = init.z.basis();
  const auto record = [&](const std::vector<double>& dist) {
    return SerialRecord{-0.5 * (z.transpose() * aat * z).trace(),
                        ((eye - projector(z)) * aat * z).norm() / fro2, dist, beta};
  };
  std::vector<SerialRecord> out{record(std::vector<double>(d, 0.0))};
  double s_prev = (z.transpose() * aat * z).trace();
  for (int k = 0; k < cfg.max_iter; ++k) {
    for (std::size_t i = 0; i < d; ++i) {
      const Matrix lam = x[i] * w[i].transpose() + w[i] * x[i].transpose();
      const Matrix hs = (a[i] * a[i].transpose() + lam + beta[i] * projector(z)) / beta[i];
      Matrix y = x[i];
      double prev = y.norm();
      for (int j = 0; j < cfg.max_inner; ++j) {
        y = y + cfg.tau_inner * (slrpgn_direction(y, hs * y) - 0.5 * y);
        const double now = y.norm();
        if (std::abs(now - prev) <= cfg.eps_x * now) break;
        prev = now;
      }
      x[i] = mgs(y);
      w[i] = -(eye - projector(x[i])) * a[i] * a[i].transpose() * x[i];
    }
    Matrix q = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < d; ++i) {
      q += beta[i] * projector(x[i]) - (x[i] * w[i].transpose() + w[i] * x[i].transpose());
    }
    const Matrix qz = q * z / beta0_sum;
    z = mgs(z + cfg.tau_z * (slrpgn_direction(z, qz) - 0.5 * z));
    std::vector<double> dist(d);
    for (std::size_t i = 0; i < d; ++i) {
      dist[i] = distance(x[i], z);
      hist[i].push_back(dist[i]);
    }
    out.push_back(record(dist));
    const int kk = k + 1;
    for (std::size_t i = 0; i < d; ++i) {
      if (kk % 5 == 0 && hist[i][kk - 5] <= (1 + cfg.mu) * hist[i][kk]) beta[i] *= 1 + cfg.theta;
    }
    const double s_now = (z.transpose() * aat * z).trace();
    if (std::abs(s_now - s_prev) <= cfg.rel_tol * s_now) break;
    s_prev = s_now;
  }
  return out;
}

}  // namespace oracle
