// SPDX-License-Identifier: Apache-2.0
#include "daps/privacy.hpp"

#include "daps/error.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <map>
#include <tuple>

namespace daps {

namespace {

constexpr double kRankCutoff = 1e-10;
constexpr std::size_t kMaxDof = 5000;

// Coordinates in the orthonormal basis {E_ii, (E_ij + E_ji) / sqrt(2)} of
// symmetric matrices, so the minimum-norm solution is Frobenius-minimal.
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

// Position of M(r, c) in the packed upper triangle, column by column.
Index packed_index(Index r, Index c) {
  if (r > c) std::swap(r, c);
  return c * (c + 1) / 2 + r;
}

}  // namespace

void solve_symmetric_system(const std::vector<Matrix>& probes, const std::vector<Matrix>& responses,
                            AttackReport& report) {
  if (probes.size() != responses.size() || probes.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "need matching, nonempty probe/response lists");
  }
  const Index n = probes.front().rows();
  const std::size_t dof = static_cast<std::size_t>(n * (n + 1) / 2);
  if (dof > kMaxDof) {
    throw Error(ErrorCode::kInvalidConfig, "reconstruction is only set up for small n");
  }
  Index eqs = 0;
  for (std::size_t s = 0; s < probes.size(); ++s) {
    require_shape(responses[s], n, probes[s].cols(), "attack response");
    require_shape(probes[s], n, probes[s].cols(), "attack probe");
    eqs += n * probes[s].cols();
  }
  Matrix design = Matrix::Zero(eqs, static_cast<Index>(dof));
  Vector rhs(eqs);
  Index row = 0;
  for (std::size_t s = 0; s < probes.size(); ++s) {
    const Matrix& y = probes[s];
    for (Index j = 0; j < y.cols(); ++j) {
      for (Index r = 0; r < n; ++r) {
        // (M y_j)_r = sum_l M_rl y_lj
        for (Index l = 0; l < n; ++l) {
          design(row, packed_index(r, l)) += (r == l ? 1.0 : kInvSqrt2) * y(l, j);
        }
        rhs(row) = responses[s](r, j);
        ++row;
      }
    }
  }
  // Thin SVD of the tall orientation; design = left * diag(sv) * right^T.
  const bool wide = design.rows() < design.cols();
  Matrix left;
  Matrix right;
  Vector sv;
  {
    const Matrix tall = wide ? Matrix(design.transpose()) : design;
    Eigen::BDCSVD<Matrix> svd(tall, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (!svd.singularValues().allFinite() || !svd.matrixU().allFinite() || !svd.matrixV().allFinite()) {
      const Eigen::JacobiSVD<Matrix> jac(tall, Eigen::ComputeThinU | Eigen::ComputeThinV);
      sv = jac.singularValues();
      left = wide ? jac.matrixV() : jac.matrixU();
      right = wide ? jac.matrixU() : jac.matrixV();
    } else {
      sv = svd.singularValues();
      left = wide ? svd.matrixV() : svd.matrixU();
      right = wide ? svd.matrixU() : svd.matrixV();
    }
  }
  std::size_t rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > kRankCutoff * sv(0)) ++rank;
  }
  // Minimum-norm solution restricted to the numerically determined part.
  Vector h = Vector::Zero(static_cast<Index>(dof));
  for (std::size_t i = 0; i < rank; ++i) {
    const Index ii = static_cast<Index>(i);
    h += right.col(ii) * (left.col(ii).dot(rhs) / sv(ii));
  }
  Matrix m(n, n);
  for (Index c = 0; c < n; ++c) {
    for (Index r = 0; r <= c; ++r) {
      m(r, c) = m(c, r) = (r == c ? 1.0 : kInvSqrt2) * h(packed_index(r, c));
    }
  }
  report.n = n;
  report.p = probes.front().cols();
  report.equations_collected = static_cast<std::size_t>(eqs);
  report.unknown_dof = dof;
  report.system_rank = rank;
  report.residual = (design * h - rhs).norm();
  report.recovered = std::move(m);
}

AttackReport attack_slrpgn_trace(const BaselineTrace& trace, int target_node, const Matrix* truth,
                                 int max_snapshots) {
  AttackReport report;
  report.target_node = target_node;
  std::vector<Matrix> probes;
  std::vector<Matrix> responses;
  for (const auto& snap : trace.snapshots) {
    if (max_snapshots >= 0 && static_cast<int>(probes.size()) >= max_snapshots) break;
    if (target_node < 0 || static_cast<std::size_t>(target_node) >= snap.shared.size()) {
      throw Error(ErrorCode::kInvalidConfig, "target node not present in the trace");
    }
    const Matrix& x = snap.x;
    const Matrix& s = snap.shared[static_cast<std::size_t>(target_node)];
    const Matrix g = x.transpose() * x;
    Eigen::LLT<Matrix> llt(g);
    const bool singular = llt.info() != Eigen::Success ||
                          llt.matrixL().toDenseMatrix().diagonal().minCoeff() <=
                              1e-10 * std::sqrt(g.diagonal().maxCoeff());
    if (singular) {
      ++report.snapshots_skipped;
      report.notes.push_back("snapshot k=" + std::to_string(snap.k) +
                             " skipped: singular left factor");
      continue;
    }
    if (trace.algorithm == "ssi") {
      responses.push_back(s);
    } else {
      // (I + X G^{-1} X^T) S G
      const Matrix sg = s * g;
      responses.push_back(sg + x * llt.solve(x.transpose() * sg));
    }
    probes.push_back(x);
  }
  report.snapshots_used = probes.size();
  if (probes.empty()) {
    report.notes.push_back("no usable snapshots");
    return report;
  }
  solve_symmetric_system(probes, responses, report);
  report.identifiable = report.system_rank == report.unknown_dof;
  if (truth) {
    require_shape(*truth, report.n, report.n, "true Gram");
    report.relative_error = (*report.recovered - *truth).norm() / truth->norm();
  }
  if (report.identifiable) {
    report.notes.push_back("A_i itself is determined only up to an orthogonal factor");
  }
  return report;
}

std::vector<ProbePair> extract_daps_pairs(const std::vector<MessageRecord>& trace, int target,
                                          int nodes, Schedule schedule) {
  if (target < 0 || target >= nodes) throw Error(ErrorCode::kInvalidConfig, "bad target node");
  // The schedule is public, so the outsider knows which nodes each payload sums.
  using Key = std::tuple<int, int, int>;  // round, src, dst
  std::map<Key, std::vector<int>> group_of;
  for (const auto& m : plan_all_reduce(schedule, nodes).messages) group_of[{m.round, m.src, m.dst}] = m.group;

  std::optional<Matrix> public_z;
  std::map<std::uint64_t, std::map<Key, const Matrix*>> q_messages;
  std::map<std::uint64_t, Matrix> probe_of;
  for (const auto& rec : trace) {
    if (rec.src == kPublicSource) {
      if (rec.tag == "Z" && rec.payload) public_z = *rec.payload;
      continue;
    }
    if (rec.tag != "Q" || !rec.payload || !public_z) continue;
    q_messages[rec.collective][{rec.round, rec.src, rec.dst}] = &*rec.payload;
    probe_of.emplace(rec.collective, *public_z);
  }

  const std::vector<int> alone{target};
  std::vector<ProbePair> pairs;
  for (const auto& [collective, msgs] : q_messages) {
    std::optional<Matrix> response;
    // Prefer a payload carrying the target alone, else the difference of two
    // payloads whose groups differ by exactly the target.
    for (const auto& [key, payload] : msgs) {
      if (group_of.at(key) == alone) {
        response = *payload;
        break;
      }
    }
    for (auto with = msgs.begin(); !response && with != msgs.end(); ++with) {
      const auto& g = group_of.at(with->first);
      if (!std::binary_search(g.begin(), g.end(), target)) continue;
      std::vector<int> rest;
      std::remove_copy(g.begin(), g.end(), std::back_inserter(rest), target);
      for (const auto& [key, payload] : msgs) {
        if (group_of.at(key) == rest) {
          response = *with->second - *payload;
          break;
        }
      }
    }
    if (response) pairs.push_back({collective, probe_of.at(collective), std::move(*response)});
  }
  return pairs;
}

AttackReport attack_daps_trace(const std::vector<ProbePair>& pairs, int target_node,
                               const Matrix* truth) {
  AttackReport report;
  report.target_node = target_node;
  if (pairs.empty()) {
    report.notes.push_back("no probe pairs observed");
    return report;
  }
  std::vector<Matrix> probes;
  std::vector<Matrix> responses;
  for (const auto& pr : pairs) {
    probes.push_back(pr.probe);
    responses.push_back(pr.response);
  }
  report.snapshots_used = pairs.size();
  // Each iteration exposes a single pair of a fresh operator Q_i^{(k)}; the
  // minimum-norm symmetric fit of one pair is the most a linear attacker
  // learns about that operator.
  Index max_rank = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    AttackReport single;
    solve_symmetric_system({probes[k]}, {responses[k]}, single);
    max_rank = std::max(max_rank, numerical_rank(*single.recovered, kRankCutoff));
  }
  report.recovered_rank = max_rank;
  // Pooling all pairs as if they probed one operator.
  solve_symmetric_system(probes, responses, report);
  if (truth) {
    require_shape(*truth, report.n, report.n, "true Gram");
    report.relative_error = (*report.recovered - *truth).norm() / truth->norm();
  }
  const Index p = report.p;
  if (3 * p < report.n) {
    report.identifiable = false;
    report.notes.push_back("each per-iteration operator Q_i has rank <= 3p = " +
                           std::to_string(3 * p) + " < n = " + std::to_string(report.n) +
                           "; A_i A_i^T is not a function of the observed data");
  } else {
    report.identifiable = false;
    report.rank_argument_inconclusive = true;
    report.notes.push_back("3p >= n: the rank argument does not rule out recovery");
  }
  if (report.system_rank == report.unknown_dof && report.residual > 1e-8 * responses.front().norm()) {
    report.notes.push_back("pairs are inconsistent with a single operator (Q_i changes every iteration)");
  }
  return report;
}

nlohmann::json to_json(const AttackReport& r, bool include_matrix) {
  nlohmann::json j;
  j["target_node"] = r.target_node;
  j["n"] = r.n;
  j["p"] = r.p;
  j["snapshots_used"] = r.snapshots_used;
  j["snapshots_skipped"] = r.snapshots_skipped;
  j["equations_collected"] = r.equations_collected;
  j["unknown_dof"] = r.unknown_dof;
  j["system_rank"] = r.system_rank;
  j["residual"] = r.residual;
  j["identifiable"] = r.identifiable;
  j["relative_error"] = r.relative_error ? nlohmann::json(*r.relative_error) : nlohmann::json();
  j["recovered_rank"] = r.recovered_rank ? nlohmann::json(*r.recovered_rank) : nlohmann::json();
  j["rank_argument_inconclusive"] = r.rank_argument_inconclusive;
  j["notes"] = r.notes;
  if (include_matrix && r.recovered) {
    const Matrix& m = *r.recovered;
    j["recovered_gram"] = {{"rows", m.rows()},
                           {"cols", m.cols()},
                           {"data", std::vector<double>(m.data(), m.data() + m.size())}};
  }
  return j;
}

}  // namespace daps
