// SPDX-License-Identifier: Apache-2.0
#include "daps/baselines.hpp"

#include "daps/daps.hpp"
#include "daps/eigensolvers.hpp"
#include "daps/error.hpp"
#include "daps/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace daps {

namespace {

constexpr std::uint64_t kTauSalt = 0x600000;

enum class Algo { kSlrpgn, kSsi };

std::vector<Matrix> check_blocks(std::vector<Matrix> blocks, Index n, Index p) {
  if (blocks.empty()) throw Error(ErrorCode::kInvalidConfig, "no data blocks");
  for (const auto& a : blocks) {
    if (a.rows() != n) throw Error(ErrorCode::kDimensionMismatch, "block rows differ from X0 rows");
    require_finite(a, "data block");
  }
  if (p < 1 || p > n) throw Error(ErrorCode::kInvalidConfig, "p must be in [1, n]");
  return blocks;
}

BaselineResult run_baseline(Algo algo, std::vector<Matrix> blocks, const Matrix& x0,
                            const BaselineConfig& cfg, Fabric& net, bool record_trace,
                            const GroundTruth* truth) {
  validate(cfg);
  require_shape(x0, x0.rows(), cfg.p, "X0");
  require_finite(x0, "X0");
  blocks = check_blocks(std::move(blocks), x0.rows(), cfg.p);
  const int d = static_cast<int>(blocks.size());
  if (net.size() != d) throw Error(ErrorCode::kInvalidConfig, "fabric size differs from node count");
  const Index n = x0.rows();
  const Index p = cfg.p;

  double fro2 = 0.0;
  for (const auto& a : blocks) fro2 += a.squaredNorm();

  BaselineResult result{orthonormalize(x0), {}, 0, false, cfg.tau, std::nullopt};
  if (record_trace) result.trace = BaselineTrace{algo == Algo::kSlrpgn ? "slrpgn" : "ssi", {}};

  std::vector<Matrix> shared(static_cast<std::size_t>(d));
  Matrix x_pub;
  double objective_pub = 0.0;

  // Off-wire diagnostics at orth(X); workers are parked meanwhile.
  const auto observe = [&](int k) {
    const StiefelPoint q = orthonormalize(x_pub);
    Matrix aatq = Matrix::Zero(n, p);
    Matrix gram = Matrix::Zero(p, p);
    for (const auto& a : blocks) {
      const Matrix atq = a.transpose() * q.basis();
      aatq += a * atq;
      gram += atq.transpose() * atq;
    }
    IterationRecord rec;
    rec.k = k;
    rec.objective = -0.5 * objective_pub;
    rec.kkt_raw = project_out(q.basis(), aatq).norm();
    rec.scaled_kkt = rec.kkt_raw / fro2;
    if (truth) rec.rel_error = *ritz_from_gram(gram, q, truth).rel_error;
    rec.comm_bytes = net.stats().total_bytes;
    result.records.push_back(std::move(rec));
  };

  run_on_nodes(net, [&](int i) {
    const Matrix& a = blocks[static_cast<std::size_t>(i)];
    const auto aat = [&](const Matrix& y) -> Matrix { return a * (a.transpose() * y); };

    double tau = cfg.tau;
    if (algo == Algo::kSlrpgn && tau <= 0.0) {
      Rng rng(derive_seed(cfg.seed, kTauSalt));
      Matrix v = rng.uniform_matrix(n, 1);
      v /= v.norm();
      double lambda = 0.0;
      for (int s = 0; s < cfg.tau_power_steps; ++s) {
        const Matrix w = net.all_reduce_sum(i, aat(v), "setup");
        lambda = w.norm();
        if (lambda == 0.0) break;
        v = w / lambda;
      }
      tau = lambda > 0.0 ? 1.0 / lambda : 1.0;
    }

    // The SLRPGN fixed point is U Lambda^{1/2}, not orthonormal, so the stop
    // rule reads the trace objective at orth(X); X is replicated, no extra
    // communication.
    const auto local_objective = [&](const Matrix& x) {
      return (a.transpose() * (algo == Algo::kSlrpgn ? orthonormalize(x).basis() : x)).squaredNorm();
    };
    Matrix x = x0;
    double s = net.all_reduce_sum(i, local_objective(x), "objective");
    net.synchronize(i, [&] {
      x_pub = x;
      objective_pub = s;
      result.tau = tau;
      observe(0);
    });

    for (int k = 0;; ++k) {
      const Matrix local = algo == Algo::kSlrpgn ? slrpgn_direction(x, aat(x)) : aat(x);
      shared[static_cast<std::size_t>(i)] = local;
      const Matrix total = net.all_reduce_sum(i, local, algo == Algo::kSlrpgn ? "S" : "AAX");
      const bool keep_snapshot =
          result.trace && (cfg.max_snapshots < 0 ||
                           static_cast<int>(result.trace->snapshots.size()) < cfg.max_snapshots);
      Matrix next;
      if (algo == Algo::kSlrpgn) {
        next = x + tau * (total - 0.5 * x);
        if ((k + 1) % cfg.ortho_every == 0) next = orthonormalize(next).basis();
      } else {
        next = orthonormalize(total).basis();
      }
      const double s_new = net.all_reduce_sum(i, local_objective(next), "objective");
      const TerminationDecision stop = check_termination(s, s_new, cfg.rel_tol, k + 1, cfg.max_iter);
      if (algo == Algo::kSlrpgn && stop.stop) next = orthonormalize(next).basis();
      net.synchronize(i, [&] {
        if (keep_snapshot) result.trace->snapshots.push_back({k, x, shared});
        x_pub = next;
        objective_pub = s_new;
        observe(k + 1);
      });
      x = std::move(next);
      s = s_new;
      if (stop.stop) {
        if (i == 0) {
          result.iterations = k + 1;
          result.budget_exhausted = stop.budget_exhausted;
          result.x = StiefelPoint::from_orthonormal(x);
        }
        break;
      }
    }
  });
  return result;
}

std::string matrix_file(const char* stem, int k, int node) {
  char buf[64];
  if (node < 0) {
    std::snprintf(buf, sizeof buf, "%s_%06d.bin", stem, k);
  } else {
    std::snprintf(buf, sizeof buf, "%s_%06d_%03d.bin", stem, k, node);
  }
  return buf;
}

}  // namespace

void validate(const BaselineConfig& cfg) {
  if (cfg.p < 1) throw Error(ErrorCode::kInvalidConfig, "p must be positive");
  if (cfg.ortho_every < 1) throw Error(ErrorCode::kInvalidConfig, "ortho_every must be positive");
  if (cfg.rel_tol < 0.0) throw Error(ErrorCode::kInvalidConfig, "rel_tol must be nonnegative");
  if (cfg.max_iter < 1) throw Error(ErrorCode::kInvalidConfig, "max_iter must be positive");
  if (cfg.tau_power_steps < 1) throw Error(ErrorCode::kInvalidConfig, "tau_power_steps must be positive");
}

BaselineResult run_parallel_slrpgn(std::vector<Matrix> blocks, const Matrix& x0,
                                   const BaselineConfig& cfg, Fabric& net, bool record_trace,
                                   const GroundTruth* truth) {
  return run_baseline(Algo::kSlrpgn, std::move(blocks), x0, cfg, net, record_trace, truth);
}

BaselineResult run_parallel_ssi(std::vector<Matrix> blocks, const StiefelPoint& x0,
                                const BaselineConfig& cfg, Fabric& net, bool record_trace,
                                const GroundTruth* truth) {
  return run_baseline(Algo::kSsi, std::move(blocks), x0.basis(), cfg, net, record_trace, truth);
}

int iterations_to_reach(const std::vector<IterationRecord>& records, double scaled_kkt_target) {
  if (records.empty()) return 0;
  for (const auto& rec : records) {
    if (rec.scaled_kkt <= scaled_kkt_target) return rec.k;
  }
  return records.back().k;
}

void save_trace(const std::filesystem::path& dir, const BaselineTrace& trace) {
  std::filesystem::create_directories(dir);
  nlohmann::json index;
  index["algorithm"] = trace.algorithm;
  index["snapshots"] = nlohmann::json::array();
  for (const auto& snap : trace.snapshots) {
    nlohmann::json entry;
    entry["k"] = snap.k;
    entry["x"] = matrix_file("x", snap.k, -1);
    save_matrix(dir / entry["x"].get<std::string>(), snap.x, MatrixFormat::kRawBinary);
    entry["shared"] = nlohmann::json::array();
    for (std::size_t i = 0; i < snap.shared.size(); ++i) {
      const std::string file = matrix_file("shared", snap.k, static_cast<int>(i));
      save_matrix(dir / file, snap.shared[i], MatrixFormat::kRawBinary);
      entry["shared"].push_back(file);
    }
    index["snapshots"].push_back(std::move(entry));
  }
  std::ofstream out(dir / "index.json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write trace index in " + dir.string());
  out << index.dump(2) << '\n';
}

BaselineTrace load_trace(const std::filesystem::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + (dir / "index.json").string());
  nlohmann::json index;
  try {
    in >> index;
    BaselineTrace trace{index.at("algorithm").get<std::string>(), {}};
    for (const auto& entry : index.at("snapshots")) {
      BaselineSnapshot snap;
      snap.k = entry.at("k").get<int>();
      snap.x = load_matrix(dir / entry.at("x").get<std::string>(), MatrixFormat::kRawBinary);
      for (const auto& file : entry.at("shared")) {
        snap.shared.push_back(load_matrix(dir / file.get<std::string>(), MatrixFormat::kRawBinary));
        if (snap.shared.back().rows() != snap.x.rows() ||
            snap.shared.back().cols() != snap.x.cols()) {
          throw Error(ErrorCode::kDimensionMismatch, "trace share shape differs from X");
        }
      }
      trace.snapshots.push_back(std::move(snap));
    }
    return trace;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, "bad trace index: " + std::string(e.what()));
  }
}

}  // namespace daps
