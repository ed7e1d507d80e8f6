// SPDX-License-Identifier: Apache-2.0
#include "daps/daps.hpp"

#include "daps/error.hpp"
#include "daps/rng.hpp"
#include "daps/theory.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

namespace daps {

namespace {

constexpr std::uint64_t kInitSalt = 0x5a17;
constexpr std::uint64_t kNormSalt = 0x100;
constexpr std::uint64_t kInnerSalt = 0x200000;
constexpr std::uint64_t kRestartSalt = 0x300000;
constexpr std::uint64_t kMaskSalt = 0x400000;

void require_config(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidConfig, what);
}

// Sum of one scalar per node in which every contribution is hidden behind
// pairwise masks r_ij (added by i, subtracted by j) that cancel in the total.
// Used for the setup constants so that no node's penalty leaves it in clear.
double masked_sum(Fabric& net, int node, double value, std::uint64_t seed, std::uint64_t round) {
  const int d = net.size();
  double masked = value;
  for (int j = 0; j < d; ++j) {
    if (j == node) continue;
    const int lo = std::min(node, j);
    const int hi = std::max(node, j);
    Rng rng(derive_seed(seed, kMaskSalt + round * 1'000'003ULL +
                                  static_cast<std::uint64_t>(lo) * static_cast<std::uint64_t>(d) +
                                  static_cast<std::uint64_t>(hi)));
    const double r = rng.uniform_pm1();
    masked += node == lo ? r : -r;
  }
  return net.all_reduce_sum(node, masked, "setup");
}

double initial_beta(double norm_a2, int node, int d, double norm_a_fro2, const DapsConfig& cfg) {
  if (cfg.theory_mode) {
    return theory_betas(d, cfg.p, norm_a_fro2, cfg.condition_constants)
        [static_cast<std::size_t>(node)];
  }
  return cfg.beta0_coeff * norm_a2;
}

void check_blocks(std::span<const Matrix> blocks, const DapsConfig& cfg) {
  if (blocks.empty()) throw Error(ErrorCode::kInvalidConfig, "no data blocks");
  const Index n = blocks.front().rows();
  for (const auto& a : blocks) {
    if (a.rows() != n) throw Error(ErrorCode::kDimensionMismatch, "blocks differ in row count");
    require_finite(a, "data block");
    if (cfg.p >= a.cols()) {
      throw Error(ErrorCode::kInvalidConfig, "p must be smaller than every block's column count");
    }
  }
  if (cfg.p > n) throw Error(ErrorCode::kInvalidConfig, "p must not exceed n");
}

SymmetricOperator q_operator(std::span<const NodeState> nodes) {
  return {nodes.front().x.n(), [nodes](const Matrix& y) -> Matrix {
            Matrix out = apply_q_local(nodes.front(), y);
            for (std::size_t i = 1; i < nodes.size(); ++i) out += apply_q_local(nodes[i], y);
            return out;
          }};
}

}  // namespace

std::string_view to_string(ZSolver s) noexcept {
  return s == ZSolver::kSlrpgn ? "slrpgn" : "ssi";
}

ZSolver z_solver_from_string(std::string_view s) {
  if (s == "slrpgn") return ZSolver::kSlrpgn;
  if (s == "ssi") return ZSolver::kSsi;
  throw Error(ErrorCode::kInvalidConfig, "unknown z solver '" + std::string(s) + "'");
}

std::string_view to_string(BetaMeasurePoint m) noexcept {
  return m == BetaMeasurePoint::kAfterGlobalStep ? "after_global" : "before_global";
}

BetaMeasurePoint beta_measure_point_from_string(std::string_view s) {
  if (s == "after_global") return BetaMeasurePoint::kAfterGlobalStep;
  if (s == "before_global") return BetaMeasurePoint::kBeforeGlobalStep;
  throw Error(ErrorCode::kInvalidConfig, "unknown beta measure point '" + std::string(s) + "'");
}

void validate(const DapsConfig& cfg) {
  require_config(cfg.p >= 1, "p must be positive");
  require_config(cfg.beta0_coeff > 0.0, "beta0_coeff must be positive");
  require_config(cfg.theta >= 0.0, "theta must be nonnegative");
  require_config(cfg.mu >= 0.0, "mu must be nonnegative");
  require_config(cfg.eps_x > 0.0, "eps_x must be positive");
  require_config(cfg.rel_tol >= 0.0, "rel_tol must be nonnegative");
  require_config(cfg.max_iter >= 1, "max_iter must be positive");
  require_config(cfg.max_inner >= 1, "max_inner must be positive");
  require_config(cfg.norm_power_steps >= 1, "norm_power_steps must be positive");
  require_config(cfg.tau_z > 0.0, "tau_z must be positive");
  const auto& cc = cfg.condition_constants;
  require_config(cc.c1 > 0.0 && cc.c1_prime > 0.0 && cc.delta > 0.0 && cc.c2 >= 0.0,
                 "condition constants out of range");
}

StiefelPoint initial_subspace(Index n, Index p, std::uint64_t seed) {
  // Salted so that Z0 is unrelated to a synthetic instance built from the same seed.
  Rng rng(derive_seed(seed, kInitSalt));
  return orthonormalize(rng.uniform_matrix(n, p));
}

double block_norm2(const Matrix& a, int steps, std::uint64_t seed) {
  return estimate_norm(gram_operator(a), steps, seed);
}

Matrix update_multiplier(const Matrix& a, const StiefelPoint& x) {
  if (a.rows() != x.n()) throw Error(ErrorCode::kDimensionMismatch, "update_multiplier shapes");
  const Matrix aax = a * (a.transpose() * x.basis());
  return -(aax - x.basis() * (x.basis().transpose() * aax));
}

Matrix dense_multiplier(const StiefelPoint& x, const Matrix& w) {
  require_shape(w, x.n(), x.p(), "W");
  return x.basis() * w.transpose() + w * x.basis().transpose();
}

Matrix apply_h(const NodeState& node, const StiefelPoint& z, const Matrix& y) {
  const Index n = node.x.n();
  require_shape(y, n, y.cols(), "H probe");
  if (z.n() != n) throw Error(ErrorCode::kDimensionMismatch, "apply_h: Z rows");
  const Matrix& x = node.x.basis();
  return node.a * (node.a.transpose() * y) + x * (node.w.transpose() * y) +
         node.w * (x.transpose() * y) + node.beta * (z.basis() * (z.basis().transpose() * y));
}

Matrix apply_q_local(const NodeState& node, const Matrix& y) {
  require_shape(y, node.x.n(), y.cols(), "Q probe");
  const Matrix& x = node.x.basis();
  const Matrix xty = x.transpose() * y;
  return node.beta * (x * xty) - x * (node.w.transpose() * y) - node.w * xty;
}

NodeState make_node(int node_id, Matrix a, const StiefelPoint& z0, double beta) {
  if (!(beta > 0.0)) throw Error(ErrorCode::kInvalidConfig, "beta must be positive");
  Matrix w = update_multiplier(a, z0);
  return NodeState{node_id, std::move(a), z0, std::move(w), beta, 0.0, 0.0, {0.0}};
}

DapsInit initialize(std::vector<Matrix> blocks, const DapsConfig& cfg) {
  validate(cfg);
  check_blocks(blocks, cfg);
  const int d = static_cast<int>(blocks.size());
  double fro2 = 0.0;
  for (const auto& a : blocks) fro2 += a.squaredNorm();
  DapsInit init{{}, initial_subspace(blocks.front().rows(), cfg.p, cfg.seed)};
  for (int i = 0; i < d; ++i) {
    Matrix& a = blocks[static_cast<std::size_t>(i)];
    const double norm2 = block_norm2(a, cfg.norm_power_steps, derive_seed(cfg.seed, kNormSalt + i));
    const double beta = initial_beta(norm2, i, d, fro2, cfg);
    init.nodes.push_back(make_node(i, std::move(a), init.z, beta));
    init.nodes.back().norm_a2 = norm2;
  }
  return init;
}

LocalStepReport local_step(NodeState& node, const StiefelPoint& z, const DapsConfig& cfg, int k) {
  const Index n = node.x.n();
  if (z.n() != n || z.p() != node.x.p()) {
    throw Error(ErrorCode::kDimensionMismatch, "local_step: Z shape");
  }
  const double beta = node.beta;
  const SymmetricOperator h{n, [&](const Matrix& y) -> Matrix { return apply_h(node, z, y); }};
  const SymmetricOperator h_scaled{n, [&](const Matrix& y) -> Matrix { return h(y) / beta; }};

  SlrpgnConfig sc;
  sc.tau = cfg.tau_inner;
  sc.max_inner = cfg.max_inner;
  sc.eps_x = cfg.eps_x;
  sc.seed = derive_seed(cfg.seed, kInnerSalt + static_cast<std::uint64_t>(node.node_id));
  (void)k;

  LocalStepReport report;
  InnerResult res = inner_solve(h_scaled, node.x, sc);
  report.inner_iterations = res.iterations;
  if (cfg.verify_conditions || cfg.strict_conditions) {
    report.conditions = verify_conditions(h, node.x, res.x, beta, node.norm_a2,
                                          cfg.condition_constants, Subproblem::kLocal);
    while (cfg.strict_conditions && !report.conditions->all_hold() && report.retries < 3) {
      ++report.retries;
      sc.eps_x /= 10.0;
      res = inner_solve(h_scaled, node.x, sc);
      report.inner_iterations += res.iterations;
      report.conditions = verify_conditions(h, node.x, res.x, beta, node.norm_a2,
                                            cfg.condition_constants, Subproblem::kLocal);
    }
  }
  report.budget_exhausted = res.budget_exhausted;
  node.x = std::move(res.x);
  node.w = update_multiplier(node.a, node.x);
  return report;
}

GlobalStepResult global_step(const NodeState& node, const StiefelPoint& z, const DapsConfig& cfg,
                             Fabric& net, double q_scale, int k) {
  const Matrix local = apply_q_local(node, z.basis());
  const Matrix qz = net.all_reduce_sum(node.node_id, local, "Q") * q_scale;
  Matrix next;
  if (cfg.z_solver == ZSolver::kSlrpgn) {
    next = z.basis() + cfg.tau_z * (slrpgn_direction(z.basis(), qz) - 0.5 * z.basis());
  } else {
    next = qz;
  }
  try {
    return {orthonormalize(next), false};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kRankDeficient && e.code() != ErrorCode::kNonFinite) throw;
  }
  // Every node draws the same perturbation, so Z stays replicated.
  Rng rng(derive_seed(cfg.seed, kRestartSalt + static_cast<std::uint64_t>(k)));
  const Matrix noise = rng.uniform_matrix(z.n(), z.p());
  if (next.allFinite()) {
    try {
      return {orthonormalize(next + 1e-6 * std::max(1.0, next.norm()) * noise), true};
    } catch (const Error&) {
    }
  }
  return {orthonormalize(z.basis() + 1e-6 * noise), true};
}

StiefelPoint global_step(std::span<const NodeState> nodes, const StiefelPoint& z,
                         const DapsConfig& cfg, Fabric& net, double q_scale) {
  if (static_cast<int>(nodes.size()) != net.size()) {
    throw Error(ErrorCode::kInvalidConfig, "fabric size differs from node count");
  }
  std::optional<StiefelPoint> out;
  run_on_nodes(net, [&](int i) {
    GlobalStepResult r = global_step(nodes[static_cast<std::size_t>(i)], z, cfg, net, q_scale, 0);
    if (i == 0) out = std::move(r.z);
  });
  return *out;
}

double adapt_beta(double beta, int k, std::span<const double> dist_history,
                  const DapsConfig& cfg) {
  if (k % 5 != 0 || k < 5) return beta;
  if (static_cast<int>(dist_history.size()) <= k) {
    throw Error(ErrorCode::kInvalidConfig, "distance history is shorter than k");
  }
  const double before = dist_history[static_cast<std::size_t>(k - 5)];
  const double now = dist_history[static_cast<std::size_t>(k)];
  return before <= (1.0 + cfg.mu) * now ? (1.0 + cfg.theta) * beta : beta;
}

TerminationDecision check_termination(double prev, double curr, double rel_tol, int k,
                                      int max_iter) {
  TerminationDecision out;
  if (std::abs(curr - prev) <= rel_tol * curr) out.stop = true;
  if (k >= max_iter) {
    out.budget_exhausted = !out.stop;
    out.stop = true;
  }
  return out;
}

double augmented_lagrangian(std::span<const NodeState> nodes, const StiefelPoint& z) {
  double total = 0.0;
  for (const auto& node : nodes) {
    const Matrix& x = node.x.basis();
    require_shape(node.w, x.rows(), x.cols(), "W");
    if (z.n() != x.rows() || z.p() != x.cols()) {
      throw Error(ErrorCode::kDimensionMismatch, "augmented_lagrangian: Z shape");
    }
    const double f = -0.5 * (node.a.transpose() * x).squaredNorm();
    // <X W^T + W X^T, X X^T> = 2 tr(W^T X) and <.., Z Z^T> = 2 tr((Z^T X)(W^T Z)).
    const double lam_x = 2.0 * (node.w.transpose() * x).trace();
    const double lam_z = 2.0 * ((z.basis().transpose() * x) * (node.w.transpose() * z.basis())).trace();
    const double dist = projection_distance(node.x, z).distance;
    total += f - 0.5 * (lam_x - lam_z) + 0.25 * node.beta * dist * dist;
  }
  return total;
}

KktCertificate kkt_certificate(std::span<const NodeState> nodes, const StiefelPoint& z) {
  if (nodes.empty()) throw Error(ErrorCode::kInvalidConfig, "no nodes");
  const Index p = z.p();
  KktCertificate cert;
  cert.theta = Matrix::Zero(p, p);
  Matrix lambda_z = Matrix::Zero(z.n(), p);
  for (const auto& node : nodes) {
    const Matrix& x = node.x.basis();
    if (x.rows() != z.n() || x.cols() != p) {
      throw Error(ErrorCode::kDimensionMismatch, "kkt_certificate: X_i shape");
    }
    const Matrix w = update_multiplier(node.a, node.x);
    const Matrix aax = node.a * (node.a.transpose() * x);
    const Matrix gamma = -(x.transpose() * aax);
    // Lambda_i X_i = X_i (W_i^T X_i) + W_i (X_i^T X_i)
    const Matrix lam_x = x * (w.transpose() * x) + w * (x.transpose() * x);
    cert.local_residuals.push_back((aax + x * gamma + lam_x).norm());
    lambda_z += x * (w.transpose() * z.basis()) + w * (x.transpose() * z.basis());
    cert.feasibility.push_back(projection_distance(node.x, z).distance);
    cert.gamma.push_back(gamma);
  }
  cert.lambda_residual = (lambda_z - z.basis() * cert.theta).norm();
  return cert;
}

double singular_value_error(const Vector& sigma, const GroundTruth& truth) {
  if (sigma.size() > truth.singular_values.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "more Ritz values than ground-truth values");
  }
  const Vector ref = truth.singular_values.head(sigma.size());
  return (sigma - ref).norm() / ref.norm();
}

SvdRecovery ritz_from_gram(const Matrix& gram, const StiefelPoint& z, const GroundTruth* truth) {
  require_shape(gram, z.p(), z.p(), "Ritz Gram");
  const Matrix sym = 0.5 * (gram + gram.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kNonFinite, "eigendecomposition of the Ritz Gram failed");
  }
  const Index p = z.p();
  Vector sigma(p);
  Matrix v(p, p);
  bool clipped = false;
  for (Index j = 0; j < p; ++j) {
    double lambda = eig.eigenvalues()(p - 1 - j);
    if (lambda < 0.0) {
      clipped = true;
      lambda = 0.0;
    }
    sigma(j) = std::sqrt(lambda);
    v.col(j) = eig.eigenvectors().col(p - 1 - j);
  }
  SvdRecovery out{sigma, orthonormalize(z.basis() * v), std::nullopt, clipped};
  // orthonormalize may flip signs; restore the eigenvector orientation.
  Matrix u = out.u.basis();
  const Matrix raw = z.basis() * v;
  for (Index j = 0; j < p; ++j) {
    if (u.col(j).dot(raw.col(j)) < 0.0) u.col(j) = -u.col(j);
  }
  out.u = StiefelPoint::from_orthonormal(std::move(u));
  if (truth) out.rel_error = singular_value_error(sigma, *truth);
  return out;
}

SvdRecovery recover_svd(std::span<const Matrix> blocks, const StiefelPoint& z, Fabric& net,
                        const GroundTruth* truth) {
  if (static_cast<int>(blocks.size()) != net.size()) {
    throw Error(ErrorCode::kInvalidConfig, "fabric size differs from block count");
  }
  std::optional<SvdRecovery> out;
  run_on_nodes(net, [&](int i) {
    const Matrix& a = blocks[static_cast<std::size_t>(i)];
    if (a.rows() != z.n()) throw Error(ErrorCode::kDimensionMismatch, "recover_svd: block rows");
    const Matrix atz = a.transpose() * z.basis();
    const Matrix gram = net.all_reduce_sum(i, Matrix(atz.transpose() * atz), "svd");
    if (i == 0) out = ritz_from_gram(gram, z, truth);
  });
  return std::move(*out);
}

DapsResult run_daps(std::vector<Matrix> blocks, const DapsConfig& cfg, Fabric& net,
                    const RunOptions& options) {
  validate(cfg);
  check_blocks(blocks, cfg);
  const int d = static_cast<int>(blocks.size());
  if (net.size() != d) throw Error(ErrorCode::kInvalidConfig, "fabric size differs from node count");
  if (options.audit && !(net.options().record_trace && net.options().record_payloads)) {
    throw Error(ErrorCode::kInvalidConfig, "wire audit needs a fabric recording payloads");
  }
  const Index n = blocks.front().rows();
  const Index p = cfg.p;

  // Node states live here so the observer can read them at barriers, while
  // every worker is parked; outside barriers only worker i touches nodes[i].
  const StiefelPoint z0 = initial_subspace(n, p, cfg.seed);
  std::vector<NodeState> nodes;
  nodes.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    nodes.push_back(NodeState{i, std::move(blocks[static_cast<std::size_t>(i)]), z0, Matrix(), 1.0,
                              0.0, 0.0, {0.0}});
  }
  double observer_fro2 = 0.0;
  for (const auto& s : nodes) observer_fro2 += s.a.squaredNorm();
  std::vector<LocalStepReport> step_reports(static_cast<std::size_t>(d));
  std::vector<char> restarted(static_cast<std::size_t>(d), 0);
  std::optional<StiefelPoint> z_pub;
  std::optional<StiefelPoint> z_prev;
  double objective_pub = 0.0;
  std::size_t trace_cursor = 0;

  DapsResult result{z0, {}, {}, 0, false, observer_fro2, {}, {}};
  if (options.audit) result.audit = WireAudit{};

  const auto observe = [&](int k) {
    const std::span<const NodeState> view(nodes);
    const StiefelPoint& z = *z_pub;

    IterationRecord rec;
    rec.k = k;
    rec.objective = -0.5 * objective_pub;
    Matrix aatz = Matrix::Zero(n, p);
    Matrix gram = Matrix::Zero(p, p);
    for (const auto& s : view) {
      const Matrix atz = s.a.transpose() * z.basis();
      aatz += s.a * atz;
      gram += atz.transpose() * atz;
    }
    rec.kkt_raw = project_out(z.basis(), aatz).norm();
    rec.scaled_kkt = rec.kkt_raw / observer_fro2;
    if (options.truth) rec.rel_error = *ritz_from_gram(gram, z, options.truth).rel_error;
    if (options.evaluate_lagrangian) rec.augmented_lagrangian = augmented_lagrangian(view, z);
    rec.comm_bytes = net.stats().total_bytes;
    for (int i = 0; i < d; ++i) {
      const auto& s = view[static_cast<std::size_t>(i)];
      rec.dist.push_back(s.dist);
      rec.beta.push_back(s.beta);
      if (k == 0) {
        rec.inner_iters.push_back(0);
        continue;
      }
      const auto& rep = step_reports[static_cast<std::size_t>(i)];
      rec.inner_iters.push_back(rep.inner_iterations);
      if (rep.conditions && !rep.conditions->all_hold()) rec.conditions_ok = false;
      if (restarted[static_cast<std::size_t>(i)]) rec.z_restarted = true;
    }
    if (k > 0 && (cfg.verify_conditions || cfg.strict_conditions)) {
      const ConditionReport zc = verify_conditions(q_operator(view), *z_prev, z, 0.0, 0.0,
                                                   cfg.condition_constants, Subproblem::kGlobal);
      rec.realized_c2 = zc.realized_c2;
      if (!zc.all_hold()) rec.conditions_ok = false;
    }
    if (result.audit) {
      const auto fresh = net.trace_since(trace_cursor);
      trace_cursor += fresh.size();
      std::vector<PrivateView> views;
      for (const auto& s : view) views.push_back({s.node_id, &s.a, &s.x.basis(), &s.w, s.beta});
      audit_messages(fresh, views, *result.audit);
    }
    z_prev = z;
    if (options.on_record) options.on_record(rec);
    result.records.push_back(std::move(rec));
  };

  run_on_nodes(net, [&](int i) {
    const auto slot = static_cast<std::size_t>(i);
    NodeState& node = nodes[slot];
    StiefelPoint z = z0;
    node.norm_a2 = block_norm2(node.a, cfg.norm_power_steps, derive_seed(cfg.seed, kNormSalt + i));
    double fro2 = 0.0;
    if (cfg.theory_mode) fro2 = masked_sum(net, i, node.a.squaredNorm(), cfg.seed, 0);
    node.beta = initial_beta(node.norm_a2, i, d, fro2, cfg);
    node.w = update_multiplier(node.a, node.x);
    const double q_scale = 1.0 / masked_sum(net, i, node.beta, cfg.seed, 1);

    double s = net.all_reduce_sum(i, (node.a.transpose() * z.basis()).squaredNorm(), "objective");
    net.synchronize(i, [&] {
      z_pub = z;
      objective_pub = s;
      observe(0);
    });

    for (int k = 0;; ++k) {
      LocalStepReport rep = local_step(node, z, cfg, k);
      double dist = 0.0;
      if (cfg.beta_measure_point == BetaMeasurePoint::kBeforeGlobalStep) {
        dist = projection_distance(node.x, z).distance;
      }
      if (i == 0) net.note_public("Z", z.basis());
      GlobalStepResult g = global_step(node, z, cfg, net, q_scale, k);
      if (cfg.beta_measure_point == BetaMeasurePoint::kAfterGlobalStep) {
        dist = projection_distance(node.x, g.z).distance;
      }
      node.dist = dist;
      node.dist_history.push_back(dist);
      const double s_new =
          net.all_reduce_sum(i, (node.a.transpose() * g.z.basis()).squaredNorm(), "objective");
      step_reports[slot] = std::move(rep);
      restarted[slot] = g.restarted ? 1 : 0;
      net.synchronize(i, [&] {
        z_pub = g.z;
        objective_pub = s_new;
        observe(k + 1);
      });
      if (!cfg.theory_mode) node.beta = adapt_beta(node.beta, k + 1, node.dist_history, cfg);
      const TerminationDecision stop = check_termination(s, s_new, cfg.rel_tol, k + 1, cfg.max_iter);
      z = std::move(g.z);
      s = s_new;
      if (stop.stop) {
        if (i == 0) {
          result.iterations = k + 1;
          result.budget_exhausted = stop.budget_exhausted;
        }
        break;
      }
    }
    if (i == 0) result.z = std::move(z);
  });

  result.nodes = std::move(nodes);
  for (const auto& rec : result.records) {
    if (rec.k == 0) result.initial_betas = rec.beta;
  }
  return result;
}

}  // namespace daps
