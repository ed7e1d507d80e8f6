// SPDX-License-Identifier: Apache-2.0
#include "daps/theory.hpp"

#include "daps/error.hpp"

#include <algorithm>
#include <cmath>

namespace daps {

AssumptionConstants assumption_constants(std::span<const double> betas, Index p,
                                         double norm_a_fro2, const ConditionConstants& cc,
                                         std::span<const double> deltas) {
  if (betas.empty()) throw Error(ErrorCode::kInvalidConfig, "no penalties");
  if (p < 1) throw Error(ErrorCode::kInvalidConfig, "p must be positive");
  if (!deltas.empty() && deltas.size() != betas.size()) {
    throw Error(ErrorCode::kInvalidConfig, "one delta per node expected");
  }
  for (double b : betas) {
    if (!(b > 0.0) || !std::isfinite(b)) {
      throw Error(ErrorCode::kInvalidConfig, "penalties must be positive and finite");
    }
  }
  const auto [lo, hi] = std::minmax_element(betas.begin(), betas.end());
  const double d = static_cast<double>(betas.size());

  AssumptionConstants out;
  out.rho = *hi / *lo;
  const double rd = out.rho * d;
  out.sigma_lower = std::sqrt(1.0 - 1.0 / (2.0 * rd));
  out.delta_bound = out.sigma_lower / (2.0 * std::sqrt(rd));

  const double s2 = out.sigma_lower * out.sigma_lower;
  const double sqrt_p = std::sqrt(static_cast<double>(p));
  const double root = 1.0 + std::sqrt(2.0 * rd);
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const double delta = deltas.empty() ? cc.delta : deltas[i];
    const double denom = out.sigma_lower - 2.0 * std::sqrt(rd) * delta;
    if (!(delta > 0.0) || !(denom > 0.0)) {
      throw Error(ErrorCode::kDeltaOutOfRange,
                  "delta_" + std::to_string(i) + " = " + std::to_string(delta) +
                      " must lie in (0, " + std::to_string(out.delta_bound) + ")");
    }
    const double omega = std::max({cc.c1_prime,
                                   12.0 * rd * sqrt_p / (cc.c1 * s2),
                                   4.0 * std::sqrt(2.0) * root / denom,
                                   16.0 * rd * sqrt_p,
                                   4.0 * root / (cc.c1 * s2 * rd)});
    out.omega.push_back(omega);
    out.beta_floor.push_back(omega * norm_a_fro2);
  }
  return out;
}

std::vector<double> theory_betas(int d, Index p, double norm_a_fro2,
                                 const ConditionConstants& cc) {
  if (d < 1) throw Error(ErrorCode::kInvalidConfig, "need at least one node");
  const std::vector<double> equal(static_cast<std::size_t>(d), 1.0);
  return assumption_constants(equal, p, norm_a_fro2, cc).beta_floor;
}

DescentReport descent_monitor(std::span<const IterationRecord> records) {
  DescentReport out;
  if (records.empty()) {
    out.enabled = false;
    out.note = "empty run";
    return out;
  }
  for (const auto& rec : records) {
    if (rec.beta != records.front().beta) {
      out.enabled = false;
      out.note = "penalties change during the run; L is not comparable across updates";
      return out;
    }
    if (std::isnan(rec.augmented_lagrangian)) {
      out.enabled = false;
      out.note = "augmented Lagrangian not recorded";
      return out;
    }
  }
  out.slack = 1e-10 * (1.0 + std::abs(records.front().augmented_lagrangian));
  for (std::size_t k = 1; k < records.size(); ++k) {
    const double prev = records[k - 1].augmented_lagrangian;
    const double now = records[k].augmented_lagrangian;
    if (now > prev + out.slack) out.violations.push_back({records[k].k, -1, now, prev + out.slack});
  }
  return out;
}

DistanceReport distance_bound_check(std::span<const IterationRecord> records,
                                    std::span<const double> beta_floor) {
  constexpr double kSlack = 1e-10;
  DistanceReport out;
  for (const auto& rec : records) {
    if (rec.beta.empty()) continue;
    const auto [lo, hi] = std::minmax_element(rec.beta.begin(), rec.beta.end());
    const double bound = 1.0 / ((*hi / *lo) * static_cast<double>(rec.beta.size()));
    out.bound = std::max(out.bound, bound + kSlack);
    for (std::size_t i = 0; i < rec.dist.size(); ++i) {
      const double d2 = rec.dist[i] * rec.dist[i];
      if (d2 > bound + kSlack) {
        out.violations.push_back({rec.k, static_cast<int>(i), d2, bound + kSlack});
      }
      if (!beta_floor.empty() && i < beta_floor.size() &&
          rec.beta[i] < beta_floor[i] * (1.0 - 1e-12)) {
        out.assumption_satisfied = false;
      }
    }
  }
  if (!out.assumption_satisfied) {
    out.note = "assumption unsatisfied: penalties below the floor, violations are expected";
  }
  return out;
}

ComplexityMonitor complexity_envelope(std::span<const IterationRecord> records) {
  ComplexityMonitor out;
  double best = 0.0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& rec = records[k];
    double dsum = 0.0;
    for (double di : rec.dist) dsum += di * di;
    const double nodes = rec.dist.empty() ? 1.0 : static_cast<double>(rec.dist.size());
    const double v = rec.kkt_raw * rec.kkt_raw + dsum / nodes;
    best = k == 0 ? v : std::min(best, v);
    out.v.push_back(v);
    out.running_min.push_back(best);
    const double env = best * static_cast<double>(k + 1);
    out.envelope.push_back(env);
    out.envelope_sup = std::max(out.envelope_sup, env);
    if (env > out.envelope.front() && out.bounded_by_first) {
      out.bounded_by_first = false;
      out.first_exceeding_n = static_cast<int>(k + 1);
    }
  }
  return out;
}

TheoryReport theory_report(std::span<const IterationRecord> records,
                           const AssumptionConstants& constants) {
  return {constants, descent_monitor(records),
          distance_bound_check(records, constants.beta_floor), complexity_envelope(records)};
}

namespace {

nlohmann::json violations_json(const std::vector<Violation>& vs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : vs) {
    arr.push_back({{"k", v.k}, {"node", v.node}, {"value", v.value}, {"limit", v.limit}});
  }
  return arr;
}

}  // namespace

nlohmann::json to_json(const TheoryReport& r) {
  nlohmann::json j;
  j["constants"] = {{"rho", r.constants.rho},
                    {"sigma_lower", r.constants.sigma_lower},
                    {"delta_bound", r.constants.delta_bound},
                    {"omega", r.constants.omega},
                    {"beta_floor", r.constants.beta_floor}};
  j["descent"] = {{"enabled", r.descent.enabled},
                  {"note", r.descent.note},
                  {"slack", r.descent.slack},
                  {"violations", violations_json(r.descent.violations)}};
  j["distance_bound"] = {{"bound", r.distance.bound},
                         {"assumption_satisfied", r.distance.assumption_satisfied},
                         {"note", r.distance.note},
                         {"violations", violations_json(r.distance.violations)}};
  j["complexity"] = {{"v", r.complexity.v},
                     {"envelope", r.complexity.envelope},
                     {"envelope_sup", r.complexity.envelope_sup},
                     {"bounded_by_first", r.complexity.bounded_by_first},
                     {"first_exceeding_n", r.complexity.first_exceeding_n}};
  return j;
}

}  // namespace daps
