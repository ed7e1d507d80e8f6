// SPDX-License-Identifier: Apache-2.0
#include "daps/experiment.hpp"

#include "daps/error.hpp"
#include "daps/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace daps {

std::string_view to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::kDaps: return "daps";
    case Algorithm::kSlrpgn: return "slrpgn";
    case Algorithm::kSsi: return "ssi";
  }
  return "?";
}

Algorithm algorithm_from_string(std::string_view s) {
  if (s == "daps") return Algorithm::kDaps;
  if (s == "slrpgn") return Algorithm::kSlrpgn;
  if (s == "ssi") return Algorithm::kSsi;
  throw Error(ErrorCode::kInvalidConfig, "unknown algorithm '" + std::string(s) + "'");
}

RunOutcome run_algorithm(const RunRequest& req, std::vector<Matrix> blocks,
                         const GroundTruth* truth) {
  const ProblemSpec& pr = req.problem;
  if (static_cast<int>(blocks.size()) != pr.d) {
    throw Error(ErrorCode::kInvalidConfig, "block count differs from d");
  }
  Fabric::Options fopts{req.schedule, req.record_trace && req.algorithm == Algorithm::kDaps,
                        req.record_trace && req.algorithm == Algorithm::kDaps};
  Fabric net(pr.d, fopts);
  RunOutcome out;
  for (const auto& a : blocks) out.norm_a_fro2 += a.squaredNorm();
  const auto t0 = std::chrono::steady_clock::now();
  const Matrix x0 = initial_subspace(blocks.front().rows(), pr.p, pr.seed).basis();

  StiefelPoint final_z = StiefelPoint::from_orthonormal(x0);
  std::vector<Matrix> kept;
  if (req.algorithm == Algorithm::kDaps) {
    DapsConfig cfg = req.daps;
    cfg.p = pr.p;
    cfg.seed = pr.seed;
    RunOptions opts;
    opts.truth = truth;
    opts.audit = req.record_trace;
    DapsResult r = run_daps(std::move(blocks), cfg, net, opts);
    out.records = std::move(r.records);
    out.iterations = r.iterations;
    out.budget_exhausted = r.budget_exhausted;
    out.audit = std::move(r.audit);
    out.initial_betas = r.initial_betas;
    final_z = r.z;
    for (auto& s : r.nodes) kept.push_back(std::move(s.a));
  } else {
    BaselineConfig cfg = req.baseline;
    cfg.p = pr.p;
    cfg.seed = pr.seed;
    kept = blocks;
    BaselineResult r = req.algorithm == Algorithm::kSlrpgn
                           ? run_parallel_slrpgn(std::move(blocks), x0, cfg, net, req.record_trace,
                                                 truth)
                           : run_parallel_ssi(std::move(blocks), StiefelPoint::from_orthonormal(x0),
                                              cfg, net, req.record_trace, truth);
    out.records = std::move(r.records);
    out.iterations = r.iterations;
    out.budget_exhausted = r.budget_exhausted;
    out.baseline_trace = std::move(r.trace);
    final_z = r.x;
  }
  out.comm = net.stats();
  out.wire_trace = net.trace();
  // Final singular values go through their own fabric so the run's byte
  // counts cover the iteration only.
  Fabric svd_net(pr.d);
  SvdRecovery svd = recover_svd(kept, final_z, svd_net, truth);
  out.sigma = svd.sigma;
  out.rel_error = svd.rel_error;
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

RunOutcome run_synthetic(const RunRequest& req) {
  const ProblemSpec& pr = req.problem;
  const SyntheticProblem prob = generate_synthetic({pr.n, pr.m, pr.xi, pr.seed});
  return run_algorithm(req, partition_columns(prob.a, pr.d, pr.p), &prob.truth);
}

nlohmann::json summary_json(const RunRequest& req, const RunOutcome& out) {
  const ProblemSpec& pr = req.problem;
  nlohmann::json j;
  j["algorithm"] = std::string(to_string(req.algorithm));
  j["problem"] = {{"n", pr.n}, {"m", pr.m}, {"p", pr.p}, {"d", pr.d}, {"xi", pr.xi},
                  {"seed", pr.seed}};
  j["schedule"] = std::string(to_string(req.schedule));
  if (req.algorithm == Algorithm::kDaps) {
    j["config"] = to_json(req.daps);
  } else {
    j["config"] = to_json(req.baseline);
  }
  j["iterations"] = out.iterations;
  j["budget_exhausted"] = out.budget_exhausted;
  j["norm_a_fro2"] = out.norm_a_fro2;
  if (!out.records.empty()) {
    const auto& last = out.records.back();
    j["final"] = {{"objective", last.objective},
                  {"scaled_kkt", last.scaled_kkt},
                  {"kkt_raw", last.kkt_raw}};
  }
  if (out.sigma) j["sigma"] = std::vector<double>(out.sigma->data(), out.sigma->data() + out.sigma->size());
  j["rel_error"] = out.rel_error ? nlohmann::json(*out.rel_error) : nlohmann::json();
  j["initial_betas"] = out.initial_betas;
  nlohmann::json tags = nlohmann::json::object();
  for (const auto& [tag, s] : out.comm.by_tag) {
    tags[tag] = {{"calls", s.calls}, {"bytes", s.bytes}, {"rounds", s.rounds}};
  }
  j["comm"] = {{"total_bytes", out.comm.total_bytes},
               {"rounds", out.comm.rounds},
               {"collectives", out.comm.collectives},
               {"path_bytes", out.comm.path_bytes},
               {"bytes_sent_per_node", out.comm.bytes_sent_per_node},
               {"by_tag", tags}};
  if (out.audit) {
    j["wire_audit"] = {{"messages_scanned", out.audit->messages_scanned},
                       {"payloads_scanned", out.audit->payloads_scanned},
                       {"findings", out.audit->findings.size()}};
  }
  j["wall_seconds"] = out.wall_seconds;
  return j;
}

void write_run(const std::filesystem::path& dir, const RunRequest& req, const RunOutcome& out) {
  std::filesystem::create_directories(dir);
  write_records_csv(dir / "records.csv", out.records);
  write_json(dir / "summary.json", summary_json(req, out));
  if (out.baseline_trace) save_trace(dir / "trace", *out.baseline_trace);
}

namespace {

const std::vector<std::string> kSweepParams = {"n", "m", "p", "xi", "d"};

void apply_point(ProblemSpec& pr, const std::string& param, double v) {
  const auto as_int = [&](const char* what) -> long long {
    if (v != std::floor(v) || v < 1) {
      throw Error(ErrorCode::kInvalidConfig, std::string(what) + " sweep points must be positive integers");
    }
    return static_cast<long long>(v);
  };
  if (param == "n") pr.n = as_int("n");
  else if (param == "m") pr.m = as_int("m");
  else if (param == "p") pr.p = as_int("p");
  else if (param == "d") pr.d = static_cast<int>(as_int("d"));
  else if (param == "xi") pr.xi = v;
  else throw Error(ErrorCode::kInvalidConfig, "unknown sweep parameter '" + param + "'");
}

std::string cell_id(std::size_t point, std::uint64_t seed, Algorithm a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "cell%03zu_seed%llu_%s", point,
                static_cast<unsigned long long>(seed), std::string(to_string(a)).c_str());
  return buf;
}

}  // namespace

void validate(const ExperimentPlan& plan) {
  if (plan.scenario != "fixed" && plan.scenario != "sweep") {
    throw Error(ErrorCode::kInvalidConfig, "scenario must be 'fixed' or 'sweep'");
  }
  if (plan.scenario == "sweep") {
    if (std::find(kSweepParams.begin(), kSweepParams.end(), plan.sweep_param) == kSweepParams.end()) {
      throw Error(ErrorCode::kInvalidConfig, "sweep parameter must be one of n, m, p, xi, d");
    }
    if (plan.sweep_points.empty()) throw Error(ErrorCode::kInvalidConfig, "sweep points are empty");
    for (double v : plan.sweep_points) {
      ProblemSpec pr = plan.base;
      apply_point(pr, plan.sweep_param, v);
    }
  }
  if (plan.seeds.empty()) throw Error(ErrorCode::kInvalidConfig, "no seeds");
  if (plan.algorithms.empty()) throw Error(ErrorCode::kInvalidConfig, "no algorithms");
  validate(plan.daps);
  validate(plan.baseline);
}

ExperimentPlan plan_from_json(const nlohmann::json& j) {
  ExperimentPlan plan;
  try {
    for (const auto& [key, value] : j.items()) {
      static const std::vector<std::string> known = {
          "scenario", "sweep_param", "sweep_points", "base", "seeds", "algorithms",
          "daps", "baseline", "schedule", "out"};
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw Error(ErrorCode::kInvalidConfig, "unknown plan key '" + key + "'");
      }
    }
    if (j.contains("scenario")) plan.scenario = j["scenario"].get<std::string>();
    if (j.contains("sweep_param")) plan.sweep_param = j["sweep_param"].get<std::string>();
    if (j.contains("sweep_points")) plan.sweep_points = j["sweep_points"].get<std::vector<double>>();
    if (const auto it = j.find("base"); it != j.end()) {
      for (const auto& [key, value] : it->items()) {
        if (key == "n") plan.base.n = value.get<Index>();
        else if (key == "m") plan.base.m = value.get<Index>();
        else if (key == "p") plan.base.p = value.get<Index>();
        else if (key == "d") plan.base.d = value.get<int>();
        else if (key == "xi") plan.base.xi = value.get<double>();
        else throw Error(ErrorCode::kInvalidConfig, "unknown base key '" + key + "'");
      }
    }
    if (j.contains("seeds")) plan.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("algorithms")) {
      plan.algorithms.clear();
      for (const auto& a : j["algorithms"]) plan.algorithms.push_back(algorithm_from_string(a.get<std::string>()));
    }
    if (j.contains("daps")) plan.daps = daps_config_from_json(j["daps"]);
    if (j.contains("baseline")) plan.baseline = baseline_config_from_json(j["baseline"]);
    if (j.contains("schedule")) plan.schedule = schedule_from_string(j["schedule"].get<std::string>());
    if (j.contains("out")) plan.out = j["out"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("experiment plan: ") + e.what());
  }
  validate(plan);
  return plan;
}

nlohmann::json to_json(const ExperimentPlan& plan) {
  nlohmann::json algos = nlohmann::json::array();
  for (auto a : plan.algorithms) algos.push_back(std::string(to_string(a)));
  return {{"scenario", plan.scenario},
          {"sweep_param", plan.sweep_param},
          {"sweep_points", plan.sweep_points},
          {"base", {{"n", plan.base.n}, {"m", plan.base.m}, {"p", plan.base.p},
                    {"d", plan.base.d}, {"xi", plan.base.xi}}},
          {"seeds", plan.seeds},
          {"algorithms", algos},
          {"daps", to_json(plan.daps)},
          {"baseline", to_json(plan.baseline)},
          {"schedule", std::string(to_string(plan.schedule))},
          {"out", plan.out.string()}};
}

std::vector<CellStatus> run_experiment(const ExperimentPlan& plan) {
  validate(plan);
  std::filesystem::create_directories(plan.out);
  std::vector<double> points = plan.sweep_points;
  std::string param = plan.sweep_param;
  if (plan.scenario == "fixed") {
    points = {0.0};
    param = "";
  }
  std::vector<CellStatus> cells;
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    for (std::uint64_t seed : plan.seeds) {
      for (Algorithm algo : plan.algorithms) {
        CellStatus cell{cell_id(pi, seed, algo), param, points[pi], seed, algo, false, {}};
        try {
          RunRequest req;
          req.algorithm = algo;
          req.problem = plan.base;
          req.problem.seed = seed;
          if (!param.empty()) apply_point(req.problem, param, points[pi]);
          req.daps = plan.daps;
          req.baseline = plan.baseline;
          req.schedule = plan.schedule;
          write_run(plan.out / cell.id, req, run_synthetic(req));
          cell.ok = true;
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
        cells.push_back(std::move(cell));
      }
    }
  }
  nlohmann::json manifest;
  manifest["plan"] = to_json(plan);
  manifest["cells"] = nlohmann::json::array();
  for (const auto& c : cells) {
    manifest["cells"].push_back({{"id", c.id},
                                 {"param", c.param},
                                 {"value", c.value},
                                 {"seed", c.seed},
                                 {"algorithm", std::string(to_string(c.algorithm))},
                                 {"ok", c.ok},
                                 {"error", c.error}});
  }
  write_json(plan.out / "manifest.json", manifest);
  build_summary(plan.out);
  return cells;
}

std::string build_summary(const std::filesystem::path& dir) {
  const nlohmann::json manifest = read_json(dir / "manifest.json");
  std::string out = "cell,param,value,seed,algorithm,status,iterations,final_scaled_kkt,rel_error,comm_bytes\n";
  try {
    for (const auto& c : manifest.at("cells")) {
      const std::string id = c.at("id").get<std::string>();
      out += id + ',' + c.at("param").get<std::string>() + ',' +
             format_double(c.at("value").get<double>()) + ',' +
             std::to_string(c.at("seed").get<std::uint64_t>()) + ',' +
             c.at("algorithm").get<std::string>() + ',';
      if (!c.at("ok").get<bool>()) {
        out += "failed,,,,\n";
        continue;
      }
      const auto records = read_records_csv(dir / id / "records.csv");
      const nlohmann::json summary = read_json(dir / id / "summary.json");
      const auto& last = records.back();
      const auto& rel = summary.at("rel_error");
      out += "ok," + std::to_string(last.k) + ',' + format_double(last.scaled_kkt) + ',' +
             (rel.is_null() ? std::string("nan") : format_double(rel.get<double>())) + ',' +
             std::to_string(last.comm_bytes) + '\n';
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, "manifest: " + std::string(e.what()));
  }
  write_text(dir / "summary.csv", out);
  return out;
}

}  // namespace daps
