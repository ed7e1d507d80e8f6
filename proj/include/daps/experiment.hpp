// SPDX-License-Identifier: Apache-2.0
//
// Runs of one algorithm on one synthetic instance, and parameter sweeps over
// many such cells. Every cell writes records.csv and summary.json into its
// own directory; the sweep summary table is rebuilt from those files alone.
#pragma once

#include "daps/baselines.hpp"
#include "daps/daps.hpp"
#include "daps/data.hpp"
#include "daps/netsim.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace daps {

enum class Algorithm { kDaps, kSlrpgn, kSsi };
std::string_view to_string(Algorithm a) noexcept;
Algorithm algorithm_from_string(std::string_view s);

struct ProblemSpec {
  Index n = 200;
  Index m = 2000;
  Index p = 5;
  int d = 4;
  double xi = 1.1;
  std::uint64_t seed = 0;
};

struct RunRequest {
  Algorithm algorithm = Algorithm::kDaps;
  ProblemSpec problem;
  DapsConfig daps;          ///< p and seed are taken from `problem`
  BaselineConfig baseline;  ///< p and seed are taken from `problem`
  Schedule schedule = Schedule::kButterfly;
  bool record_trace = false;  ///< wire payloads (DAPS) or snapshots (baselines)
};

struct RunOutcome {
  std::vector<IterationRecord> records;
  int iterations = 0;
  bool budget_exhausted = false;
  double norm_a_fro2 = 0.0;
  double wall_seconds = 0.0;
  CommStats comm;
  std::optional<Vector> sigma;  ///< recovered singular values
  std::optional<double> rel_error;
  std::optional<WireAudit> audit;
  std::optional<BaselineTrace> baseline_trace;
  std::vector<MessageRecord> wire_trace;
  std::vector<double> initial_betas;
};

/// Runs the requested algorithm on `blocks`, which must match problem.d.
RunOutcome run_algorithm(const RunRequest& req, std::vector<Matrix> blocks,
                         const GroundTruth* truth);

/// Generates the synthetic instance for req.problem, partitions it and runs.
RunOutcome run_synthetic(const RunRequest& req);

nlohmann::json summary_json(const RunRequest& req, const RunOutcome& out);

/// Writes records.csv and summary.json (and the trace when recorded).
void write_run(const std::filesystem::path& dir, const RunRequest& req, const RunOutcome& out);

struct ExperimentPlan {
  std::string scenario = "fixed";  ///< "fixed" or "sweep"
  std::string sweep_param;         ///< n | m | p | xi | d
  std::vector<double> sweep_points;
  ProblemSpec base;
  std::vector<std::uint64_t> seeds{0};
  std::vector<Algorithm> algorithms{Algorithm::kDaps};
  DapsConfig daps;
  BaselineConfig baseline;
  Schedule schedule = Schedule::kButterfly;
  std::filesystem::path out = "results";
};

/// Throws InvalidConfig on an inconsistent plan.
void validate(const ExperimentPlan& plan);
ExperimentPlan plan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentPlan& plan);

struct CellStatus {
  std::string id;
  std::string param;
  double value = 0.0;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::kDaps;
  bool ok = false;
  std::string error;
};

/// Runs every cell sequentially into plan.out, writes manifest.json and the
/// summary table. A failing cell is marked failed and the sweep continues.
std::vector<CellStatus> run_experiment(const ExperimentPlan& plan);

/// Summary table (CSV) computed from manifest.json and the per-cell logs;
/// also written to dir/summary.csv.
std::string build_summary(const std::filesystem::path& dir);

}  // namespace daps
