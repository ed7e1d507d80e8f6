// SPDX-License-Identifier: Apache-2.0
#include "daps/error.hpp"
#include "daps/experiment.hpp"
#include "daps/report.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace daps;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_double(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

ExperimentPlan tiny_plan(const fs::path& out) {
  ExperimentPlan plan;
  plan.scenario = "sweep";
  plan.sweep_param = "xi";
  plan.sweep_points = {1.2, 1.1};
  plan.base = {16, 48, 2, 1, 1.2, 0};
  plan.seeds = {1, 2};
  plan.algorithms = {Algorithm::kDaps, Algorithm::kSsi};
  plan.daps.max_iter = 300;
  plan.baseline.max_iter = 300;
  plan.out = out;
  return plan;
}

}  // namespace

TEST(FormatDouble, ShortestExactAndNonFinite) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(RecordsCsv, RoundTripIsExact) {
  const auto prob = generate_synthetic({14, 42, 1.2, 3});
  DapsConfig cfg;
  cfg.p = 2;
  cfg.verify_conditions = true;
  Fabric net(3);
  RunOptions opts;
  opts.truth = &prob.truth;
  const auto run = run_daps(partition_columns(prob.a, 3, 2), cfg, net, opts);
  const auto dir = temp_dir("daps_csv_roundtrip");
  write_records_csv(dir / "records.csv", run.records);
  const auto back = read_records_csv(dir / "records.csv");
  ASSERT_EQ(back.size(), run.records.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    const auto& a = run.records[k];
    const auto& b = back[k];
    EXPECT_EQ(a.k, b.k);
    EXPECT_TRUE(same_double(a.objective, b.objective));
    EXPECT_TRUE(same_double(a.scaled_kkt, b.scaled_kkt));
    EXPECT_TRUE(same_double(a.kkt_raw, b.kkt_raw));
    EXPECT_TRUE(same_double(a.rel_error, b.rel_error));
    EXPECT_TRUE(same_double(a.augmented_lagrangian, b.augmented_lagrangian));
    EXPECT_TRUE(same_double(a.realized_c2, b.realized_c2));
    EXPECT_EQ(a.comm_bytes, b.comm_bytes);
    EXPECT_EQ(a.conditions_ok, b.conditions_ok);
    EXPECT_EQ(a.z_restarted, b.z_restarted);
    EXPECT_EQ(a.dist, b.dist);
    EXPECT_EQ(a.beta, b.beta);
    EXPECT_EQ(a.inner_iters, b.inner_iters);
  }
  EXPECT_EQ(records_csv(back), slurp(dir / "records.csv"));
  fs::remove_all(dir);
}

TEST(RecordsCsv, MalformedRowsAreRejected) {
  const auto dir = temp_dir("daps_csv_bad");
  write_text(dir / "bad.csv", "k,objective\n0,abc\n");
  EXPECT_THROW(read_records_csv(dir / "bad.csv"), Error);
  EXPECT_THROW(read_records_csv(dir / "missing.csv"), Error);
  fs::remove_all(dir);
}

TEST(ConfigJson, DapsRoundTrip) {
  DapsConfig cfg;
  cfg.p = 7;
  cfg.beta0_coeff = 0.3;
  cfg.theta = 0.2;
  cfg.eps_x = 1e-3;
  cfg.z_solver = ZSolver::kSsi;
  cfg.beta_measure_point = BetaMeasurePoint::kBeforeGlobalStep;
  cfg.condition_constants.delta = 0.05;
  cfg.theory_mode = true;
  cfg.seed = 99;
  const auto back = daps_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  EXPECT_EQ(back.z_solver, ZSolver::kSsi);
  EXPECT_EQ(back.seed, 99u);
}

TEST(ConfigJson, BaselineRoundTripAndPartialOverride) {
  BaselineConfig cfg;
  cfg.p = 4;
  cfg.ortho_every = 3;
  cfg.max_snapshots = 6;
  EXPECT_EQ(to_json(baseline_config_from_json(to_json(cfg))), to_json(cfg));
  const auto partial = baseline_config_from_json(nlohmann::json{{"ortho_every", 5}}, cfg);
  EXPECT_EQ(partial.ortho_every, 5);
  EXPECT_EQ(partial.p, 4);
}

TEST(ConfigJson, UnknownKeysAndBadValuesAreRejected) {
  EXPECT_THROW(daps_config_from_json(nlohmann::json{{"bogus", 1}}), Error);
  EXPECT_THROW(baseline_config_from_json(nlohmann::json{{"bogus", 1}}), Error);
  EXPECT_THROW(daps_config_from_json(nlohmann::json{{"z_solver", "lanczos"}}), Error);
  EXPECT_THROW(daps_config_from_json(nlohmann::json{{"theta", "big"}}), Error);
}

TEST(Experiment, PlanRoundTripAndValidation) {
  const auto plan = tiny_plan("out");
  EXPECT_EQ(to_json(plan_from_json(to_json(plan))), to_json(plan));
  auto bad = plan;
  bad.sweep_points.clear();
  EXPECT_THROW(validate(bad), Error);
  EXPECT_THROW(plan_from_json(nlohmann::json{{"scenario", "sweep"}, {"extra", 1}}), Error);
  EXPECT_THROW(algorithm_from_string("dpca"), Error);
}

TEST(Experiment, RepeatedSweepsAreByteIdentical) {
  const auto a = temp_dir("daps_sweep_a");
  const auto b = temp_dir("daps_sweep_b");
  const auto ca = run_experiment(tiny_plan(a));
  const auto cb = run_experiment(tiny_plan(b));
  ASSERT_EQ(ca.size(), 8u);
  ASSERT_EQ(ca.size(), cb.size());
  for (std::size_t c = 0; c < ca.size(); ++c) {
    EXPECT_TRUE(ca[c].ok) << ca[c].error;
    EXPECT_EQ(slurp(a / ca[c].id / "records.csv"), slurp(b / cb[c].id / "records.csv"));
  }
  EXPECT_EQ(slurp(a / "summary.csv"), slurp(b / "summary.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Experiment, SummaryIsRegeneratedFromStoredLogs) {
  const auto dir = temp_dir("daps_sweep_pure");
  run_experiment(tiny_plan(dir));
  const std::string first = slurp(dir / "summary.csv");
  fs::remove(dir / "summary.csv");
  EXPECT_EQ(build_summary(dir), first);
  EXPECT_EQ(slurp(dir / "summary.csv"), first);
  EXPECT_EQ(build_summary(dir), first);
  fs::remove_all(dir);
}

TEST(Experiment, FailingCellDoesNotStopTheSweep) {
  const auto dir = temp_dir("daps_sweep_fail");
  auto plan = tiny_plan(dir);
  plan.sweep_param = "p";
  plan.sweep_points = {2, 40};  // p = 40 exceeds n = 16
  plan.seeds = {1};
  plan.algorithms = {Algorithm::kDaps};
  const auto cells = run_experiment(plan);
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_TRUE(cells[0].ok);
  EXPECT_FALSE(cells[1].ok);
  EXPECT_FALSE(cells[1].error.empty());
  EXPECT_NE(slurp(dir / "summary.csv").find("failed"), std::string::npos);
  fs::remove_all(dir);
}
