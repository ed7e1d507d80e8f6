// SPDX-License-Identifier: Apache-2.0
//
// daps: generate data, run DAPS and the baselines, sweep parameters, attack
// recorded traces and check the convergence theory on live runs.
#include "daps/data.hpp"
#include "daps/error.hpp"
#include "daps/experiment.hpp"
#include "daps/privacy.hpp"
#include "daps/report.hpp"
#include "daps/theory.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace daps;

namespace {

struct ProblemFlags {
  ProblemSpec spec;
  std::string input;  // optional matrix file instead of a synthetic instance

  void add(CLI::App* app, bool with_input) {
    app->add_option("--n", spec.n, "rows of A")->check(CLI::PositiveNumber);
    app->add_option("--m", spec.m, "columns of A")->check(CLI::PositiveNumber);
    app->add_option("--p", spec.p, "target rank")->check(CLI::PositiveNumber);
    app->add_option("--d", spec.d, "number of nodes")->check(CLI::PositiveNumber);
    app->add_option("--xi", spec.xi, "singular value decay, sigma_i = xi^(1-i)");
    app->add_option("--seed", spec.seed, "random seed");
    if (with_input) app->add_option("--input", input, "matrix file (.csv or raw binary)");
  }
};

struct Instance {
  std::vector<Matrix> blocks;
  std::optional<GroundTruth> truth;
};

Instance load_instance(ProblemFlags& f) {
  Instance inst;
  if (f.input.empty()) {
    SyntheticProblem prob = generate_synthetic({f.spec.n, f.spec.m, f.spec.xi, f.spec.seed});
    inst.blocks = partition_columns(prob.a, f.spec.d, f.spec.p);
    inst.truth = std::move(prob.truth);
  } else {
    const Matrix a = load_matrix(f.input, format_from_path(f.input));
    f.spec.n = a.rows();
    f.spec.m = a.cols();
    inst.blocks = partition_columns(a, f.spec.d, f.spec.p);
  }
  return inst;
}

RunRequest request_from(const ProblemFlags& f, const std::string& algo, const std::string& config,
                        const std::string& schedule, bool theory_mode) {
  RunRequest req;
  req.algorithm = algorithm_from_string(algo);
  req.problem = f.spec;
  req.schedule = schedule_from_string(schedule);
  if (!config.empty()) {
    const nlohmann::json j = read_json(config);
    for (const auto& [key, value] : j.items()) {
      if (key == "daps") req.daps = daps_config_from_json(value);
      else if (key == "baseline") req.baseline = baseline_config_from_json(value);
      else if (key == "schedule") req.schedule = schedule_from_string(value.get<std::string>());
      else throw Error(ErrorCode::kInvalidConfig, "unknown run config key '" + key + "'");
    }
  }
  if (theory_mode) req.daps.theory_mode = true;
  return req;
}

void print_run(const RunRequest& req, const RunOutcome& out) {
  const auto& last = out.records.back();
  std::printf("%s: %d iterations%s, scaled KKT %.3e", std::string(to_string(req.algorithm)).c_str(),
              out.iterations, out.budget_exhausted ? " (budget exhausted)" : "",
              last.scaled_kkt);
  if (out.rel_error) std::printf(", singular value error %.3e", *out.rel_error);
  std::printf(", %llu bytes\n", static_cast<unsigned long long>(out.comm.total_bytes));
}

Matrix block_gram(const Matrix& a) { return a * a.transpose(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed dominant SVD by ADMM with projection splitting"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic test matrix");
  ProblemFlags gen_flags;
  gen_flags.add(gen, false);
  std::string gen_out;
  std::string gen_truth;
  gen->add_option("--out", gen_out, "output file (.csv or raw binary)")->required();
  gen->add_option("--truth", gen_truth, "also write the singular values (CSV, one column)");

  // convert
  auto* conv = app.add_subcommand("convert", "convert a matrix between CSV and raw binary");
  std::string conv_in;
  std::string conv_out;
  conv->add_option("--in", conv_in, "input file")->required();
  conv->add_option("--out", conv_out, "output file")->required();

  // run
  auto* run = app.add_subcommand("run", "run one algorithm on one instance");
  ProblemFlags run_flags;
  run_flags.add(run, true);
  std::string run_algo = "daps";
  std::string run_config;
  std::string run_out = "run";
  std::string run_schedule = "butterfly";
  bool run_theory = false;
  bool run_trace = false;
  run->add_option("--algo", run_algo, "daps | slrpgn | ssi");
  run->add_option("--config", run_config, "JSON with optional 'daps', 'baseline', 'schedule'");
  run->add_option("--out", run_out, "output directory");
  run->add_option("--schedule", run_schedule, "butterfly | linear");
  run->add_flag("--theory-mode", run_theory, "freeze penalties at the theory floor");
  run->add_flag("--trace", run_trace, "record the wire trace (DAPS) or snapshots (baselines)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run an experiment plan");
  std::string sweep_config;
  std::string sweep_out;
  sweep->add_option("--config", sweep_config, "experiment plan JSON")->required();
  sweep->add_option("--out", sweep_out, "output directory (overrides the plan)");

  // attack
  auto* attack = app.add_subcommand("attack", "reconstruction attack on shared data");
  ProblemFlags atk_flags;
  atk_flags.spec = {10, 40, 2, 2, 1.1, 0};
  atk_flags.add(attack, true);
  std::string atk_algo = "slrpgn";
  std::string atk_trace;
  std::string atk_out = "attack.json";
  int atk_node = 0;
  int atk_snapshots = -1;
  attack->add_option("--algo", atk_algo, "slrpgn | daps");
  attack->add_option("--trace", atk_trace, "recorded baseline trace directory");
  attack->add_option("--node", atk_node, "target node");
  attack->add_option("--snapshots", atk_snapshots, "use at most this many snapshots");
  attack->add_option("--out", atk_out, "report file");

  // theory-check
  auto* theory = app.add_subcommand("theory-check", "check descent, distance bound, envelope");
  ProblemFlags th_flags;
  th_flags.spec = {50, 400, 3, 4, 1.1, 0};
  th_flags.add(theory, true);
  std::string th_run_dir;
  std::string th_out = "theory";
  std::string th_config;
  int th_max_iter = 300;
  bool th_theory = true;
  theory->add_option("--run-dir", th_run_dir, "analyze an existing run directory instead");
  theory->add_option("--out", th_out, "output directory");
  theory->add_option("--config", th_config, "JSON with optional 'daps'");
  theory->add_option("--max-iter", th_max_iter, "iteration cap for the live run");
  theory->add_flag("--theory-mode,!--practice-mode", th_theory, "penalties at the theory floor");

  // report
  auto* report = app.add_subcommand("report", "rebuild a sweep summary table from its logs");
  std::string rep_dir;
  report->add_option("--dir", rep_dir, "sweep output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto prob =
          generate_synthetic({gen_flags.spec.n, gen_flags.spec.m, gen_flags.spec.xi, gen_flags.spec.seed});
      save_matrix(gen_out, prob.a, format_from_path(gen_out));
      if (!gen_truth.empty()) {
        std::string text;
        for (Index i = 0; i < prob.truth.singular_values.size(); ++i) {
          text += format_double(prob.truth.singular_values(i)) + "\n";
        }
        write_text(gen_truth, text);
      }
    } else if (conv->parsed()) {
      save_matrix(conv_out, load_matrix(conv_in, format_from_path(conv_in)), format_from_path(conv_out));
    } else if (run->parsed()) {
      Instance inst = load_instance(run_flags);
      RunRequest req = request_from(run_flags, run_algo, run_config, run_schedule, run_theory);
      req.record_trace = run_trace;
      const RunOutcome out =
          run_algorithm(req, std::move(inst.blocks), inst.truth ? &*inst.truth : nullptr);
      write_run(run_out, req, out);
      if (run_trace && req.algorithm == Algorithm::kDaps) {
        write_trace_jsonl(fs::path(run_out) / "wire.jsonl", out.wire_trace);
      }
      print_run(req, out);
    } else if (sweep->parsed()) {
      ExperimentPlan plan = plan_from_json(read_json(sweep_config));
      if (!sweep_out.empty()) plan.out = sweep_out;
      const auto cells = run_experiment(plan);
      int failed = 0;
      for (const auto& c : cells) {
        if (!c.ok) {
          ++failed;
          std::fprintf(stderr, "cell %s failed: %s\n", c.id.c_str(), c.error.c_str());
        }
      }
      std::printf("%zu cells, %d failed; summary in %s\n", cells.size(), failed,
                  (plan.out / "summary.csv").c_str());
    } else if (attack->parsed()) {
      Instance inst = load_instance(atk_flags);
      if (atk_node < 0 || atk_node >= atk_flags.spec.d) {
        throw Error(ErrorCode::kInvalidConfig, "--node out of range");
      }
      const Matrix truth = block_gram(inst.blocks[static_cast<std::size_t>(atk_node)]);
      AttackReport rep;
      nlohmann::json extra;
      if (atk_algo == "slrpgn") {
        BaselineTrace trace;
        if (!atk_trace.empty()) {
          trace = load_trace(atk_trace);
        } else {
          RunRequest req = request_from(atk_flags, "slrpgn", "", "butterfly", false);
          req.record_trace = true;
          req.baseline.max_snapshots = atk_snapshots;
          trace = *run_algorithm(req, inst.blocks, nullptr).baseline_trace;
        }
        rep = attack_slrpgn_trace(trace, atk_node, &truth, atk_snapshots);
      } else if (atk_algo == "daps") {
        RunRequest req = request_from(atk_flags, "daps", "", "butterfly", false);
        req.record_trace = true;
        const RunOutcome out = run_algorithm(req, inst.blocks, nullptr);
        const auto pairs = extract_daps_pairs(out.wire_trace, atk_node, atk_flags.spec.d, req.schedule);
        rep = attack_daps_trace(pairs, atk_node, &truth);
        extra["wire_audit"] = {{"payloads_scanned", out.audit->payloads_scanned},
                               {"findings", out.audit->findings.size()}};
      } else {
        throw Error(ErrorCode::kInvalidConfig, "attack supports --algo slrpgn or daps");
      }
      nlohmann::json j = to_json(rep);
      for (const auto& [k, v] : extra.items()) j[k] = v;
      write_json(atk_out, j);
      std::printf("equations %zu, unknowns %zu, rank %zu, identifiable %s", rep.equations_collected,
                  rep.unknown_dof, rep.system_rank, rep.identifiable ? "yes" : "no");
      if (rep.relative_error) std::printf(", relative error %.3e", *rep.relative_error);
      std::printf("\n");
    } else if (theory->parsed()) {
      std::vector<IterationRecord> records;
      AssumptionConstants constants;
      if (!th_run_dir.empty()) {
        records = read_records_csv(fs::path(th_run_dir) / "records.csv");
        const nlohmann::json summary = read_json(fs::path(th_run_dir) / "summary.json");
        const auto cfg = daps_config_from_json(summary.at("config"));
        if (records.empty()) throw Error(ErrorCode::kParseError, "run has no records");
        constants = assumption_constants(records.front().beta, cfg.p,
                                         summary.at("norm_a_fro2").get<double>(),
                                         cfg.condition_constants);
      } else {
        Instance inst = load_instance(th_flags);
        RunRequest req = request_from(th_flags, "daps", th_config, "butterfly", th_theory);
        req.daps.max_iter = th_max_iter;
        const RunOutcome out =
            run_algorithm(req, std::move(inst.blocks), inst.truth ? &*inst.truth : nullptr);
        write_run(th_out, req, out);
        records = out.records;
        constants = assumption_constants(std::vector<double>(static_cast<std::size_t>(th_flags.spec.d), 1.0),
                                         th_flags.spec.p, out.norm_a_fro2,
                                         req.daps.condition_constants);
      }
      const TheoryReport rep = theory_report(records, constants);
      fs::create_directories(th_out);
      write_json(fs::path(th_out) / "theory_report.json", to_json(rep));
      std::printf("descent: %s, %zu violations\n", rep.descent.enabled ? "checked" : rep.descent.note.c_str(),
                  rep.descent.violations.size());
      std::printf("distance bound: %zu violations%s\n", rep.distance.violations.size(),
                  rep.distance.assumption_satisfied ? "" : " (assumption unsatisfied)");
      std::printf("envelope bounded by its N=1 value: %s", rep.complexity.bounded_by_first ? "yes" : "no");
      if (!rep.complexity.bounded_by_first) {
        std::printf(" (first exceeded at N=%d)", rep.complexity.first_exceeding_n);
      }
      std::printf("\n");
    } else if (report->parsed()) {
      std::cout << build_summary(rep_dir);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
