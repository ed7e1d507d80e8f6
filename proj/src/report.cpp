// SPDX-License-Identifier: Apache-2.0
#include "daps/report.hpp"

#include "daps/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace daps {

namespace {

const char* const kScalarColumns[] = {"k",          "objective",     "scaled_kkt",
                                      "kkt_raw",    "rel_error",     "augmented_lagrangian",
                                      "comm_bytes", "realized_c2",   "conditions_ok",
                                      "z_restarted"};
constexpr std::size_t kScalarCount = std::size(kScalarColumns);

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParseError, "bad number '" + s + "' in records CSV");
  }
  return v;
}

template <typename T>
T parse_int(const std::string& s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParseError, "bad integer '" + s + "' in records CSV");
  }
  return v;
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& into) {
  if (const auto it = j.find(key); it != j.end()) into = it->get<T>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const char* what) {
  std::set<std::string> names(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!names.count(key)) {
      throw Error(ErrorCode::kInvalidConfig, std::string("unknown ") + what + " key '" + key + "'");
    }
  }
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string records_csv(const std::vector<IterationRecord>& records) {
  const std::size_t d = records.empty() ? 0 : records.front().dist.size();
  std::string out;
  for (std::size_t c = 0; c < kScalarCount; ++c) {
    if (c) out += ',';
    out += kScalarColumns[c];
  }
  for (const char* stem : {"dist_", "beta_", "inner_"}) {
    for (std::size_t i = 0; i < d; ++i) out += "," + std::string(stem) + std::to_string(i);
  }
  out += '\n';
  for (const auto& r : records) {
    if (r.dist.size() != d || r.beta.size() != d || r.inner_iters.size() != d) {
      throw Error(ErrorCode::kDimensionMismatch, "records disagree on the node count");
    }
    out += std::to_string(r.k) + ',' + format_double(r.objective) + ',' +
           format_double(r.scaled_kkt) + ',' + format_double(r.kkt_raw) + ',' +
           format_double(r.rel_error) + ',' + format_double(r.augmented_lagrangian) + ',' +
           std::to_string(r.comm_bytes) + ',' + format_double(r.realized_c2) + ',' +
           (r.conditions_ok ? "1" : "0") + ',' + (r.z_restarted ? "1" : "0");
    for (double v : r.dist) out += ',' + format_double(v);
    for (double v : r.beta) out += ',' + format_double(v);
    for (int v : r.inner_iters) out += ',' + std::to_string(v);
    out += '\n';
  }
  return out;
}

void write_records_csv(const std::filesystem::path& path,
                       const std::vector<IterationRecord>& records) {
  write_text(path, records_csv(records));
}

std::vector<IterationRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "empty records CSV");
  const auto header = split(line);
  if (header.size() < kScalarCount || (header.size() - kScalarCount) % 3 != 0) {
    throw Error(ErrorCode::kParseError, "unexpected records CSV header");
  }
  for (std::size_t c = 0; c < kScalarCount; ++c) {
    if (header[c] != kScalarColumns[c]) {
      throw Error(ErrorCode::kParseError, "unexpected column '" + header[c] + "'");
    }
  }
  const std::size_t d = (header.size() - kScalarCount) / 3;
  std::vector<IterationRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size()) {
      throw Error(ErrorCode::kParseError, "records CSV row has " + std::to_string(f.size()) +
                                              " fields, header has " +
                                              std::to_string(header.size()));
    }
    IterationRecord r;
    r.k = parse_int<int>(f[0]);
    r.objective = parse_double(f[1]);
    r.scaled_kkt = parse_double(f[2]);
    r.kkt_raw = parse_double(f[3]);
    r.rel_error = parse_double(f[4]);
    r.augmented_lagrangian = parse_double(f[5]);
    r.comm_bytes = parse_int<std::uint64_t>(f[6]);
    r.realized_c2 = parse_double(f[7]);
    r.conditions_ok = parse_int<int>(f[8]) != 0;
    r.z_restarted = parse_int<int>(f[9]) != 0;
    for (std::size_t i = 0; i < d; ++i) r.dist.push_back(parse_double(f[kScalarCount + i]));
    for (std::size_t i = 0; i < d; ++i) r.beta.push_back(parse_double(f[kScalarCount + d + i]));
    for (std::size_t i = 0; i < d; ++i) {
      r.inner_iters.push_back(parse_int<int>(f[kScalarCount + 2 * d + i]));
    }
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::json to_json(const DapsConfig& c) {
  return {{"p", c.p},
          {"beta0_coeff", c.beta0_coeff},
          {"theta", c.theta},
          {"mu", c.mu},
          {"eps_x", c.eps_x},
          {"rel_tol", c.rel_tol},
          {"max_iter", c.max_iter},
          {"max_inner", c.max_inner},
          {"norm_power_steps", c.norm_power_steps},
          {"tau_inner", c.tau_inner},
          {"tau_z", c.tau_z},
          {"z_solver", std::string(to_string(c.z_solver))},
          {"beta_measure_point", std::string(to_string(c.beta_measure_point))},
          {"theory_mode", c.theory_mode},
          {"verify_conditions", c.verify_conditions},
          {"strict_conditions", c.strict_conditions},
          {"seed", c.seed},
          {"condition_constants",
           {{"c1", c.condition_constants.c1},
            {"c1_prime", c.condition_constants.c1_prime},
            {"delta", c.condition_constants.delta},
            {"c2", c.condition_constants.c2}}}};
}

nlohmann::json to_json(const BaselineConfig& c) {
  return {{"p", c.p},
          {"tau", c.tau},
          {"tau_power_steps", c.tau_power_steps},
          {"ortho_every", c.ortho_every},
          {"rel_tol", c.rel_tol},
          {"max_iter", c.max_iter},
          {"seed", c.seed},
          {"max_snapshots", c.max_snapshots}};
}

DapsConfig daps_config_from_json(const nlohmann::json& j, DapsConfig c) {
  try {
    reject_unknown(j,
                   {"p", "beta0_coeff", "theta", "mu", "eps_x", "rel_tol", "max_iter", "max_inner",
                    "norm_power_steps", "tau_inner", "tau_z", "z_solver", "beta_measure_point",
                    "theory_mode", "verify_conditions", "strict_conditions", "seed",
                    "condition_constants"},
                   "DAPS config");
    take(j, "p", c.p);
    take(j, "beta0_coeff", c.beta0_coeff);
    take(j, "theta", c.theta);
    take(j, "mu", c.mu);
    take(j, "eps_x", c.eps_x);
    take(j, "rel_tol", c.rel_tol);
    take(j, "max_iter", c.max_iter);
    take(j, "max_inner", c.max_inner);
    take(j, "norm_power_steps", c.norm_power_steps);
    take(j, "tau_inner", c.tau_inner);
    take(j, "tau_z", c.tau_z);
    if (j.contains("z_solver")) c.z_solver = z_solver_from_string(j["z_solver"].get<std::string>());
    if (j.contains("beta_measure_point")) {
      c.beta_measure_point =
          beta_measure_point_from_string(j["beta_measure_point"].get<std::string>());
    }
    take(j, "theory_mode", c.theory_mode);
    take(j, "verify_conditions", c.verify_conditions);
    take(j, "strict_conditions", c.strict_conditions);
    take(j, "seed", c.seed);
    if (const auto it = j.find("condition_constants"); it != j.end()) {
      reject_unknown(*it, {"c1", "c1_prime", "delta", "c2"}, "condition constant");
      take(*it, "c1", c.condition_constants.c1);
      take(*it, "c1_prime", c.condition_constants.c1_prime);
      take(*it, "delta", c.condition_constants.delta);
      take(*it, "c2", c.condition_constants.c2);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("DAPS config: ") + e.what());
  }
  validate(c);
  return c;
}

BaselineConfig baseline_config_from_json(const nlohmann::json& j, BaselineConfig c) {
  try {
    reject_unknown(j,
                   {"p", "tau", "tau_power_steps", "ortho_every", "rel_tol", "max_iter", "seed",
                    "max_snapshots"},
                   "baseline config");
    take(j, "p", c.p);
    take(j, "tau", c.tau);
    take(j, "tau_power_steps", c.tau_power_steps);
    take(j, "ortho_every", c.ortho_every);
    take(j, "rel_tol", c.rel_tol);
    take(j, "max_iter", c.max_iter);
    take(j, "seed", c.seed);
    take(j, "max_snapshots", c.max_snapshots);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("baseline config: ") + e.what());
  }
  validate(c);
  return c;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

}  // namespace daps
