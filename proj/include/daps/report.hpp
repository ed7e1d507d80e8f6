// SPDX-License-Identifier: Apache-2.0
//
// Iteration logs as CSV, configuration round trips through JSON, and the
// sweep summary table. Numbers are written with 17 significant digits so a
// log read back reproduces every double exactly.
#pragma once

#include "daps/baselines.hpp"
#include "daps/daps.hpp"
#include "daps/records.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace daps {

/// "%.17g", with "nan" / "inf" / "-inf" for non-finite values.
std::string format_double(double v);

std::string records_csv(const std::vector<IterationRecord>& records);
void write_records_csv(const std::filesystem::path& path,
                       const std::vector<IterationRecord>& records);
/// Throws ParseError on malformed rows.
std::vector<IterationRecord> read_records_csv(const std::filesystem::path& path);

nlohmann::json to_json(const DapsConfig& cfg);
nlohmann::json to_json(const BaselineConfig& cfg);
/// Keys absent from `j` keep the value in `base`; unknown keys are an error.
DapsConfig daps_config_from_json(const nlohmann::json& j, DapsConfig base = {});
BaselineConfig baseline_config_from_json(const nlohmann::json& j, BaselineConfig base = {});

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace daps
