#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include <json.hpp>

#include "smc/harness/experiment.hpp"

namespace smc::harness {

inline constexpr const char* kCsvHeader =
    "seed,sweep_value,time_index,estimate,oracle,error,ar_trials,elementary_ops,"
    "fallback_count,wall_ms";

struct ReportPaths {
  std::filesystem::path csv;
  std::filesystem::path json;
};

// Resolves the output directory: explicit override, then the
// SMCSMOOTH_OUT_DIR environment variable, then the configured directory.
std::filesystem::path resolve_output_dir(const OutputConfig& output,
                                         const std::string& override_dir = "");

ReportPaths report_paths(const OutputConfig& output, const std::string& override_dir = "");

// Reals use 17 significant digits; absent values are empty fields.
void write_csv(const RunReport& report, std::ostream& out);
nlohmann::json to_json(const RunReport& report);

// Writes both files, creating the parent directories. Raises kIo when a
// path cannot be written.
void emit_report(const RunReport& report, const ReportPaths& paths);

// 17-significant-digit text of a double.
std::string format_real(double value);

}  // namespace smc::harness
