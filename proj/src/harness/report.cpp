#include "smc/harness/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <system_error>

#include "smc/error.hpp"

namespace smc::harness {
namespace {

using nlohmann::json;

std::string optional_real(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string();
}

void ensure_parent(const std::filesystem::path& path) {
  const auto parent = path.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(parent, ec);
  if (ec) raise(ErrorKind::kIo, "cannot create directory " + parent.string() + ": " + ec.message());
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << contents;
  out.flush();
  if (!out) raise(ErrorKind::kIo, "failed writing " + path.string());
}

}  // namespace

std::string format_real(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::filesystem::path resolve_output_dir(const OutputConfig& output,
                                         const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (const char* env = std::getenv("SMCSMOOTH_OUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return output.dir;
}

ReportPaths report_paths(const OutputConfig& output, const std::string& override_dir) {
  const std::filesystem::path dir = resolve_output_dir(output, override_dir);
  return {dir / output.csv, dir / output.json};
}

void write_csv(const RunReport& report, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const ReportRow& row : report.rows) {
    out << row.seed << ',' << format_real(row.sweep_value) << ',' << row.time_index << ','
        << format_real(row.estimate) << ',' << optional_real(row.oracle) << ','
        << optional_real(row.error) << ',' << row.ar_trials << ',' << row.elementary_ops << ','
        << row.fallback_count << ',' << optional_real(row.wall_ms) << '\n';
  }
}

json to_json(const RunReport& report) {
  json rows = json::array();
  for (const ReportRow& row : report.rows) {
    json r = {{"seed", row.seed},
              {"sweep_value", row.sweep_value},
              {"time_index", row.time_index},
              {"estimate", row.estimate},
              {"oracle", row.oracle ? json(*row.oracle) : json(nullptr)},
              {"error", row.error ? json(*row.error) : json(nullptr)},
              {"ar_trials", row.ar_trials},
              {"elementary_ops", row.elementary_ops},
              {"fallback_count", row.fallback_count},
              {"wall_ms", row.wall_ms ? json(*row.wall_ms) : json(nullptr)}};
    if (row.std_error) r["std_error"] = *row.std_error;
    if (row.distinct_ancestors) r["distinct_ancestors"] = *row.distinct_ancestors;
    if (row.max_step_trials_per_draw) r["max_step_trials_per_draw"] = *row.max_step_trials_per_draw;
    rows.push_back(std::move(r));
  }
  json doc = json::object();
  doc["library"] = {{"name", report.library}, {"version", report.version}};
  doc["command"] = report.command;
  doc["config"] = report.config;
  doc["columns"] = json::array({"seed", "sweep_value", "time_index", "estimate", "oracle",
                                "error", "ar_trials", "elementary_ops", "fallback_count",
                                "wall_ms"});
  doc["rows"] = std::move(rows);
  doc["summary"] = report.summary;
  return doc;
}

void emit_report(const RunReport& report, const ReportPaths& paths) {
  std::ostringstream csv;
  write_csv(report, csv);
  write_file(paths.csv, csv.str());
  write_file(paths.json, to_json(report).dump(2) + "\n");
}

}  // namespace smc::harness
