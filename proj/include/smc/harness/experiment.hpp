#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smc/harness/config.hpp"

namespace smc::harness {

// One estimate: a (seed, sweep point, time index) triple. sweep_value is N
// for N sweeps and T for time_uniform.
struct ReportRow {
  std::uint64_t seed = 0;
  double sweep_value = 0.0;
  std::size_t time_index = 0;
  double estimate = 0.0;
  std::optional<double> oracle;
  std::optional<double> error;
  std::uint64_t ar_trials = 0;
  std::uint64_t elementary_ops = 0;
  std::uint64_t fallback_count = 0;
  std::optional<double> wall_ms;

  // JSON-only extras.
  std::optional<double> std_error;
  std::optional<std::size_t> distinct_ancestors;
  std::optional<double> max_step_trials_per_draw;
};

struct RunReport {
  std::string library;
  std::string version;
  std::string command;
  nlohmann::json config;
  std::vector<ReportRow> rows;
  nlohmann::json summary = nlohmann::json::object();
};

enum class RunMode {
  // Smoothing estimates against smoothing oracles.
  kSmooth,
  // Filtering estimates E[h(X_s) | y_0..y_s] against filtering oracles.
  kFilter,
};

// Runs the configured pipeline for every (seed, sweep point) pair, in
// parallel, and merges rows ordered by (seed, sweep point, time index).
// Algorithm errors are rethrown with the same kind, prefixed by the seed
// and sweep point.
RunReport run_experiment(const ExperimentConfig& config, RunMode mode = RunMode::kSmooth,
                         std::size_t threads = 0);

// Exact E[h(X_t) | y] for every t: filtering (y_0..y_t) and smoothing
// (y_0..y_T) laws.
struct OracleSeries {
  std::vector<double> filter;
  std::vector<double> smoother;
};

OracleSeries oracle_series(const ModelConfig& model, const ObservationRecord& obs,
                           const TargetFunction& h, std::size_t grid_size);

}  // namespace smc::harness
