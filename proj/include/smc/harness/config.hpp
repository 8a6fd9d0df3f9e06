#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smc/model.hpp"

namespace smc::harness {

enum class ModelKind { kLgssm, kDiscrete, kCompactRw };
enum class FilterKind { kBootstrap, kFullyAdapted };
enum class SmootherKind { kFfbsm, kFfbsiDirect, kFfbsiLinear, kGenealogy };
enum class ExperimentKind { kOracleCompare, kScaling, kTimeUniform, kBench, kRbCheck };

struct SimulateSpec {
  std::uint64_t seed = 0;
  std::size_t horizon = 0;
};

struct ModelConfig {
  ModelKind kind = ModelKind::kLgssm;
  // lgssm
  double phi = 0.0;
  double sigma_v = 1.0;
  double sigma_w = 1.0;
  LgssmInit initial_law = LgssmInit::kAutomatic;
  // discrete: Gaussian emissions with per-state means and a common sd
  Matrix trans;
  std::vector<double> init;
  std::vector<double> emission_means;
  double emission_sd = 1.0;
  // compact_rw
  double kappa = 1.0;
  double sigma_obs = 0.1;

  std::optional<std::vector<double>> observations;
  std::optional<SimulateSpec> simulate;
};

struct AlgorithmConfig {
  FilterKind filter = FilterKind::kBootstrap;
  SmootherKind smoother = SmootherKind::kFfbsm;
  std::size_t n_particles = 0;
  // Defaults to n_particles.
  std::optional<std::size_t> n_paths;
  // Defaults to default_max_trials(model).
  std::optional<std::size_t> max_trials_per_draw;
};

// Built-in test functions of a scalar state.
struct TargetFunction {
  enum class Kind { kIdentity, kIndicatorThreshold, kPower };
  Kind kind = Kind::kIdentity;
  double threshold = 0.0;
  unsigned power = 1;

  double operator()(double x) const;
  std::string describe() const;
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kOracleCompare;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> n_grid;
  std::vector<std::size_t> t_grid;
  // Target time; empty means every time index ("all").
  std::optional<std::size_t> s;
  bool all_times = false;
  TargetFunction h;
  std::size_t grid_size = 1024;
};

struct OutputConfig {
  std::string dir = ".";
  std::string csv = "report.csv";
  std::string json = "report.json";
  // Wall times make reports non-reproducible, so they are opt-in.
  bool wall_time = false;
};

struct ExperimentConfig {
  ModelConfig model;
  AlgorithmConfig algorithm;
  ExperimentSpec experiment;
  OutputConfig output;
  nlohmann::json source;
};

// Validates and converts a parsed document. Unknown keys, missing keys and
// type or range errors raise ErrorKind::kValidation with the field path.
ExperimentConfig parse_config(const nlohmann::json& document);

// Reads and parses a JSON file (I/O problems raise ErrorKind::kIo).
ExperimentConfig load_config(const std::filesystem::path& path);

// Observation record of the configured model: the inline values, or a
// simulation of the model's own dynamics truncated to `horizon` if given.
ObservationRecord observations(const ModelConfig& config);

// Builds the model bound to `obs`.
ModelSpec build_model(const ModelConfig& config, const ObservationRecord& obs);

// Final time index of the configured observation record.
std::size_t configured_horizon(const ModelConfig& config);

std::string to_string(ModelKind kind);
std::string to_string(SmootherKind kind);
std::string to_string(ExperimentKind kind);

}  // namespace smc::harness
