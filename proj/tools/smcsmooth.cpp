#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "smc/error.hpp"
#include "smc/harness/config.hpp"
#include "smc/harness/experiment.hpp"
#include "smc/harness/report.hpp"
#include "smc/harness/selftest.hpp"
#include "smc/version.hpp"

namespace {

namespace h = smc::harness;

constexpr int kOk = 0;
constexpr int kValidationError = 1;
constexpr int kRuntimeError = 2;
constexpr int kSelftestFailure = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
  bool inject_search_fault = false;
  bool understate_sigma_plus = false;
};

h::ExperimentConfig load(const Options& opts) {
  if (opts.config.empty()) smc::raise(smc::ErrorKind::kValidation, "--config is required");
  h::ExperimentConfig config;
  try {
    config = h::load_config(opts.config);
  } catch (const smc::SmcError& e) {
    // An unreadable config is a usage problem, not a runtime failure.
    if (e.kind() != smc::ErrorKind::kIo) throw;
    throw smc::SmcError(smc::ErrorKind::kValidation, e.what());
  }
  if (opts.seed) {
    config.experiment.seeds.front() = *opts.seed;
    config.source["experiment"]["seeds"] = config.experiment.seeds;
  }
  return config;
}

void require_kind(const h::ExperimentConfig& config, const std::string& command,
                  std::initializer_list<h::ExperimentKind> allowed) {
  for (h::ExperimentKind kind : allowed) {
    if (config.experiment.kind == kind) return;
  }
  smc::raise(smc::ErrorKind::kValidation,
             "experiment.kind: \"" + h::to_string(config.experiment.kind) +
                 "\" cannot be run by the " + command + " command");
}

int run(const std::string& command, const Options& opts) {
  if (command == "selftest") {
    h::SelftestOptions so;
    so.inject_search_fault = opts.inject_search_fault;
    so.understate_sigma_plus = opts.understate_sigma_plus;
    const h::SelftestSummary summary = h::selftest(so);
    if (!opts.quiet || !summary.passed()) h::print_summary(summary, std::cout);
    return summary.passed() ? kOk : kSelftestFailure;
  }

  h::ExperimentConfig config = load(opts);

  if (command == "oracle") {
    const smc::ObservationRecord obs = h::observations(config.model);
    const h::OracleSeries series =
        h::oracle_series(config.model, obs, config.experiment.h, config.experiment.grid_size);
    std::ostringstream csv;
    csv << "time_index,filter,smoother\n";
    for (std::size_t t = 0; t < obs.size(); ++t) {
      csv << t << ',' << h::format_real(series.filter[t]) << ','
          << h::format_real(series.smoother[t]) << '\n';
    }
    const auto path = h::resolve_output_dir(config.output, opts.out) / "oracle.csv";
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!(file << csv.str())) smc::raise(smc::ErrorKind::kIo, "cannot write " + path.string());
    if (!opts.quiet) std::cout << csv.str();
    return kOk;
  }

  h::RunMode mode = h::RunMode::kSmooth;
  if (command == "filter" || command == "smooth") {
    require_kind(config, command,
                 {h::ExperimentKind::kOracleCompare, h::ExperimentKind::kScaling,
                  h::ExperimentKind::kTimeUniform});
    if (command == "filter") mode = h::RunMode::kFilter;
  } else if (command == "bench") {
    require_kind(config, command, {h::ExperimentKind::kBench});
  } else {
    require_kind(config, command, {h::ExperimentKind::kRbCheck});
  }

  h::RunReport report = h::run_experiment(config, mode);
  report.command = command;
  const h::ReportPaths paths = h::report_paths(config.output, opts.out);
  h::emit_report(report, paths);
  if (!opts.quiet) {
    std::cout << "wrote " << report.rows.size() << " rows to " << paths.csv.string() << " and "
              << paths.json.string() << "\n"
              << report.summary.dump(2) << "\n";
  }
  return kOk;
}

int exit_code(smc::ErrorKind kind) {
  switch (kind) {
    case smc::ErrorKind::kValidation:
    case smc::ErrorKind::kConfiguration:
      return kValidationError;
    default:
      return kRuntimeError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential Monte Carlo smoothing experiments"};
  app.set_version_flag("--version", std::string(smc::kLibraryName) + " " + smc::kLibraryVersion);
  app.require_subcommand(1, 1);
  app.fallthrough();

  Options opts;
  app.add_option("--config", opts.config, "Experiment config (JSON)");
  app.add_option("--seed", opts.seed, "Replaces the first configured seed");
  app.add_option("--out", opts.out,
                 "Output directory (overrides SMCSMOOTH_OUT_DIR and output.dir)");
  app.add_flag("--quiet", opts.quiet, "Suppress console output");

  app.add_subcommand("filter", "Filtering estimates against filtering oracles");
  app.add_subcommand("smooth", "Smoothing estimates against smoothing oracles");
  app.add_subcommand("bench", "Backward-sampler cost sweep over N");
  app.add_subcommand("oracle", "Exact filtering and smoothing expectations of h");
  app.add_subcommand("rb-check", "FFBSi average versus the exact FFBSm expectation");
  CLI::App* self = app.add_subcommand("selftest", "Small-instance invariant suite");
  self->add_flag("--inject-search-fault", opts.inject_search_fault,
                 "Flip the search boundary comparison (mutation smoke test)");
  self->add_flag("--understate-sigma-plus", opts.understate_sigma_plus,
                 "Quarter the sigma_plus given to the accept-reject sampler");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidationError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, opts);
  } catch (const smc::SmcError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}
