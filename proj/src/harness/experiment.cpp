#include "smc/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include "smc/apf.hpp"
#include "smc/error.hpp"
#include "smc/ffbsi.hpp"
#include "smc/ffbsm.hpp"
#include "smc/oracles.hpp"
#include "smc/stats.hpp"
#include "smc/version.hpp"

namespace smc::harness {
namespace {

using nlohmann::json;

// E[X^p] for X ~ N(m, v).
double gaussian_raw_moment(double m, double v, unsigned p) {
  double total = 0.0;
  double binom = 1.0;
  double double_fact = 1.0;  // (k - 1)!! for even k
  for (unsigned k = 0; k <= p; ++k) {
    if (k > 0) binom = binom * (p - k + 1) / k;
    if (k % 2 == 0) {
      if (k > 0) double_fact *= k - 1;
      total += binom * std::pow(m, static_cast<int>(p - k)) * std::pow(v, k / 2) * double_fact;
    }
  }
  return total;
}

double gaussian_expectation(const GaussianBelief& b, const TargetFunction& h) {
  switch (h.kind) {
    case TargetFunction::Kind::kIdentity:
      return b.mean;
    case TargetFunction::Kind::kIndicatorThreshold:
      return 0.5 * std::erfc((h.threshold - b.mean) / std::sqrt(2.0 * b.variance));
    case TargetFunction::Kind::kPower:
      return gaussian_raw_moment(b.mean, b.variance, h.power);
  }
  return b.mean;
}

double discrete_expectation(const std::vector<double>& probabilities,
                            const std::vector<double>& points, const TargetFunction& h) {
  double sum = 0.0;
  for (std::size_t k = 0; k < probabilities.size(); ++k) sum += probabilities[k] * h(points[k]);
  return sum;
}

struct SweepPoint {
  std::size_t n_particles = 0;
  std::size_t horizon = 0;
  double value = 0.0;
};

struct SweepContext {
  SweepPoint point;
  ObservationRecord obs;
  ModelSpec model;
  ProposalSpec proposal;
  std::vector<double> oracle;
};

std::vector<std::size_t> target_times(const ExperimentSpec& e, std::size_t horizon) {
  if (!e.all_times) return {*e.s};
  std::vector<std::size_t> times(horizon + 1);
  for (std::size_t t = 0; t <= horizon; ++t) times[t] = t;
  return times;
}

std::vector<ReportRow> run_pipeline(const ExperimentConfig& config, RunMode mode,
                                    const SweepContext& ctx, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentSpec& e = config.experiment;
  const AlgorithmConfig& a = config.algorithm;
  const std::size_t n = ctx.point.n_particles;
  const StateFunction h = [f = e.h](StateView x) { return f(x[0]); };

  const ForwardHistory history = run_filter(ctx.model, ctx.proposal, n, seed);
  const std::vector<std::size_t> times = target_times(e, ctx.point.horizon);
  std::vector<ReportRow> rows(times.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    rows[r].seed = seed;
    rows[r].sweep_value = ctx.point.value;
    rows[r].time_index = times[r];
  }
  const RngStream backward_rng(seed);

  if (e.kind == ExperimentKind::kRbCheck) {
    const ConditionalMeanCheck check =
        conditional_mean_check(history, ctx.model, at_time(*e.s, h), a.n_paths.value_or(n),
                               backward_rng);
    ReportRow& row = rows.front();
    row.estimate = check.ffbsi_value;
    row.oracle = check.ffbsm_value;
    row.error = check.ffbsi_value - check.ffbsm_value;
    row.std_error = check.ffbsi_std_error;
    row.ar_trials = check.counters.total_trials();
    row.elementary_ops = check.counters.elementary_ops;
    row.fallback_count = check.counters.fallback_count;
  } else if (mode == RunMode::kFilter) {
    for (ReportRow& row : rows) row.estimate = filter_estimate(history.steps[row.time_index], h);
  } else {
    switch (a.smoother) {
      case SmootherKind::kFfbsm: {
        const SmoothingWeights weights = marginal_smoothing_weights(history, ctx.model);
        for (ReportRow& row : rows) {
          row.estimate = marginal_estimate(history, weights, row.time_index, h);
        }
        break;
      }
      case SmootherKind::kGenealogy: {
        const GenealogyPaths paths = genealogy_trace_smoother(history);
        for (ReportRow& row : rows) {
          row.estimate = genealogy_estimate(history, paths, row.time_index, h);
          row.distinct_ancestors = paths.distinct_at(row.time_index);
        }
        break;
      }
      case SmootherKind::kFfbsiDirect:
      case SmootherKind::kFfbsiLinear: {
        const std::size_t n_paths = a.n_paths.value_or(n);
        const BackwardSample sample =
            a.smoother == SmootherKind::kFfbsiDirect
                ? sample_backward_direct(history, ctx.model, n_paths, backward_rng)
                : sample_backward_linear(history, ctx.model, n_paths,
                                         a.max_trials_per_draw.value_or(
                                             default_max_trials(ctx.model)),
                                         backward_rng);
        std::optional<double> max_step;
        if (a.smoother == SmootherKind::kFfbsiLinear && !sample.counters.ar_trials.empty()) {
          const auto worst = *std::max_element(sample.counters.ar_trials.begin(),
                                               sample.counters.ar_trials.end());
          max_step = static_cast<double>(worst) / static_cast<double>(n_paths);
        }
        for (ReportRow& row : rows) {
          row.estimate = ffbsi_estimate(history, sample.paths, at_time(row.time_index, h));
          row.ar_trials = sample.counters.total_trials();
          row.elementary_ops = sample.counters.elementary_ops;
          row.fallback_count = sample.counters.fallback_count;
          row.max_step_trials_per_draw = max_step;
        }
        break;
      }
    }
  }

  if (e.kind != ExperimentKind::kRbCheck && !ctx.oracle.empty()) {
    for (ReportRow& row : rows) {
      row.oracle = ctx.oracle[row.time_index];
      row.error = row.estimate - *row.oracle;
    }
  }
  if (config.output.wall_time) {
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    for (ReportRow& row : rows) row.wall_ms = ms;
  }
  return rows;
}

std::vector<SweepPoint> sweep_points(const ExperimentConfig& config) {
  const ExperimentSpec& e = config.experiment;
  const std::size_t horizon = configured_horizon(config.model);
  std::vector<SweepPoint> points;
  if (e.kind == ExperimentKind::kTimeUniform) {
    for (std::size_t t : e.t_grid) {
      points.push_back({config.algorithm.n_particles, t, static_cast<double>(t)});
    }
    return points;
  }
  const std::vector<std::size_t> grid =
      e.n_grid.empty() ? std::vector<std::size_t>{config.algorithm.n_particles} : e.n_grid;
  for (std::size_t n : grid) points.push_back({n, horizon, static_cast<double>(n)});
  return points;
}

std::string describe_point(const ExperimentConfig& config, const SweepPoint& p) {
  return config.experiment.kind == ExperimentKind::kTimeUniform
             ? "T=" + std::to_string(p.horizon)
             : "N=" + std::to_string(p.n_particles);
}

json stats_block(const std::vector<double>& values) {
  json out = json::object();
  out["count"] = values.size();
  if (values.empty()) return out;
  out["mean"] = stats::mean(values);
  if (values.size() > 1) {
    out["std_dev"] = stats::std_dev(values);
    out["std_error"] = stats::std_error(values);
  }
  return out;
}

// Error statistics for one group of rows.
json error_block(const std::vector<double>& errors) {
  json out = stats_block(errors);
  if (errors.empty()) return out;
  double max_abs = 0.0;
  for (double v : errors) max_abs = std::max(max_abs, std::abs(v));
  out["max_abs_error"] = max_abs;
  out["rmse"] = stats::rms(errors);
  if (errors.size() > 1) {
    const double se = stats::std_error(errors);
    if (se > 0.0) out["z"] = stats::mean(errors) / se;
  }
  return out;
}

json summarize(const ExperimentConfig& config, const std::vector<ReportRow>& rows) {
  const ExperimentSpec& e = config.experiment;
  json summary = json::object();
  summary["rows"] = rows.size();

  // Groups keyed by (sweep value, time index), in ascending order.
  std::map<std::pair<double, std::size_t>, std::vector<const ReportRow*>> groups;
  std::map<double, std::vector<const ReportRow*>> by_sweep;
  for (const ReportRow& row : rows) {
    groups[{row.sweep_value, row.time_index}].push_back(&row);
    by_sweep[row.sweep_value].push_back(&row);
  }

  if (e.kind == ExperimentKind::kRbCheck) {
    json checks = json::array();
    double max_abs_z = 0.0;
    for (const ReportRow& row : rows) {
      const double z = row.std_error && *row.std_error > 0.0 ? *row.error / *row.std_error : 0.0;
      max_abs_z = std::max(max_abs_z, std::abs(z));
      checks.push_back({{"seed", row.seed}, {"difference", *row.error}, {"z", z}});
    }
    summary["checks"] = checks;
    summary["max_abs_z"] = max_abs_z;
  } else {
    json per_point = json::array();
    double max_abs_z = 0.0;
    for (const auto& [key, members] : groups) {
      std::vector<double> estimates;
      std::vector<double> errors;
      for (const ReportRow* row : members) {
        estimates.push_back(row->estimate);
        if (row->error) errors.push_back(*row->error);
      }
      json entry = {{"sweep_value", key.first}, {"time_index", key.second}};
      entry["estimate"] = stats_block(estimates);
      if (!errors.empty()) {
        entry["error"] = error_block(errors);
        if (entry["error"].contains("z")) {
          max_abs_z = std::max(max_abs_z, std::abs(entry["error"]["z"].get<double>()));
        }
      }
      per_point.push_back(entry);
    }
    summary["per_point"] = per_point;
    if (!rows.empty() && rows.front().error) summary["max_abs_z"] = max_abs_z;
  }

  if (e.kind == ExperimentKind::kScaling) {
    json rmse = json::array();
    std::vector<double> values;
    for (const auto& [sweep, members] : by_sweep) {
      std::vector<double> errors;
      for (const ReportRow* row : members) {
        if (row->error) errors.push_back(*row->error);
      }
      if (errors.empty()) continue;
      values.push_back(stats::rms(errors));
      rmse.push_back({{"N", sweep}, {"rmse", values.back()}});
    }
    summary["rmse"] = rmse;
    json ratios = json::array();
    for (std::size_t i = 0; i + 1 < values.size(); ++i) ratios.push_back(values[i] / values[i + 1]);
    summary["rmse_ratio_consecutive"] = ratios;
  }

  if (e.kind == ExperimentKind::kTimeUniform) {
    json spread = json::array();
    std::vector<double> stds;
    for (const auto& [sweep, members] : by_sweep) {
      std::vector<double> estimates;
      json distinct = json::array();
      for (const ReportRow* row : members) {
        estimates.push_back(row->estimate);
        if (row->distinct_ancestors) distinct.push_back(*row->distinct_ancestors);
      }
      const double sd = estimates.size() > 1 ? stats::std_dev(estimates) : 0.0;
      stds.push_back(sd);
      json entry = {{"T", sweep}, {"across_seed_std", sd}};
      if (!distinct.empty()) entry["distinct_ancestors"] = distinct;
      spread.push_back(entry);
    }
    summary["across_seed_std"] = spread;
    if (stds.size() > 1 && stds.front() > 0.0) {
      summary["std_ratio_last_first"] = stds.back() / stds.front();
    }
  }

  if (e.kind == ExperimentKind::kBench) {
    json per_n = json::array();
    std::vector<double> log_n;
    std::vector<double> log_ops;
    const std::size_t horizon = configured_horizon(config.model);
    for (const auto& [sweep, members] : by_sweep) {
      // One backward pass per seed; rows of a pass share counters.
      std::map<std::uint64_t, const ReportRow*> per_seed;
      for (const ReportRow* row : members) per_seed.emplace(row->seed, row);
      std::vector<double> ops;
      std::vector<double> trials;
      double worst_step = 0.0;
      std::uint64_t fallbacks = 0;
      for (const auto& [seed, row] : per_seed) {
        ops.push_back(static_cast<double>(row->elementary_ops));
        trials.push_back(static_cast<double>(row->ar_trials));
        fallbacks += row->fallback_count;
        worst_step = std::max(worst_step, row->max_step_trials_per_draw.value_or(0.0));
      }
      const double n_paths = static_cast<double>(
          config.algorithm.n_paths.value_or(static_cast<std::size_t>(sweep)));
      const double mean_ops = stats::mean(ops);
      json entry = {{"N", sweep}, {"mean_elementary_ops", mean_ops},
                    {"fallback_count", fallbacks}};
      if (config.algorithm.smoother == SmootherKind::kFfbsiLinear && horizon > 0) {
        entry["mean_trials_per_draw"] =
            stats::mean(trials) / (n_paths * static_cast<double>(horizon));
        entry["max_step_trials_per_draw"] = worst_step;
      }
      per_n.push_back(entry);
      if (mean_ops > 0.0) {
        log_n.push_back(std::log(sweep));
        log_ops.push_back(std::log(mean_ops));
      }
    }
    summary["bench"] = per_n;
    if (log_n.size() > 1) summary["log_log_ops_slope"] = stats::ols_slope(log_n, log_ops);
  }

  if (config.algorithm.smoother == SmootherKind::kFfbsiLinear) {
    std::uint64_t fallbacks = 0;
    std::map<std::pair<std::uint64_t, double>, std::uint64_t> per_pass;
    for (const ReportRow& row : rows) per_pass[{row.seed, row.sweep_value}] = row.fallback_count;
    for (const auto& [key, count] : per_pass) fallbacks += count;
    summary["fallback_count"] = fallbacks;
    if (fallbacks > 0) {
      summary["warnings"] = json::array(
          {"accept-reject fallback resolved " + std::to_string(fallbacks) +
           " draws by exact backward-row sampling"});
    }
  }
  return summary;
}

}  // namespace

OracleSeries oracle_series(const ModelConfig& model, const ObservationRecord& obs,
                           const TargetFunction& h, std::size_t grid_size) {
  OracleSeries out;
  const std::size_t size = obs.size();
  out.filter.resize(size);
  out.smoother.resize(size);
  switch (model.kind) {
    case ModelKind::kLgssm: {
      const KalmanResult k = rts_smooth(model.phi, model.sigma_v, model.sigma_w, obs,
                                        model.initial_law);
      for (std::size_t t = 0; t < size; ++t) {
        out.filter[t] = gaussian_expectation(k.filtered[t], h);
        out.smoother[t] = gaussian_expectation(k.smoothed[t], h);
      }
      break;
    }
    case ModelKind::kDiscrete: {
      const std::vector<double> means = model.emission_means;
      const double sd = model.emission_sd;
      const DiscreteMarginals d = discrete_forward_backward(
          model.trans, [&](std::size_t k, double y) { return normal_pdf(y, means[k], sd); },
          model.init, obs);
      std::vector<double> codes(model.init.size());
      for (std::size_t k = 0; k < codes.size(); ++k) codes[k] = static_cast<double>(k);
      for (std::size_t t = 0; t < size; ++t) {
        out.filter[t] = discrete_expectation(d.filtered[t], codes, h);
        out.smoother[t] = discrete_expectation(d.smoothed[t], codes, h);
      }
      break;
    }
    case ModelKind::kCompactRw: {
      const GridDensity g = grid_smoother(build_model(model, obs), grid_size);
      for (std::size_t t = 0; t < size; ++t) {
        out.filter[t] = discrete_expectation(g.filtered[t], g.nodes, h);
        out.smoother[t] = discrete_expectation(g.smoothed[t], g.nodes, h);
      }
      break;
    }
  }
  return out;
}

RunReport run_experiment(const ExperimentConfig& config, RunMode mode, std::size_t threads) {
  const ExperimentSpec& e = config.experiment;
  RunReport report;
  report.library = kLibraryName;
  report.version = kLibraryVersion;
  report.command = mode == RunMode::kFilter ? "filter" : "smooth";
  report.config = config.source;

  const ObservationRecord full = observations(config.model);
  const std::vector<SweepPoint> points = sweep_points(config);
  std::vector<SweepContext> contexts;
  contexts.reserve(points.size());
  // Oracles and models depend only on the horizon; share them between points.
  std::map<std::size_t, std::size_t> by_horizon;
  for (const SweepPoint& p : points) {
    SweepContext ctx;
    ctx.point = p;
    const auto known = by_horizon.find(p.horizon);
    if (known != by_horizon.end()) {
      const SweepContext& base = contexts[known->second];
      ctx.obs = base.obs;
      ctx.model = base.model;
      ctx.proposal = base.proposal;
      ctx.oracle = base.oracle;
    } else {
      ctx.obs.values.assign(full.values.begin(),
                            full.values.begin() + static_cast<std::ptrdiff_t>(p.horizon + 1));
      ctx.model = build_model(config.model, ctx.obs);
      ctx.proposal = config.algorithm.filter == FilterKind::kFullyAdapted
                         ? fully_adapted_proposal(ctx.model)
                         : bootstrap_proposal(ctx.model);
      if (e.kind != ExperimentKind::kRbCheck) {
        OracleSeries series = oracle_series(config.model, ctx.obs, e.h, e.grid_size);
        ctx.oracle = mode == RunMode::kFilter ? std::move(series.filter)
                                              : std::move(series.smoother);
      }
      by_horizon.emplace(p.horizon, contexts.size());
    }
    contexts.push_back(std::move(ctx));
  }

  // Task k covers seed k / points and sweep point k % points.
  const std::size_t n_tasks = e.seeds.size() * contexts.size();
  std::vector<std::vector<ReportRow>> results(n_tasks);
  std::vector<std::exception_ptr> failures(n_tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next.fetch_add(1); k < n_tasks; k = next.fetch_add(1)) {
      const SweepContext& ctx = contexts[k % contexts.size()];
      try {
        results[k] = run_pipeline(config, mode, ctx, e.seeds[k / contexts.size()]);
      } catch (...) {
        failures[k] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n_tasks, 1));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  for (std::size_t k = 0; k < n_tasks; ++k) {
    if (!failures[k]) continue;
    const std::string where = "seed=" + std::to_string(e.seeds[k / contexts.size()]) + " " +
                              describe_point(config, contexts[k % contexts.size()].point);
    try {
      std::rethrow_exception(failures[k]);
    } catch (const SmcError& err) {
      throw SmcError(err.kind(), where + ": " + err.what());
    }
  }
  for (auto& rows : results) {
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }
  report.summary = summarize(config, report.rows);
  return report;
}

}  // namespace smc::harness
