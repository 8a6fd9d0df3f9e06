#include "smc/ffbsi.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "smc/error.hpp"
#include "smc/ffbsm.hpp"
#include "smc/oracles.hpp"
#include "smc/sampling.hpp"

namespace smc {
namespace {

std::vector<BackwardTrajectory> assemble(const std::vector<std::vector<Index>>& by_time,
                                         std::size_t n_paths) {
  std::vector<BackwardTrajectory> paths(n_paths);
  for (std::size_t l = 0; l < n_paths; ++l) {
    auto& indices = paths[l].indices;
    indices.resize(by_time.size());
    for (std::size_t t = 0; t < by_time.size(); ++t) indices[t] = by_time[t][l];
  }
  return paths;
}

void require_paths(std::size_t n_paths) {
  if (n_paths == 0) raise(ErrorKind::kInvalidParameter, "n_paths must be positive");
}

}  // namespace

PathFunction at_time(std::size_t s, StateFunction h) {
  return [s, h = std::move(h)](const StatePath& path) { return h(path.at(s)); };
}

BackwardSample sample_backward_direct(const ForwardHistory& history,
                                      const ModelSpec& model, std::size_t n_paths,
                                      const RngStream& rng) {
  require_paths(n_paths);
  const std::size_t horizon = history.horizon();
  const std::size_t n = history.n_particles;
  BackwardSample result;
  TrialCounters& counters = result.counters;
  counters.ar_trials.assign(horizon, 0);

  std::vector<std::vector<Index>> by_time(horizon + 1, std::vector<Index>(n_paths));
  PrefixSums prefix(history.steps[horizon].weights);
  counters.elementary_ops += n;
  RngStream init_stream = rng.derive(StreamPurpose::kBackwardInit);
  for (std::size_t l = 0; l < n_paths; ++l) {
    by_time[horizon][l] =
        categorical_search(prefix, prefix.scale(init_stream.uniform()), counters);
  }
  counters.elementary_ops += n_paths;

  std::vector<double> row(n);
  for (std::size_t t = horizon; t-- > 0;) {
    RngStream stream = rng.derive(StreamPurpose::kBackwardDirect, t);
    const WeightedSample& next = history.steps[t + 1];
    for (std::size_t l = 0; l < n_paths; ++l) {
      fill_backward_row(history, model, t, next.particle(by_time[t + 1][l]), row);
      prefix.assign(row);
      by_time[t][l] = categorical_search(prefix, prefix.scale(stream.uniform()), counters);
    }
    // Per path: N densities, N products, N accumulations, one draw.
    counters.elementary_ops += n_paths * (3 * n + 1);
  }
  result.paths = assemble(by_time, n_paths);
  return result;
}

std::size_t default_max_trials(const ModelSpec& model) {
  if (model.sigma_minus && model.sigma_plus && *model.sigma_minus > 0.0) {
    return 100 * static_cast<std::size_t>(std::ceil(*model.sigma_plus / *model.sigma_minus));
  }
  return 10000;
}

BackwardSample sample_backward_linear(const ForwardHistory& history,
                                      const ModelSpec& model, std::size_t n_paths,
                                      std::size_t max_trials_per_draw,
                                      const RngStream& rng) {
  require_paths(n_paths);
  if (!model.sigma_plus) {
    raise(ErrorKind::kConfiguration,
          "accept-reject backward sampling needs an upper kernel bound (sigma_plus)");
  }
  if (max_trials_per_draw == 0) {
    raise(ErrorKind::kInvalidParameter, "max_trials_per_draw must be positive");
  }
  const double bound = *model.sigma_plus;
  const std::size_t horizon = history.horizon();
  const std::size_t n = history.n_particles;
  BackwardSample result;
  TrialCounters& counters = result.counters;
  counters.ar_trials.assign(horizon, 0);

  std::vector<std::vector<Index>> by_time(horizon + 1);
  {
    RngStream stream = rng.derive(StreamPurpose::kBackwardInit);
    by_time[horizon] =
        multinomial_sample(history.steps[horizon].weights, n_paths, stream, counters);
  }

  PrefixSums prefix;
  std::vector<std::size_t> active;
  std::vector<std::size_t> rejected;
  std::vector<std::size_t> exhausted;
  std::vector<std::uint32_t> trials(n_paths);
  std::vector<double> row(n);
  for (std::size_t s = horizon; s-- > 0;) {
    const WeightedSample& here = history.steps[s];
    const WeightedSample& next = history.steps[s + 1];
    const auto& later = by_time[s + 1];
    auto& current = by_time[s];
    current.assign(n_paths, 0);
    prefix.assign(here.weights);
    counters.elementary_ops += n;

    active.resize(n_paths);
    for (std::size_t l = 0; l < n_paths; ++l) active[l] = l;
    std::fill(trials.begin(), trials.end(), 0);
    exhausted.clear();
    for (std::size_t round = 0; !active.empty(); ++round) {
      const std::size_t batch = active.size();
      RngStream propose_stream = rng.derive(StreamPurpose::kBackwardPropose, s, round);
      RngStream accept_stream = rng.derive(StreamPurpose::kBackwardAccept, s, round);
      const std::vector<Index> proposals =
          multinomial_sample(prefix, batch, propose_stream, counters);
      rejected.clear();
      for (std::size_t k = 0; k < batch; ++k) {
        const std::size_t path = active[k];
        const Index candidate = proposals[k];
        const double u = accept_stream.uniform();
        const double density =
            model.transition_density(here.particle(candidate), next.particle(later[path]));
        if (density > bound) {
          raise(ErrorKind::kBoundViolation,
                "kernel value " + std::to_string(density) + " exceeds sigma_plus " +
                    std::to_string(bound) + " at s=" + std::to_string(s) +
                    ", i=" + std::to_string(candidate) + ", path=" + std::to_string(path));
        }
        if (u <= density / bound) {
          current[path] = candidate;
        } else if (++trials[path] >= max_trials_per_draw) {
          exhausted.push_back(path);
        } else {
          rejected.push_back(path);
        }
      }
      // Per trial: one uniform, one density, one comparison.
      counters.elementary_ops += 3 * batch;
      counters.ar_trials[s] += batch;
      std::swap(active, rejected);
    }

    for (const std::size_t path : exhausted) {
      fill_backward_row(history, model, s, next.particle(later[path]), row);
      PrefixSums row_prefix(row);
      RngStream stream = rng.derive(StreamPurpose::kBackwardFallback, s, path);
      current[path] =
          categorical_search(row_prefix, row_prefix.scale(stream.uniform()), counters);
      counters.elementary_ops += 3 * n + 1;
      ++counters.fallback_count;
    }
  }
  result.paths = assemble(by_time, n_paths);
  return result;
}

double ffbsi_estimate(const ForwardHistory& history,
                      const std::vector<BackwardTrajectory>& trajectories,
                      const PathFunction& h) {
  if (trajectories.empty()) {
    raise(ErrorKind::kInvalidParameter, "ffbsi_estimate needs at least one trajectory");
  }
  double sum = 0.0;
  for (const auto& trajectory : trajectories) sum += h(StatePath(history, trajectory.indices));
  return sum / static_cast<double>(trajectories.size());
}

ConditionalMeanCheck conditional_mean_check(const ForwardHistory& history,
                                            const ModelSpec& model, const PathFunction& h,
                                            std::size_t n_paths, const RngStream& rng) {
  constexpr double kMaxOutcomes = 1e6;
  const double outcomes = std::pow(static_cast<double>(history.n_particles),
                                   static_cast<double>(history.horizon() + 1));
  if (outcomes > kMaxOutcomes) {
    raise(ErrorKind::kInfeasible, "N^(T+1) = " + std::to_string(outcomes) +
                                      " exceeds the enumeration limit 1e6");
  }
  ConditionalMeanCheck check;
  BackwardSample sample =
      model.sigma_plus
          ? sample_backward_linear(history, model, n_paths, default_max_trials(model), rng)
          : sample_backward_direct(history, model, n_paths, rng);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& trajectory : sample.paths) {
    const double value = h(StatePath(history, trajectory.indices));
    sum += value;
    sum_sq += value * value;
  }
  const double count = static_cast<double>(n_paths);
  check.ffbsi_value = sum / count;
  if (n_paths > 1) {
    const double variance =
        std::max(0.0, (sum_sq - count * check.ffbsi_value * check.ffbsi_value) / (count - 1));
    check.ffbsi_std_error = std::sqrt(variance / count);
  }
  check.ffbsm_value = enumerate_joint_ffbsm(history, model, h);
  check.counters = std::move(sample.counters);
  return check;
}

}  // namespace smc
