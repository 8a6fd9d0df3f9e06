#include "smc/ffbsm.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <string>

#include "smc/error.hpp"

namespace smc {
namespace {

constexpr std::size_t kTargetBlock = 1;

void require_time(const ForwardHistory& history, std::size_t t, bool allow_terminal) {
  const std::size_t limit = allow_terminal ? history.horizon() : history.horizon() - 1;
  if (history.steps.empty() || t > limit ||
      (!allow_terminal && history.horizon() == 0)) {
    raise(ErrorKind::kInvalidParameter, "time index " + std::to_string(t) +
                                            " out of range for horizon " +
                                            std::to_string(history.horizon()));
  }
}

}  // namespace

double fill_backward_row(const ForwardHistory& history, const ModelSpec& model,
                         std::size_t t, StateView next_state, std::span<double> out) {
  const WeightedSample& step = history.steps[t];
  model.transition_matrix(step.particles, next_state, out);
  double total = 0.0;
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] *= step.weights[j];
    total += out[j];
  }
  if (!(total > 0.0)) {
    raise(ErrorKind::kDegenerateBackwardKernel,
          "backward row at t=" + std::to_string(t) + " has zero mass");
  }
  return total;
}

std::vector<double> backward_weight_row(const ForwardHistory& history,
                                        const ModelSpec& model, std::size_t t,
                                        StateView next_state) {
  require_time(history, t, false);
  std::vector<double> row(history.n_particles);
  const double total = fill_backward_row(history, model, t, next_state, row);
  for (double& v : row) v /= total;
  return row;
}

SmoothingWeights marginal_smoothing_weights(const ForwardHistory& history,
                                            const ModelSpec& model) {
  const std::size_t horizon = history.horizon();
  const std::size_t n = history.n_particles;
  const std::size_t d = history.state_dim();
  SmoothingWeights result;
  result.per_time.resize(horizon + 1);

  const WeightedSample& last = history.steps[horizon];
  auto& terminal = result.per_time[horizon];
  terminal.resize(n);
  for (std::size_t i = 0; i < n; ++i) terminal[i] = last.weights[i] / last.weight_sum;

  std::vector<double> block(kTargetBlock * n);
  std::vector<double> accum(n);
  const auto size = static_cast<Eigen::Index>(n);
  Eigen::Map<Eigen::ArrayXd> sums(accum.data(), size);
  std::vector<double> targets;
  std::vector<std::size_t> target_index;
  for (std::size_t s = horizon; s-- > 0;) {
    const WeightedSample& here = history.steps[s];
    const WeightedSample& next = history.steps[s + 1];
    const auto& later = result.per_time[s + 1];
    const Eigen::Map<const Eigen::ArrayXd> weights(here.weights.data(), size);
    sums.setZero();

    // Targets with zero smoothing mass contribute nothing.
    target_index.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (later[j] > 0.0) target_index.push_back(j);
    }
    for (std::size_t start = 0; start < target_index.size(); start += kTargetBlock) {
      const std::size_t count = std::min(kTargetBlock, target_index.size() - start);
      targets.resize(count * d);
      for (std::size_t b = 0; b < count; ++b) {
        const StateView x = next.particle(target_index[start + b]);
        std::copy(x.begin(), x.end(), targets.begin() + static_cast<std::ptrdiff_t>(b * d));
      }
      const std::span<double> kernel(block.data(), count * n);
      model.transition_matrix(here.particles, targets, kernel);
      for (std::size_t b = 0; b < count; ++b) {
        const Eigen::Map<const Eigen::ArrayXd> column(kernel.data() + b * n, size);
        const double denominator = (weights * column).sum();
        if (!(denominator > 0.0)) {
          raise(ErrorKind::kDegenerateBackwardKernel,
                "backward kernel vanishes at s=" + std::to_string(s) +
                    " for target " + std::to_string(target_index[start + b]));
        }
        const double coefficient = later[target_index[start + b]] / denominator;
        sums += column * coefficient;
      }
    }

    auto& slice = result.per_time[s];
    slice.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      slice[i] = here.weights[i] * accum[i];
      total += slice[i];
    }
    // Analytically the slice sums to one; renormalize away rounding drift.
    for (double& v : slice) v /= total;
  }
  return result;
}

double marginal_estimate(const ForwardHistory& history, const SmoothingWeights& weights,
                         std::size_t s, const StateFunction& h) {
  require_time(history, s, true);
  const auto& slice = weights.per_time[s];
  const WeightedSample& step = history.steps[s];
  double sum = 0.0;
  for (std::size_t i = 0; i < slice.size(); ++i) {
    if (slice[i] == 0.0) continue;
    sum += slice[i] * h(step.particle(i));
  }
  return sum;
}

std::size_t GenealogyPaths::distinct_at(std::size_t t) const {
  std::vector<Index> seen = indices[t];
  std::sort(seen.begin(), seen.end());
  return static_cast<std::size_t>(std::unique(seen.begin(), seen.end()) - seen.begin());
}

GenealogyPaths genealogy_trace_smoother(const ForwardHistory& history) {
  const std::size_t horizon = history.horizon();
  const std::size_t n = history.n_particles;
  GenealogyPaths paths;
  paths.indices.resize(horizon + 1);
  auto& current = paths.indices[horizon];
  current.resize(n);
  for (std::size_t i = 0; i < n; ++i) current[i] = static_cast<Index>(i);
  for (std::size_t t = horizon; t > 0; --t) {
    const auto& ancestors = history.ancestors[t];
    auto& earlier = paths.indices[t - 1];
    earlier.resize(n);
    for (std::size_t i = 0; i < n; ++i) earlier[i] = ancestors[paths.indices[t][i]];
  }
  paths.weights = history.steps[horizon].weights;
  return paths;
}

double genealogy_estimate(const ForwardHistory& history, const GenealogyPaths& paths,
                          std::size_t s, const StateFunction& h) {
  require_time(history, s, true);
  const WeightedSample& step = history.steps[s];
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t i = 0; i < paths.weights.size(); ++i) {
    const double w = paths.weights[i];
    if (w == 0.0) continue;
    numerator += w * h(step.particle(paths.indices[s][i]));
    denominator += w;
  }
  return numerator / denominator;
}

}  // namespace smc
