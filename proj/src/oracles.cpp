#include "smc/oracles.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "smc/error.hpp"
#include "smc/ffbsm.hpp"

namespace smc {
namespace {

double count_outcomes(std::size_t base, std::size_t digits) {
  return std::pow(static_cast<double>(base), static_cast<double>(digits));
}

void require_enumerable(double outcomes, double limit) {
  if (outcomes > limit) {
    raise(ErrorKind::kInfeasible, "enumeration of " + std::to_string(outcomes) +
                                      " outcomes exceeds the limit " +
                                      std::to_string(limit));
  }
}

double normalize(std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  for (double& x : v) x /= total;
  return total;
}

}  // namespace

KalmanResult rts_smooth(double phi, double sigma_v, double sigma_w,
                        const ObservationRecord& obs, LgssmInit init) {
  if (!(sigma_v > 0.0) || !(sigma_w > 0.0)) {
    raise(ErrorKind::kInvalidParameter, "sigma_v and sigma_w must be positive");
  }
  if (obs.values.empty()) raise(ErrorKind::kInvalidParameter, "observation record is empty");
  const std::size_t steps = obs.size();
  const double q = sigma_v * sigma_v;
  const double r = sigma_w * sigma_w;
  KalmanResult result;
  result.filtered.resize(steps);
  result.smoothed.resize(steps);
  std::vector<GaussianBelief> predicted(steps);

  predicted[0] = {0.0, lgssm_initial_variance(phi, sigma_v, init)};
  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0) {
      const auto& prev = result.filtered[t - 1];
      predicted[t] = {phi * prev.mean, phi * phi * prev.variance + q};
    }
    const auto& prior = predicted[t];
    const double innovation_var = prior.variance + r;
    const double innovation = obs.values[t] - prior.mean;
    const double gain = prior.variance / innovation_var;
    result.filtered[t] = {prior.mean + gain * innovation, (1.0 - gain) * prior.variance};
    result.log_likelihood += -0.5 * (std::log(2.0 * std::numbers::pi * innovation_var) +
                                     innovation * innovation / innovation_var);
  }

  result.smoothed[steps - 1] = result.filtered[steps - 1];
  for (std::size_t t = steps - 1; t-- > 0;) {
    const auto& filt = result.filtered[t];
    const auto& later = result.smoothed[t + 1];
    const double gain = filt.variance * phi / predicted[t + 1].variance;
    result.smoothed[t] = {
        filt.mean + gain * (later.mean - predicted[t + 1].mean),
        filt.variance + gain * gain * (later.variance - predicted[t + 1].variance)};
  }
  return result;
}

DiscreteMarginals forward_backward(const Matrix& trans, const std::vector<double>& init,
                                   const Matrix& likelihoods) {
  const std::size_t k = trans.size();
  const std::size_t steps = likelihoods.size();
  if (steps == 0) raise(ErrorKind::kInvalidParameter, "no observations");
  DiscreteMarginals out;
  out.filtered.assign(steps, std::vector<double>(k));
  out.smoothed.assign(steps, std::vector<double>(k));

  std::vector<double> predicted = init;
  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0) {
      std::fill(predicted.begin(), predicted.end(), 0.0);
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          predicted[j] += out.filtered[t - 1][i] * trans[i][j];
        }
      }
    }
    auto& alpha = out.filtered[t];
    for (std::size_t j = 0; j < k; ++j) alpha[j] = predicted[j] * likelihoods[t][j];
    const double scale = normalize(alpha);
    if (!(scale > 0.0)) {
      raise(ErrorKind::kImpossibleObservation,
            "observation at t=" + std::to_string(t) + " has zero probability");
    }
    out.log_likelihood += std::log(scale);
  }

  std::vector<double> beta(k, 1.0);
  std::vector<double> next_beta(k);
  out.smoothed[steps - 1] = out.filtered[steps - 1];
  for (std::size_t t = steps - 1; t-- > 0;) {
    for (std::size_t i = 0; i < k; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        sum += trans[i][j] * likelihoods[t + 1][j] * beta[j];
      }
      next_beta[i] = sum;
    }
    normalize(next_beta);
    beta.swap(next_beta);
    auto& gamma = out.smoothed[t];
    for (std::size_t i = 0; i < k; ++i) gamma[i] = out.filtered[t][i] * beta[i];
    normalize(gamma);
  }
  return out;
}

DiscreteMarginals discrete_forward_backward(const Matrix& trans, const EmissionDensity& emit,
                                            const std::vector<double>& init,
                                            const ObservationRecord& obs) {
  validate_discrete_params(trans, init);
  Matrix likelihoods(obs.size(), std::vector<double>(trans.size()));
  for (std::size_t t = 0; t < obs.size(); ++t) {
    for (std::size_t j = 0; j < trans.size(); ++j) likelihoods[t][j] = emit(j, obs.values[t]);
  }
  return forward_backward(trans, init, likelihoods);
}

double brute_force_joint(const Matrix& trans, const EmissionDensity& emit,
                         const std::vector<double>& init, const ObservationRecord& obs,
                         const DiscretePathFunction& h) {
  validate_discrete_params(trans, init);
  const std::size_t k = trans.size();
  const std::size_t steps = obs.size();
  require_enumerable(count_outcomes(k, steps), 1e7);
  const auto total_paths = static_cast<std::size_t>(count_outcomes(k, steps));
  std::vector<std::size_t> path(steps, 0);
  double numerator = 0.0;
  double evidence = 0.0;
  for (std::size_t code = 0; code < total_paths; ++code) {
    std::size_t rest = code;
    for (auto& state : path) {
      state = rest % k;
      rest /= k;
    }
    double p = init[path[0]] * emit(path[0], obs.values[0]);
    for (std::size_t t = 1; t < steps && p > 0.0; ++t) {
      p *= trans[path[t - 1]][path[t]] * emit(path[t], obs.values[t]);
    }
    if (p == 0.0) continue;
    evidence += p;
    numerator += p * h(path);
  }
  if (!(evidence > 0.0)) {
    raise(ErrorKind::kImpossibleObservation, "observation record has zero probability");
  }
  return numerator / evidence;
}

double GridDensity::smoothed_expectation(std::size_t t,
                                         const std::function<double(double)>& h) const {
  double sum = 0.0;
  for (std::size_t k = 0; k < nodes.size(); ++k) sum += smoothed[t][k] * h(nodes[k]);
  return sum;
}

GridDensity grid_smoother(const ModelSpec& model, std::size_t grid_size) {
  if (grid_size < 64) raise(ErrorKind::kInvalidParameter, "grid_size must be at least 64");
  if (model.state_dim != 1) {
    raise(ErrorKind::kInvalidParameter, "grid smoother needs a 1-D model");
  }
  const std::size_t g = grid_size;
  GridDensity grid;
  grid.nodes.resize(g);
  for (std::size_t k = 0; k < g; ++k) {
    grid.nodes[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(g);
  }
  // column-major block: kernel[j * g + i] = m(u_i, u_j)
  std::vector<double> kernel(g * g);
  model.transition_matrix(grid.nodes, grid.nodes, kernel);
  Matrix trans(g, std::vector<double>(g));
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = 0; j < g; ++j) trans[i][j] = kernel[j * g + i];
    normalize(trans[i]);
  }
  std::vector<double> init(g);
  for (std::size_t k = 0; k < g; ++k) {
    init[k] = model.initial_density(StateView(&grid.nodes[k], 1));
  }
  normalize(init);
  Matrix likelihoods(model.n_obs, std::vector<double>(g));
  for (std::size_t t = 0; t < model.n_obs; ++t) {
    for (std::size_t k = 0; k < g; ++k) {
      likelihoods[t][k] = model.likelihood(t, StateView(&grid.nodes[k], 1));
    }
  }
  DiscreteMarginals marginals = forward_backward(trans, init, likelihoods);
  grid.filtered = std::move(marginals.filtered);
  grid.smoothed = std::move(marginals.smoothed);
  return grid;
}

std::vector<double> enumerate_backward_law(const ForwardHistory& history,
                                           const ModelSpec& model) {
  const std::size_t n = history.n_particles;
  const std::size_t horizon = history.horizon();
  require_enumerable(count_outcomes(n, horizon + 1), 1e7);

  const WeightedSample& last = history.steps[horizon];
  std::vector<double> law(n);
  for (std::size_t j = 0; j < n; ++j) law[j] = last.weights[j] / last.weight_sum;

  std::vector<double> extended;
  for (std::size_t t = horizon; t-- > 0;) {
    // rows[a * n + b] = Lambda_t(a, b): later index a, earlier index b.
    std::vector<double> rows(n * n);
    for (std::size_t a = 0; a < n; ++a) {
      const auto row = backward_weight_row(history, model, t,
                                           history.steps[t + 1].particle(a));
      std::copy(row.begin(), row.end(), rows.begin() + static_cast<std::ptrdiff_t>(a * n));
    }
    // New lowest digit is j_t; the previous lowest digit is j_{t+1}.
    extended.assign(law.size() * n, 0.0);
    for (std::size_t rest = 0; rest < law.size(); ++rest) {
      const double* row = rows.data() + (rest % n) * n;
      for (std::size_t b = 0; b < n; ++b) extended[b + n * rest] = law[rest] * row[b];
    }
    law.swap(extended);
  }
  return law;
}

std::size_t backward_law_offset(std::span<const Index> indices, std::size_t n_particles) {
  std::size_t offset = 0;
  for (std::size_t t = indices.size(); t-- > 0;) offset = offset * n_particles + indices[t];
  return offset;
}

double enumerate_joint_ffbsm(const ForwardHistory& history, const ModelSpec& model,
                             const PathFunction& h) {
  const std::vector<double> law = enumerate_backward_law(history, model);
  const std::size_t n = history.n_particles;
  std::vector<Index> indices(history.horizon() + 1);
  double sum = 0.0;
  for (std::size_t code = 0; code < law.size(); ++code) {
    if (law[code] == 0.0) continue;
    std::size_t rest = code;
    for (auto& index : indices) {
      index = static_cast<Index>(rest % n);
      rest /= n;
    }
    sum += law[code] * h(StatePath(history, indices));
  }
  return sum;
}

}  // namespace smc
