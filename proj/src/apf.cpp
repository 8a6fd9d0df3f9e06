#include "smc/apf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "smc/error.hpp"
#include "smc/sampling.hpp"

namespace smc {
namespace {

constexpr int kRescaleExponent = 256;

// Validates the freshly computed weights, rescales by a power of two when
// they drift out of range, and fills weight_sum. Returns the log of the
// applied factor.
double finalize_weights(WeightedSample& sample, std::size_t t) {
  double max_weight = 0.0;
  for (std::size_t i = 0; i < sample.weights.size(); ++i) {
    const double w = sample.weights[i];
    if (std::isnan(w)) {
      raise(ErrorKind::kNumeric, "NaN weight for particle " + std::to_string(i) +
                                     " at t=" + std::to_string(t));
    }
    if (!std::isfinite(w) || w < 0.0) {
      raise(ErrorKind::kNumeric, "invalid weight for particle " + std::to_string(i) +
                                     " at t=" + std::to_string(t));
    }
    max_weight = std::max(max_weight, w);
  }
  if (max_weight == 0.0) {
    raise(ErrorKind::kParticleCollapse,
          "all particle weights are zero at t=" + std::to_string(t));
  }
  int shift = 0;
  const int exponent = std::ilogb(max_weight);
  if (exponent > kRescaleExponent || exponent < -kRescaleExponent) {
    shift = -exponent;
    for (double& w : sample.weights) w = std::ldexp(w, shift);
  }
  double sum = 0.0;
  for (double w : sample.weights) sum += w;
  sample.weight_sum = sum;
  return static_cast<double>(shift) * std::numbers::ln2;
}

}  // namespace

WeightedSample init_particles(const ModelSpec& model, const ProposalSpec& proposal,
                              std::size_t n, const RngStream& rng) {
  if (n == 0) raise(ErrorKind::kInvalidParameter, "particle count must be positive");
  const std::size_t d = model.state_dim;
  WeightedSample sample;
  sample.state_dim = d;
  sample.particles.resize(n * d);
  sample.weights.resize(n);
  const bool bootstrap = proposal.kind == ProposalKind::kBootstrap;
  for (std::size_t i = 0; i < n; ++i) {
    RngStream stream = rng.derive(StreamPurpose::kInit, 0, i);
    const StateOut out(sample.particles.data() + i * d, d);
    proposal.initial_sampler(stream, out);
    const StateView x(out.data(), d);
    const double g = model.likelihood(0, x);
    sample.weights[i] =
        bootstrap ? g : model.initial_density(x) / proposal.initial_density(x) * g;
  }
  const double log_factor = finalize_weights(sample, 0);
  sample.log_norm =
      std::log(sample.weight_sum / static_cast<double>(n)) - log_factor;
  return sample;
}

std::pair<WeightedSample, std::vector<Index>> apf_step(const WeightedSample& prev,
                                                        const ModelSpec& model,
                                                        const ProposalSpec& proposal,
                                                        std::size_t t,
                                                        const RngStream& rng) {
  if (t == 0) raise(ErrorKind::kInvalidParameter, "apf_step needs t >= 1");
  if (!(prev.weight_sum > 0.0)) {
    raise(ErrorKind::kParticleCollapse,
          "previous weight sum is not positive at t=" + std::to_string(t - 1));
  }
  const std::size_t n = prev.size();
  const std::size_t d = prev.state_dim;
  const bool bootstrap = proposal.kind == ProposalKind::kBootstrap;
  const bool fully_adapted = proposal.kind == ProposalKind::kFullyAdapted;

  std::vector<double> first_stage(n);
  std::vector<double> adjustment(n, 1.0);
  double first_stage_sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!bootstrap) adjustment[j] = proposal.adjustment(t, prev.particle(j));
    first_stage[j] = prev.weights[j] * adjustment[j];
    first_stage_sum += first_stage[j];
  }
  TrialCounters unused;
  RngStream ancestor_stream = rng.derive(StreamPurpose::kAncestors, t);
  std::vector<Index> ancestors =
      multinomial_sample(first_stage, n, ancestor_stream, unused);

  WeightedSample next;
  next.state_dim = d;
  next.particles.resize(n * d);
  next.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream stream = rng.derive(StreamPurpose::kPropagate, t, i);
    const StateView parent = prev.particle(ancestors[i]);
    const StateOut out(next.particles.data() + i * d, d);
    proposal.sampler(t, parent, stream, out);
    const StateView x(out.data(), d);
    if (fully_adapted) {
      // m g / (predictive * optimal) is identically one.
      next.weights[i] = 1.0;
      continue;
    }
    const double g = model.likelihood(t, x);
    next.weights[i] =
        bootstrap ? g
                  : model.transition_density(parent, x) * g /
                        (adjustment[ancestors[i]] * proposal.density(t, parent, x));
  }
  const double log_factor = finalize_weights(next, t);
  next.log_norm = prev.log_norm + std::log(first_stage_sum / prev.weight_sum) +
                  std::log(next.weight_sum / static_cast<double>(n)) - log_factor;
  return {std::move(next), std::move(ancestors)};
}

ForwardHistory run_filter(const ModelSpec& model, const ProposalSpec& proposal,
                          std::size_t n, std::uint64_t seed) {
  if (model.n_obs == 0) raise(ErrorKind::kInvalidParameter, "model has no observations");
  const RngStream root(seed);
  ForwardHistory history;
  history.n_particles = n;
  history.steps.reserve(model.n_obs);
  history.ancestors.reserve(model.n_obs);
  history.steps.push_back(init_particles(model, proposal, n, root));
  history.ancestors.emplace_back();
  for (std::size_t t = 1; t < model.n_obs; ++t) {
    auto [sample, ancestors] = apf_step(history.steps.back(), model, proposal, t, root);
    history.steps.push_back(std::move(sample));
    history.ancestors.push_back(std::move(ancestors));
  }
  return history;
}

double filter_estimate(const WeightedSample& sample, const StateFunction& h) {
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double w = sample.weights[i];
    if (w == 0.0) continue;
    numerator += w * h(sample.particle(i));
    denominator += w;
  }
  return numerator / denominator;
}

}  // namespace smc
