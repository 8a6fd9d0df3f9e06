#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "smc/model.hpp"
#include "smc/rng.hpp"
#include "smc/types.hpp"

namespace smc {

using StateFunction = std::function<double(StateView)>;

// Particles xi^i (flat, N x state_dim) with unnormalized importance weights.
//
// Weights are stored as computed unless their maximum leaves [2^-256, 2^256],
// in which case all are multiplied by the same power of two (an exact
// operation); log_norm absorbs the factor. log_norm is the running log of
// the marginal likelihood estimate p(y_0..y_t).
struct WeightedSample {
  std::size_t state_dim = 1;
  std::vector<double> particles;
  std::vector<double> weights;
  double weight_sum = 0.0;
  double log_norm = 0.0;

  std::size_t size() const { return weights.size(); }
  StateView particle(std::size_t i) const {
    return StateView(particles.data() + i * state_dim, state_dim);
  }
};

// Output of the forward pass. ancestors[t][i] is the index at time t-1 that
// particle i at time t descends from; ancestors[0] is empty.
struct ForwardHistory {
  std::vector<WeightedSample> steps;
  std::vector<std::vector<Index>> ancestors;
  std::size_t n_particles = 0;

  std::size_t horizon() const { return steps.size() - 1; }
  std::size_t state_dim() const { return steps.front().state_dim; }
};

// N i.i.d. draws from the initial proposal, weighted by
// (initial_density / initial_proposal_density) * g_0. Particle i uses the
// substream (kInit, 0, i) of `rng`.
WeightedSample init_particles(const ModelSpec& model, const ProposalSpec& proposal,
                              std::size_t n, const RngStream& rng);

// One auxiliary particle filter step to time t >= 1. Ancestors are drawn
// with probabilities proportional to w_{t-1} * adjustment_t, particles from
// the proposal kernel, and weights m g_t / (adjustment p_t). Bootstrap
// proposals store g_t(xi) directly.
std::pair<WeightedSample, std::vector<Index>> apf_step(const WeightedSample& prev,
                                                        const ModelSpec& model,
                                                        const ProposalSpec& proposal,
                                                        std::size_t t,
                                                        const RngStream& rng);

// init_particles then apf_step for t = 1..T. Deterministic in (seed, n).
ForwardHistory run_filter(const ModelSpec& model, const ProposalSpec& proposal,
                          std::size_t n, std::uint64_t seed);

// Self-normalized estimate sum_i w_i h(xi_i) / sum_i w_i.
double filter_estimate(const WeightedSample& sample, const StateFunction& h);

}  // namespace smc
