#pragma once

#include <cstdint>
#include <vector>

#include "smc/model.hpp"
#include "smc/rng.hpp"

namespace smc::testing {

inline const Matrix& two_state_trans() {
  static const Matrix trans{{0.95, 0.05}, {0.1, 0.9}};
  return trans;
}

inline const std::vector<double>& two_state_init() {
  static const std::vector<double> init{0.5, 0.5};
  return init;
}

inline EmissionDensity two_state_emission() {
  return [](std::size_t k, double y) { return normal_pdf(y, static_cast<double>(k), 1.0); };
}

inline ModelSpec two_state_hmm(const ObservationRecord& obs) {
  return make_discrete_hmm(two_state_trans(), two_state_emission(), two_state_init(), obs);
}

// Observations simulated from the model's own dynamics.
inline ObservationRecord simulate_two_state(std::size_t horizon, std::uint64_t seed) {
  const ModelSpec prior = two_state_hmm({{0.0}});
  RngStream rng(seed);
  const auto states = simulate_states(prior, horizon, rng);
  ObservationRecord obs;
  for (double x : states) obs.values.push_back(x + rng.normal());
  return obs;
}

inline ObservationRecord simulate_lgssm(double phi, std::size_t horizon, std::uint64_t seed) {
  const ModelSpec prior = make_lgssm(phi, 1.0, 1.0, {{0.0}});
  RngStream rng(seed);
  const auto states = simulate_states(prior, horizon, rng);
  ObservationRecord obs;
  for (double x : states) obs.values.push_back(x + rng.normal());
  return obs;
}

inline ObservationRecord simulate_compact(double kappa, double sigma_obs, std::size_t horizon,
                                          std::uint64_t seed) {
  const ModelSpec prior = make_compact_rw(kappa, sigma_obs, {{0.5}});
  RngStream rng(seed);
  const auto states = simulate_states(prior, horizon, rng);
  ObservationRecord obs;
  for (double x : states) obs.values.push_back(x + sigma_obs * rng.normal());
  return obs;
}

// A copy of `model` whose kernel density is the constant c (sampler kept).
inline ModelSpec with_constant_kernel(ModelSpec model, double c) {
  model.transition_density = [c](StateView, StateView) { return c; };
  model.transition_block = nullptr;
  model.sigma_minus = c;
  model.sigma_plus = c;
  return model;
}

}  // namespace smc::testing
