#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "smc/apf.hpp"
#include "smc/model.hpp"
#include "smc/types.hpp"

namespace smc {

// Marginal smoothing weights w_{s|T}^i; each slice is a probability vector
// and slice T equals the normalized terminal filter weights.
struct SmoothingWeights {
  std::vector<std::vector<double>> per_time;
};

// Backward transition row at time t against a later state x':
// row_j = w_t^j m(xi_t^j, x') / sum_l w_t^l m(xi_t^l, x'). O(N).
std::vector<double> backward_weight_row(const ForwardHistory& history,
                                        const ModelSpec& model, std::size_t t,
                                        StateView next_state);

// Unnormalized version of the row into `out`; returns the row total.
// Throws degenerate-backward-kernel when the total is zero.
double fill_backward_row(const ForwardHistory& history, const ModelSpec& model,
                         std::size_t t, StateView next_state, std::span<double> out);

// Backward recursion
//   w_{s|T}^i = sum_j [w_s^i m(xi_s^i, xi_{s+1}^j) / D_j] w_{s+1|T}^j,
//   D_j = sum_l w_s^l m(xi_s^l, xi_{s+1}^j),
// in Theta(N^2 T) kernel evaluations (one per (i, j) pair: kernel blocks are
// evaluated once and used for both the denominators and the update).
SmoothingWeights marginal_smoothing_weights(const ForwardHistory& history,
                                            const ModelSpec& model);

// sum_i w_{s|T}^i h(xi_s^i).
double marginal_estimate(const ForwardHistory& history, const SmoothingWeights& weights,
                         std::size_t s, const StateFunction& h);

// Ancestral lines of the terminal particles. indices[t][i] is the particle
// at time t on the line ending in terminal particle i.
struct GenealogyPaths {
  std::vector<std::vector<Index>> indices;
  std::vector<double> weights;

  // Number of distinct particles at time t across all lines.
  std::size_t distinct_at(std::size_t t) const;
};

GenealogyPaths genealogy_trace_smoother(const ForwardHistory& history);

// Terminal-weighted average of h over the states of each line at time s.
double genealogy_estimate(const ForwardHistory& history, const GenealogyPaths& paths,
                          std::size_t s, const StateFunction& h);

}  // namespace smc
