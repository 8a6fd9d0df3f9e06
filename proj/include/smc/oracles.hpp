#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "smc/apf.hpp"
#include "smc/ffbsi.hpp"
#include "smc/model.hpp"

namespace smc {

// Exact reference computations. None of these sit on a performance path.

struct GaussianBelief {
  double mean = 0.0;
  double variance = 0.0;
};

struct KalmanResult {
  std::vector<GaussianBelief> filtered;
  std::vector<GaussianBelief> smoothed;
  double log_likelihood = 0.0;
};

// Kalman filter and Rauch-Tung-Striebel smoother for the model built by
// make_lgssm with the same arguments.
KalmanResult rts_smooth(double phi, double sigma_v, double sigma_w,
                        const ObservationRecord& obs,
                        LgssmInit init = LgssmInit::kAutomatic);

struct DiscreteMarginals {
  // [t][k] probabilities.
  Matrix filtered;
  Matrix smoothed;
  double log_likelihood = 0.0;
};

// Scaled forward-backward recursions for a finite chain, given the
// likelihood of every state at every time ([t][k]).
DiscreteMarginals forward_backward(const Matrix& trans, const std::vector<double>& init,
                                   const Matrix& likelihoods);

DiscreteMarginals discrete_forward_backward(const Matrix& trans, const EmissionDensity& emit,
                                            const std::vector<double>& init,
                                            const ObservationRecord& obs);

using DiscretePathFunction = std::function<double(std::span<const std::size_t>)>;

// E[h(X_0..X_T) | y_0..y_T] by summing over all K^(T+1) state paths
// (at most 10^7).
double brute_force_joint(const Matrix& trans, const EmissionDensity& emit,
                         const std::vector<double>& init, const ObservationRecord& obs,
                         const DiscretePathFunction& h);

// Smoothing and filtering marginals of a 1-D model on [0, 1], discretized at
// the G midpoints (k + 1/2) / G with row-renormalized kernel.
struct GridDensity {
  std::vector<double> nodes;
  Matrix filtered;
  Matrix smoothed;

  // Expectation of h under the smoothing marginal at time t.
  double smoothed_expectation(std::size_t t, const std::function<double(double)>& h) const;
};

GridDensity grid_smoother(const ModelSpec& model, std::size_t grid_size);

// Probability of every index path (j_0..j_T) under the backward chain given
// the forward pass, flattened with j_0 as the fastest-varying digit.
// Requires N^(T+1) <= 10^7.
std::vector<double> enumerate_backward_law(const ForwardHistory& history,
                                           const ModelSpec& model);

// Flat position of an index path in enumerate_backward_law's layout.
std::size_t backward_law_offset(std::span<const Index> indices, std::size_t n_particles);

// Exact value of the joint FFBSm estimator: the expectation of h over the
// backward index law, i.e. the conditional expectation of an FFBSi draw.
double enumerate_joint_ffbsm(const ForwardHistory& history, const ModelSpec& model,
                             const PathFunction& h);

}  // namespace smc
