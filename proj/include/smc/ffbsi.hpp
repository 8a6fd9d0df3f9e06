#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "smc/apf.hpp"
#include "smc/counters.hpp"
#include "smc/model.hpp"
#include "smc/rng.hpp"
#include "smc/types.hpp"

namespace smc {

// An index path J_0..J_T into the forward particle arrays.
struct BackwardTrajectory {
  std::vector<Index> indices;
};

struct BackwardSample {
  std::vector<BackwardTrajectory> paths;
  TrialCounters counters;
};

// The states visited by an index path; a view into the history.
class StatePath {
 public:
  StatePath(const ForwardHistory& history, const std::vector<Index>& indices)
      : history_(&history), indices_(&indices) {}

  std::size_t size() const { return indices_->size(); }
  StateView at(std::size_t t) const {
    return history_->steps[t].particle((*indices_)[t]);
  }

 private:
  const ForwardHistory* history_;
  const std::vector<Index>* indices_;
};

using PathFunction = std::function<double(const StatePath&)>;

// Lifts a function of x_s to a path function.
PathFunction at_time(std::size_t s, StateFunction h);

// Draws index paths from the backward chain by materializing each backward
// row and searching it: J_T proportional to w_T, then J_t from the row
// against xi_{t+1}^{J_{t+1}}. Theta(n_paths N T).
BackwardSample sample_backward_direct(const ForwardHistory& history,
                                      const ModelSpec& model, std::size_t n_paths,
                                      const RngStream& rng);

// 100 * ceil(sigma_plus / sigma_minus) when both bounds are known, else 10^4.
std::size_t default_max_trials(const ModelSpec& model);

// Accept-reject backward simulation with linear expected cost under the
// strong mixing bounds.
//
// At each step s every unfinished path proposes an index I proportional to
// w_s (one batched multinomial draw for the whole active list) and accepts it
// with probability m(xi_s^I, xi_{s+1}^{J_{s+1}}) / sigma_plus; rejected paths
// try again in the next round. A path rejected max_trials_per_draw times is
// resolved by one exact backward-row draw, which has the same law, and is
// counted in fallback_count. Requires model.sigma_plus; a kernel value above
// it raises bound-violation.
BackwardSample sample_backward_linear(const ForwardHistory& history,
                                      const ModelSpec& model, std::size_t n_paths,
                                      std::size_t max_trials_per_draw,
                                      const RngStream& rng);

// Mean of h over the state paths selected by the trajectories.
double ffbsi_estimate(const ForwardHistory& history,
                      const std::vector<BackwardTrajectory>& trajectories,
                      const PathFunction& h);

struct ConditionalMeanCheck {
  double ffbsi_value = 0.0;
  double ffbsm_value = 0.0;
  // Sample standard deviation of h over the paths divided by sqrt(n_paths).
  double ffbsi_std_error = 0.0;
  TrialCounters counters;
};

// Compares an FFBSi average against the exact conditional expectation given
// the forward pass (full enumeration of the backward index law). Uses the
// accept-reject sampler when sigma_plus is known, the direct one otherwise.
// Requires N^(T+1) <= 10^6.
ConditionalMeanCheck conditional_mean_check(const ForwardHistory& history,
                                            const ModelSpec& model, const PathFunction& h,
                                            std::size_t n_paths, const RngStream& rng);

}  // namespace smc
