#include "smc/counters.hpp"

#include <algorithm>
#include <numeric>

namespace smc {

std::uint64_t TrialCounters::total_trials() const {
  return std::accumulate(ar_trials.begin(), ar_trials.end(), std::uint64_t{0});
}

void TrialCounters::merge(const TrialCounters& other) {
  if (ar_trials.size() < other.ar_trials.size()) {
    ar_trials.resize(other.ar_trials.size(), 0);
  }
  std::transform(other.ar_trials.begin(), other.ar_trials.end(),
                 ar_trials.begin(), ar_trials.begin(), std::plus<>());
  elementary_ops += other.elementary_ops;
  comparisons += other.comparisons;
  fallback_count += other.fallback_count;
}

}  // namespace smc
