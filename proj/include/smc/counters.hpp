#pragma once

#include <cstdint>
#include <vector>

namespace smc {

// Operation accounting for the backward samplers and the multinomial
// sampler. An elementary operation is one density evaluation, one
// comparison, one random draw or one accumulation; `comparisons` isolates
// the search comparisons made by the multinomial sampler.
struct TrialCounters {
  // Accept-reject proposals drawn at each backward step s (index s).
  std::vector<std::uint64_t> ar_trials;
  std::uint64_t elementary_ops = 0;
  std::uint64_t comparisons = 0;
  // Draws resolved by an exact backward-row draw after too many rejections.
  std::uint64_t fallback_count = 0;

  std::uint64_t total_trials() const;
  // Counters from independent workers add up.
  void merge(const TrialCounters& other);
};

}  // namespace smc
