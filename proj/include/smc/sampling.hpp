#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "smc/counters.hpp"
#include "smc/rng.hpp"
#include "smc/types.hpp"

namespace smc {

// Running sums q_k = p_0 + ... + p_k of a nonnegative weight vector.
//
// Construction validates the weights (finite, nonnegative, at least one
// positive). The last entry is the weight total by construction, and draws
// are taken in [0, total()), so a search never runs off the top.
class PrefixSums {
 public:
  PrefixSums() = default;
  explicit PrefixSums(std::span<const double> weights) { assign(weights); }

  // Recomputes in place, reusing storage.
  void assign(std::span<const double> weights);

  std::size_t size() const { return q_.size(); }
  double total() const { return q_.back(); }
  double operator[](std::size_t k) const { return q_[k]; }
  std::span<const double> values() const { return q_; }

  // Maps a unit-interval draw onto [0, total()).
  double scale(double unit) const;

 private:
  std::vector<double> q_;
};

// Smallest index r with u < q_r. Bisection only; at most ceil(log2 N) + 1
// comparisons, each counted in `counters`. Requires 0 <= u < total().
Index categorical_search(const PrefixSums& prefix, double u,
                         TrialCounters& counters);

// Sorted draws distributed as the order statistics of n i.i.d. U(0,1),
// built from normalized cumulative exponential spacings in O(n). Output is
// strictly increasing and inside (0, 1).
std::vector<double> uniform_order_statistics(std::size_t n, RngStream& rng);

// Locates each of the nondecreasing keys (in [0, total)) in the prefix sums:
// a doubling search resuming from the previous key's position, then
// bisection. Returns, for each key, the smallest r with key < q_r.
std::vector<Index> galloping_search(const PrefixSums& prefix,
                                    std::span<const double> sorted_keys,
                                    TrialCounters& counters);

// n i.i.d. categorical draws with probabilities proportional to the weights
// behind `prefix`.
//
// Sorted uniforms are located by a galloping (doubling) search that resumes
// from the previous position followed by bisection, then scattered through a
// uniform random permutation so every output slot is exchangeable. Search
// cost is O(n + n log(1 + N/n)) comparisons; prefix sums are not recounted.
std::vector<Index> multinomial_sample(const PrefixSums& prefix, std::size_t n,
                                      RngStream& rng, TrialCounters& counters);

// Convenience overload that builds the prefix sums (N accumulations are
// added to elementary_ops, not to comparisons).
std::vector<Index> multinomial_sample(std::span<const double> weights,
                                      std::size_t n, RngStream& rng,
                                      TrialCounters& counters);

// Mutation hook for the self-test: when enabled, both searches treat a key
// equal to q_r as falling in category r (off by one at the boundary).
void set_search_boundary_fault(bool enabled);

}  // namespace smc
