#include "smc/sampling.hpp"

#include <atomic>
#include <cmath>
#include <numeric>
#include <string>

#include "smc/error.hpp"

namespace smc {
namespace {

std::atomic<bool> boundary_fault{false};

// True when the key lies at or above q, i.e. the search must move right.
// The injected fault turns the boundary case around.
inline bool at_or_above(double u, double q, bool fault) { return fault ? u > q : u >= q; }

}  // namespace

void set_search_boundary_fault(bool enabled) { boundary_fault.store(enabled); }

void PrefixSums::assign(std::span<const double> weights) {
  if (weights.empty()) {
    raise(ErrorKind::kInvalidWeights, "empty weight vector");
  }
  q_.resize(weights.size());
  double running = 0.0;
  bool any_positive = false;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double w = weights[k];
    if (!(w >= 0.0) || !std::isfinite(w)) {
      raise(ErrorKind::kInvalidWeights,
            "weight " + std::to_string(k) + " is negative or not finite");
    }
    any_positive = any_positive || w > 0.0;
    running += w;
    q_[k] = running;
  }
  if (!any_positive) {
    raise(ErrorKind::kInvalidWeights, "all weights are zero");
  }
  if (!std::isfinite(running)) {
    raise(ErrorKind::kInvalidWeights, "weight total overflows");
  }
}

double PrefixSums::scale(double unit) const {
  const double u = unit * total();
  // Rounding can land exactly on the total when unit is within an ulp of 1.
  return u < total() ? u : std::nextafter(total(), 0.0);
}

Index categorical_search(const PrefixSums& prefix, double u,
                         TrialCounters& counters) {
  if (!(u >= 0.0) || !(u < prefix.total())) {
    raise(ErrorKind::kContractViolation,
          "search key outside [0, total): " + std::to_string(u));
  }
  // Invariant: q_l <= u < q_r with the virtual q_{-1} = 0.
  std::ptrdiff_t l = -1;
  auto r = static_cast<std::ptrdiff_t>(prefix.size()) - 1;
  std::uint64_t comparisons = 0;
  const bool fault = boundary_fault.load(std::memory_order_relaxed);
  while (r - l > 1) {
    const std::ptrdiff_t m = l + (r - l) / 2;
    ++comparisons;
    if (at_or_above(u, prefix[static_cast<std::size_t>(m)], fault)) {
      l = m;
    } else {
      r = m;
    }
  }
  counters.comparisons += comparisons;
  counters.elementary_ops += comparisons;
  return static_cast<Index>(r);
}

std::vector<double> uniform_order_statistics(std::size_t n, RngStream& rng) {
  std::vector<double> sorted(n);
  if (n == 0) return sorted;
  for (;;) {
    double running = 0.0;
    for (auto& value : sorted) {
      running += rng.exponential();
      value = running;
    }
    const double total = running + rng.exponential();
    bool strictly_inside = true;
    double previous = 0.0;
    for (auto& value : sorted) {
      value /= total;
      if (!(value > previous) || !(value < 1.0)) strictly_inside = false;
      previous = value;
    }
    // Ties and boundary hits only arise from rounding; redraw.
    if (strictly_inside) return sorted;
  }
}

std::vector<Index> galloping_search(const PrefixSums& prefix,
                                    std::span<const double> sorted_keys,
                                    TrialCounters& counters) {
  std::vector<Index> out(sorted_keys.size());
  // 1-based positions into q with the virtual q_0 = 0; q(r) reads q_{r-1}.
  const std::size_t size = prefix.size();
  auto q = [&prefix](std::size_t r) { return prefix[r - 1]; };
  std::size_t l = 0;
  std::size_t r = 1;
  std::uint64_t comparisons = 0;
  const bool fault = boundary_fault.load(std::memory_order_relaxed);
  for (std::size_t k = 0; k < sorted_keys.size(); ++k) {
    const double u = sorted_keys[k];
    unsigned d = 1;
    for (;;) {
      ++comparisons;
      if (!at_or_above(u, q(r), fault)) break;
      l = r;
      const std::size_t step = d < 63 ? (std::size_t{1} << d) : size;
      r = (size - r > step) ? r + step : size;
      ++d;
    }
    while (r - l > 1) {
      const std::size_t m = (l + r) / 2;
      ++comparisons;
      if (at_or_above(u, q(m), fault)) {
        l = m;
      } else {
        r = m;
      }
    }
    out[k] = static_cast<Index>(r - 1);
  }
  counters.comparisons += comparisons;
  counters.elementary_ops += comparisons;
  return out;
}

std::vector<Index> multinomial_sample(const PrefixSums& prefix, std::size_t n,
                                      RngStream& rng, TrialCounters& counters) {
  std::vector<Index> out(n);
  if (n == 0) return out;
  std::vector<double> keys = uniform_order_statistics(n, rng);
  for (double& key : keys) key = prefix.scale(key);

  // Fisher-Yates; slot perm[k] receives the k-th smallest draw.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t k = n - 1; k > 0; --k) {
    std::swap(perm[k], perm[rng.below(k + 1)]);
  }
  const std::vector<Index> sorted_draws = galloping_search(prefix, keys, counters);
  for (std::size_t k = 0; k < n; ++k) out[perm[k]] = sorted_draws[k];
  // n + 1 exponentials for the spacings, n - 1 permutation draws.
  counters.elementary_ops += 2 * n;
  return out;
}

std::vector<Index> multinomial_sample(std::span<const double> weights,
                                      std::size_t n, RngStream& rng,
                                      TrialCounters& counters) {
  const PrefixSums prefix(weights);
  counters.elementary_ops += weights.size();
  return multinomial_sample(prefix, n, rng, counters);
}

}  // namespace smc
