#include "smc/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "smc/error.hpp"

namespace smc::stats {

ChiSquareResult chi_square_gof(std::span<const std::uint64_t> observed,
                               std::span<const double> probabilities,
                               double min_expected) {
  if (observed.size() != probabilities.size() || observed.empty()) {
    raise(ErrorKind::kInvalidParameter, "chi-square: mismatched cell counts");
  }
  double total = 0.0;
  for (auto count : observed) total += static_cast<double>(count);

  ChiSquareResult result;
  std::size_t cells = 0;
  double pooled_expected = 0.0;
  double pooled_observed = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double expected = total * probabilities[k];
    const auto seen = static_cast<double>(observed[k]);
    if (expected < min_expected) {
      pooled_expected += expected;
      pooled_observed += seen;
      continue;
    }
    result.statistic += (seen - expected) * (seen - expected) / expected;
    ++cells;
  }
  if (pooled_expected >= min_expected) {
    result.statistic +=
        (pooled_observed - pooled_expected) * (pooled_observed - pooled_expected) /
        pooled_expected;
    ++cells;
  }
  if (cells < 2) {
    result.degrees_of_freedom = 0;
    result.p_value = 1.0;
    return result;
  }
  result.degrees_of_freedom = cells - 1;
  const boost::math::chi_squared dist(static_cast<double>(result.degrees_of_freedom));
  result.p_value = boost::math::cdf(boost::math::complement(dist, result.statistic));
  return result;
}

KsResult ks_uniform(std::vector<double> sample) {
  if (sample.empty()) raise(ErrorKind::kInvalidParameter, "KS test on empty sample");
  std::sort(sample.begin(), sample.end());
  const auto n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double x = std::clamp(sample[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - x, x - static_cast<double>(i) / n});
  }
  // Kolmogorov limit distribution with the Stephens small-sample correction.
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    p += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return {d, std::clamp(p, 0.0, 1.0)};
}

double mean(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double sum = 0.0;
  for (double v : values) sum += (v - m) * (v - m);
  return sum / static_cast<double>(values.size() - 1);
}

double std_dev(std::span<const double> values) { return std::sqrt(variance(values)); }

double std_error(std::span<const double> values) {
  return std_dev(values) / std::sqrt(static_cast<double>(values.size()));
}

double rms(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum / static_cast<double>(values.size()));
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace smc::stats
