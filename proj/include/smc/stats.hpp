#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace smc::stats {

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t degrees_of_freedom = 0;
  double p_value = 1.0;
};

// Pearson goodness of fit of observed counts against expected probabilities.
// Cells whose expected count is below `min_expected` are pooled into one
// cell (dropped if the pool itself stays below the threshold).
ChiSquareResult chi_square_gof(std::span<const std::uint64_t> observed,
                               std::span<const double> probabilities,
                               double min_expected = 5.0);

// One-sample Kolmogorov-Smirnov test against U(0, 1), asymptotic p-value.
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KsResult ks_uniform(std::vector<double> sample);

double mean(std::span<const double> values);
// Unbiased sample variance.
double variance(std::span<const double> values);
double std_dev(std::span<const double> values);
double std_error(std::span<const double> values);
double rms(std::span<const double> values);

// Least-squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

}  // namespace smc::stats
