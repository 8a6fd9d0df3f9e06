#include "smc/harness/selftest.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>

#include "smc/apf.hpp"
#include "smc/error.hpp"
#include "smc/ffbsi.hpp"
#include "smc/ffbsm.hpp"
#include "smc/model.hpp"
#include "smc/oracles.hpp"
#include "smc/sampling.hpp"
#include "smc/stats.hpp"

namespace smc::harness {
namespace {

// A check returns a failure description, or nothing when it passes.
using Check = std::function<std::optional<std::string>()>;

template <typename... Parts>
std::string cat(const Parts&... parts) {
  std::ostringstream out;
  out.precision(10);
  (out << ... << parts);
  return out.str();
}

RngStream stream(std::uint64_t index) {
  return RngStream(0x5e1f7e57).derive(StreamPurpose::kSelftest, index);
}

// Smallest r with u < q_r, by scanning.
Index linear_locate(const PrefixSums& prefix, double u) {
  Index r = 0;
  while (!(u < prefix[r])) ++r;
  return r;
}

// Weights with zeros and dyadic values so prefix sums are exact and keys can
// sit exactly on a boundary.
std::vector<double> dyadic_weights(std::size_t n, RngStream& rng) {
  std::vector<double> w(n);
  for (double& v : w) v = rng.uniform() < 0.25 ? 0.0 : std::ldexp(1.0 + rng.below(8), -3);
  w[rng.below(n)] = 1.0;
  return w;
}

std::optional<std::string> galloping_correctness() {
  RngStream rng = stream(1);
  for (int instance = 0; instance < 400; ++instance) {
    const std::size_t n = 1 + rng.below(200);
    const PrefixSums prefix(dyadic_weights(n, rng));
    std::vector<double> keys;
    const std::size_t n_keys = 1 + rng.below(300);
    for (std::size_t k = 0; k < n_keys; ++k) {
      // Half the keys land exactly on a prefix value below the total.
      const double q = prefix[rng.below(n)];
      keys.push_back(rng.uniform() < 0.5 && q < prefix.total() ? q : prefix.scale(rng.uniform()));
    }
    keys.push_back(0.0);
    std::sort(keys.begin(), keys.end());
    TrialCounters counters;
    const std::vector<Index> found = galloping_search(prefix, keys, counters);
    for (std::size_t k = 0; k < keys.size(); ++k) {
      const Index expected = linear_locate(prefix, keys[k]);
      if (found[k] != expected) {
        return cat("instance ", instance, ": key ", keys[k], " located at ", found[k],
                   ", expected ", expected);
      }
    }
  }
  return std::nullopt;
}

std::optional<std::string> categorical_boundary() {
  RngStream rng = stream(2);
  for (int instance = 0; instance < 400; ++instance) {
    const std::size_t n = 1 + rng.below(64);
    const PrefixSums prefix(dyadic_weights(n, rng));
    for (std::size_t r = 0; r < n; ++r) {
      const double u = r == 0 ? 0.0 : prefix[r - 1];
      if (!(u < prefix.total())) continue;
      TrialCounters counters;
      const Index found = categorical_search(prefix, u, counters);
      const double mass = prefix[found] - (found > 0 ? prefix[found - 1] : 0.0);
      if (found != linear_locate(prefix, u) || mass == 0.0) {
        return cat("u=", u, " located at ", found, ", expected ", linear_locate(prefix, u));
      }
    }
  }
  return std::nullopt;
}

std::optional<std::string> multinomial_cost_bound() {
  for (std::size_t n_cat : {1000u, 10000u, 100000u}) {
    const auto root = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_cat)));
    for (std::size_t n : {std::size_t{1}, root, n_cat}) {
      RngStream rng = stream(3 + n_cat + n);
      std::vector<double> w(n_cat);
      for (double& v : w) v = rng.exponential();
      const PrefixSums prefix(w);
      TrialCounters counters;
      multinomial_sample(prefix, n, rng, counters);
      const double nd = static_cast<double>(n);
      const double bound = 8.0 * (nd + nd * std::log(1.0 + static_cast<double>(n_cat) / nd));
      if (static_cast<double>(counters.comparisons) > bound) {
        return cat("N=", n_cat, " n=", n, ": ", counters.comparisons, " comparisons > ", bound);
      }
    }
  }
  return std::nullopt;
}

std::optional<std::string> multinomial_chi_square() {
  const std::vector<double> w = {0.5, 0.0, 3.0, 1.0, 0.25, 2.0, 1.5, 0.75, 4.0, 1.0};
  const PrefixSums prefix(w);
  std::vector<double> p(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) p[k] = w[k] / prefix.total();
  int rejections = 0;
  for (int run = 0; run < 100; ++run) {
    RngStream rng = stream(100 + run);
    TrialCounters counters;
    std::vector<std::uint64_t> counts(w.size(), 0);
    for (Index i : multinomial_sample(prefix, 2000, rng, counters)) ++counts[i];
    if (counts[1] != 0) return cat("run ", run, ": zero-weight category drawn");
    if (stats::chi_square_gof(counts, p).p_value < 0.01) ++rejections;
  }
  if (rejections > 2) return cat(rejections, "/100 runs rejected at 1%");
  return std::nullopt;
}

std::optional<std::string> order_statistics() {
  int rejections = 0;
  for (int run = 0; run < 20; ++run) {
    RngStream rng = stream(200 + run);
    const std::vector<double> u = uniform_order_statistics(500, rng);
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (!(u[i] > 0.0 && u[i] < 1.0) || (i > 0 && !(u[i] > u[i - 1]))) {
        return cat("run ", run, ": output not strictly increasing inside (0, 1)");
      }
    }
    if (stats::ks_uniform(u).p_value < 0.01) ++rejections;
  }
  if (rejections > 2) return cat(rejections, "/20 KS tests rejected at 1%");
  return std::nullopt;
}

struct SmallHmm {
  Matrix trans;
  std::vector<double> init;
  EmissionDensity emit;
  ObservationRecord obs;
};

SmallHmm small_hmm(std::size_t k, std::size_t horizon, RngStream& rng) {
  SmallHmm hmm;
  hmm.trans.assign(k, std::vector<double>(k));
  for (auto& row : hmm.trans) {
    double total = 0.0;
    for (double& v : row) total += (v = 0.1 + rng.uniform());
    for (double& v : row) v /= total;
  }
  hmm.init.assign(k, 1.0 / static_cast<double>(k));
  hmm.emit = [](std::size_t state, double y) {
    return normal_pdf(y, static_cast<double>(state), 1.0);
  };
  for (std::size_t t = 0; t <= horizon; ++t) {
    hmm.obs.values.push_back(static_cast<double>(k - 1) * rng.uniform() + rng.normal());
  }
  return hmm;
}

std::optional<std::string> forward_backward_brute_force() {
  RngStream rng = stream(300);
  for (int instance = 0; instance < 10; ++instance) {
    const SmallHmm hmm = small_hmm(2 + instance % 3, 3 + instance % 3, rng);
    const DiscreteMarginals fb =
        discrete_forward_backward(hmm.trans, hmm.emit, hmm.init, hmm.obs);
    for (std::size_t t = 0; t < hmm.obs.size(); ++t) {
      for (std::size_t k = 0; k < hmm.init.size(); ++k) {
        const double brute = brute_force_joint(
            hmm.trans, hmm.emit, hmm.init, hmm.obs,
            [=](std::span<const std::size_t> path) { return path[t] == k ? 1.0 : 0.0; });
        if (std::abs(brute - fb.smoothed[t][k]) > 1e-10) {
          return cat("instance ", instance, " t=", t, " k=", k, ": ", fb.smoothed[t][k],
                     " vs ", brute);
        }
      }
    }
  }
  return std::nullopt;
}

ModelSpec small_compact(std::size_t horizon, RngStream& rng) {
  ObservationRecord obs;
  double x = rng.uniform();
  for (std::size_t t = 0; t <= horizon; ++t) {
    obs.values.push_back(x + 0.1 * rng.normal());
    x = std::clamp(x + 0.3 * rng.normal(), 0.0, 1.0);
  }
  return make_compact_rw(1.0, 0.1, obs);
}

std::optional<std::string> ffbsm_enumeration() {
  RngStream rng = stream(400);
  for (std::uint64_t instance = 0; instance < 6; ++instance) {
    const std::size_t n = 2 + instance % 3;
    const std::size_t horizon = 1 + instance % 3;
    const ModelSpec model = small_compact(horizon, rng);
    const ForwardHistory history = run_filter(model, bootstrap_proposal(model), n, instance);
    const SmoothingWeights sw = marginal_smoothing_weights(history, model);
    const std::vector<double> law = enumerate_backward_law(history, model);
    std::vector<std::vector<double>> exact(horizon + 1, std::vector<double>(n, 0.0));
    for (std::size_t code = 0; code < law.size(); ++code) {
      std::size_t rest = code;
      for (auto& slice : exact) {
        slice[rest % n] += law[code];
        rest /= n;
      }
    }
    for (std::size_t s = 0; s <= horizon; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(sw.per_time[s][i] - exact[s][i]) > 1e-10) {
          return cat("instance ", instance, " s=", s, " i=", i, ": ", sw.per_time[s][i],
                     " vs ", exact[s][i]);
        }
      }
    }
  }
  return std::nullopt;
}

std::optional<std::string> enumeration_normalization() {
  RngStream rng = stream(500);
  const ModelSpec model = small_compact(3, rng);
  const ForwardHistory history = run_filter(model, bootstrap_proposal(model), 4, 5);
  const std::vector<double> law = enumerate_backward_law(history, model);
  double total = 0.0;
  for (double p : law) {
    if (p < 0.0) return cat("negative path probability ", p);
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) return cat("law sums to ", total);
  return std::nullopt;
}

struct BackwardFixture {
  ModelSpec model;
  ForwardHistory history;
};

BackwardFixture backward_fixture(const SelftestOptions& options) {
  RngStream rng = stream(600);
  BackwardFixture f{small_compact(2, rng), {}};
  if (options.understate_sigma_plus) f.model.sigma_plus = 0.25 * *f.model.sigma_plus;
  f.history = run_filter(f.model, bootstrap_proposal(f.model), 3, 17);
  return f;
}

std::optional<std::string> backward_law_chi_square(const SelftestOptions& options, bool linear) {
  const BackwardFixture f = backward_fixture(options);
  const std::vector<double> law = enumerate_backward_law(f.history, f.model);
  constexpr std::size_t kDraws = 200000;
  const BackwardSample sample =
      linear ? sample_backward_linear(f.history, f.model, kDraws, default_max_trials(f.model),
                                      RngStream(23))
             : sample_backward_direct(f.history, f.model, kDraws, RngStream(29));
  std::vector<std::uint64_t> counts(law.size(), 0);
  for (const auto& path : sample.paths) {
    ++counts[backward_law_offset(path.indices, f.history.n_particles)];
  }
  const stats::ChiSquareResult result = stats::chi_square_gof(counts, law);
  if (result.p_value < 1e-3) return cat("chi-square p=", result.p_value);
  return std::nullopt;
}

std::optional<std::string> rao_blackwell(const SelftestOptions& options) {
  const BackwardFixture f = backward_fixture(options);
  const PathFunction h = [](const StatePath& path) {
    double sum = 0.0;
    for (std::size_t t = 0; t < path.size(); ++t) sum += path.at(t)[0];
    return sum;
  };
  const ConditionalMeanCheck check =
      conditional_mean_check(f.history, f.model, h, 200000, RngStream(31));
  const double gap = std::abs(check.ffbsi_value - check.ffbsm_value);
  if (gap > 5.0 * check.ffbsi_std_error) {
    return cat("|ffbsi - ffbsm| = ", gap, " exceeds 5 std err (", check.ffbsi_std_error, ")");
  }
  return std::nullopt;
}

std::optional<std::string> determinism(const SelftestOptions& options) {
  const BackwardFixture f = backward_fixture(options);
  const ForwardHistory again = run_filter(f.model, bootstrap_proposal(f.model), 3, 17);
  for (std::size_t t = 0; t < again.steps.size(); ++t) {
    if (again.steps[t].particles != f.history.steps[t].particles ||
        again.steps[t].weights != f.history.steps[t].weights) {
      return cat("forward pass differs at t=", t);
    }
  }
  const auto draw = [&] {
    return sample_backward_linear(f.history, f.model, 500, default_max_trials(f.model),
                                  RngStream(37));
  };
  const BackwardSample a = draw();
  const BackwardSample b = draw();
  for (std::size_t i = 0; i < a.paths.size(); ++i) {
    if (a.paths[i].indices != b.paths[i].indices) return cat("backward path ", i, " differs");
  }
  if (a.counters.elementary_ops != b.counters.elementary_ops) return "counters differ";
  return std::nullopt;
}

std::optional<std::string> rts_joint_gaussian() {
  constexpr int kSize = 3;
  const double phi = 0.7;
  const double sv = 1.2;
  const double sw = 0.6;
  const ObservationRecord obs{{0.4, -1.1, 0.9}};
  const double v0 = lgssm_initial_variance(phi, sv);
  Eigen::Matrix3d cov;
  for (int s = 0; s < kSize; ++s) {
    double var = v0;
    for (int t = 1; t <= s; ++t) var = phi * phi * var + sv * sv;
    for (int t = s; t < kSize; ++t) cov(s, t) = cov(t, s) = std::pow(phi, t - s) * var;
  }
  const Eigen::Matrix3d obs_cov = cov + sw * sw * Eigen::Matrix3d::Identity();
  const Eigen::Vector3d y(obs.values[0], obs.values[1], obs.values[2]);
  const Eigen::Vector3d mean = cov * obs_cov.ldlt().solve(y);
  const Eigen::Matrix3d post = cov - cov * obs_cov.ldlt().solve(cov);
  const KalmanResult k = rts_smooth(phi, sv, sw, obs);
  for (int t = 0; t < kSize; ++t) {
    if (std::abs(k.smoothed[t].mean - mean[t]) > 1e-10 ||
        std::abs(k.smoothed[t].variance - post(t, t)) > 1e-10) {
      return cat("t=", t, ": RTS (", k.smoothed[t].mean, ", ", k.smoothed[t].variance,
                 ") vs direct (", mean[t], ", ", post(t, t), ")");
    }
  }
  return std::nullopt;
}

std::optional<std::string> bootstrap_weights() {
  const ObservationRecord obs{{0.3, -0.2, 1.0}};
  const ModelSpec model = make_lgssm(0.9, 1.0, 1.0, obs);
  const ForwardHistory history = run_filter(model, bootstrap_proposal(model), 50, 3);
  for (std::size_t t = 0; t < obs.size(); ++t) {
    const WeightedSample& step = history.steps[t];
    for (std::size_t i = 0; i < step.size(); ++i) {
      if (step.weights[i] != model.likelihood(t, step.particle(i))) {
        return cat("t=", t, " i=", i, ": weight ", step.weights[i], " != g");
      }
    }
  }
  return std::nullopt;
}

std::optional<std::string> linear_sampler_trials(const SelftestOptions& options) {
  RngStream rng = stream(700);
  ModelSpec model = small_compact(10, rng);
  if (options.understate_sigma_plus) model.sigma_plus = 0.25 * *model.sigma_plus;
  const ForwardHistory history = run_filter(model, bootstrap_proposal(model), 500, 41);
  const BackwardSample sample =
      sample_backward_linear(history, model, 500, default_max_trials(model), RngStream(43));
  if (sample.counters.fallback_count != 0) {
    return cat(sample.counters.fallback_count, " fallback draws");
  }
  const double limit = 1.1 * std::exp(2.0);
  for (std::size_t s = 0; s < sample.counters.ar_trials.size(); ++s) {
    const double per_draw = static_cast<double>(sample.counters.ar_trials[s]) / 500.0;
    if (per_draw > limit) return cat("s=", s, ": ", per_draw, " trials per draw > ", limit);
  }
  return std::nullopt;
}

}  // namespace

bool SelftestSummary::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::vector<std::string> SelftestSummary::failed_names() const {
  std::vector<std::string> names;
  for (const CheckResult& c : checks) {
    if (!c.passed) names.push_back(c.name);
  }
  return names;
}

SelftestSummary selftest(const SelftestOptions& options) {
  const std::vector<std::pair<std::string, Check>> suite = {
      {"galloping-correctness", galloping_correctness},
      {"categorical-boundary", categorical_boundary},
      {"multinomial-cost-bound", multinomial_cost_bound},
      {"multinomial-chi-square", multinomial_chi_square},
      {"order-statistics", order_statistics},
      {"forward-backward-brute-force", forward_backward_brute_force},
      {"ffbsm-enumeration", ffbsm_enumeration},
      {"enumeration-normalization", enumeration_normalization},
      {"backward-law-direct", [&] { return backward_law_chi_square(options, false); }},
      {"backward-law-linear", [&] { return backward_law_chi_square(options, true); }},
      {"rao-blackwell", [&] { return rao_blackwell(options); }},
      {"determinism", [&] { return determinism(options); }},
      {"rts-joint-gaussian", rts_joint_gaussian},
      {"apf-bootstrap-weights", bootstrap_weights},
      {"linear-sampler-trials", [&] { return linear_sampler_trials(options); }},
  };

  set_search_boundary_fault(options.inject_search_fault);
  SelftestSummary summary;
  const auto suite_start = std::chrono::steady_clock::now();
  for (const auto& [name, check] : suite) {
    CheckResult result;
    result.name = name;
    const auto start = std::chrono::steady_clock::now();
    try {
      const std::optional<std::string> failure = check();
      result.passed = !failure;
      result.detail = failure.value_or("");
    } catch (const SmcError& e) {
      const std::string kind(to_string(e.kind()));
      const std::string what = e.what();
      result.detail = what.starts_with(kind) ? what : kind + ": " + what;
    } catch (const std::exception& e) {
      result.detail = std::string("exception: ") + e.what();
    }
    result.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    summary.checks.push_back(std::move(result));
  }
  set_search_boundary_fault(false);
  summary.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - suite_start).count();
  return summary;
}

void print_summary(const SelftestSummary& summary, std::ostream& out) {
  for (const CheckResult& c : summary.checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.passed) out << ": " << c.detail;
    out << '\n';
  }
  const std::size_t failed = summary.failed_names().size();
  out << (summary.checks.size() - failed) << "/" << summary.checks.size() << " checks passed in "
      << summary.seconds << " s\n";
}

}  // namespace smc::harness
