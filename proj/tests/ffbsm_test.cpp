#include "smc/ffbsm.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fixtures.hpp"
#include "smc/error.hpp"
#include "smc/oracles.hpp"
#include "smc/stats.hpp"

namespace smc {
namespace {

double identity(StateView x) { return x[0]; }
double one(StateView) { return 1.0; }

// Two particles at 0 and 1 with weights 1 and 3; the kernel is 2 from
// state 0 and 1 from anywhere else.
struct TwoParticleFixture {
  ForwardHistory history;
  ModelSpec model;

  TwoParticleFixture() {
    WeightedSample first;
    first.particles = {0.0, 1.0};
    first.weights = {1.0, 3.0};
    first.weight_sum = 4.0;
    WeightedSample second = first;
    history.steps = {first, second};
    history.ancestors = {{}, {0, 1}};
    history.n_particles = 2;
    model.kind = "custom";
    model.n_obs = 2;
    model.transition_density = [](StateView x, StateView) { return x[0] == 0.0 ? 2.0 : 1.0; };
  }
};

// Marginals of the enumerated backward index law, [t][i].
std::vector<std::vector<double>> enumerated_marginals(const ForwardHistory& history,
                                                      const ModelSpec& model) {
  const auto law = enumerate_backward_law(history, model);
  const std::size_t n = history.n_particles;
  std::vector<std::vector<double>> marginals(history.horizon() + 1, std::vector<double>(n, 0.0));
  for (std::size_t code = 0; code < law.size(); ++code) {
    std::size_t rest = code;
    for (auto& slice : marginals) {
      slice[rest % n] += law[code];
      rest /= n;
    }
  }
  return marginals;
}

TEST(BackwardRowTest, HandEvaluatedTwoParticleRow) {
  const TwoParticleFixture f;
  const double next = 0.5;
  const auto row = backward_weight_row(f.history, f.model, 0, StateView(&next, 1));
  ASSERT_EQ(row.size(), 2u);
  EXPECT_NEAR(row[0], 2.0 / 5.0, 1e-15);
  EXPECT_NEAR(row[1], 3.0 / 5.0, 1e-15);
}

TEST(BackwardRowTest, ConstantKernelGivesFilterWeights) {
  const ModelSpec base = testing::two_state_hmm(testing::simulate_two_state(4, 1));
  const ForwardHistory history = run_filter(base, bootstrap_proposal(base), 50, 3);
  const ModelSpec model = testing::with_constant_kernel(base, 0.7);
  for (double next : {0.0, 1.0}) {
    const auto row = backward_weight_row(history, model, 2, StateView(&next, 1));
    for (std::size_t j = 0; j < 50; ++j) {
      EXPECT_NEAR(row[j], history.steps[2].weights[j] / history.steps[2].weight_sum, 1e-15);
    }
  }
}

TEST(BackwardRowTest, UniformWeightsConstantKernelIsUniform) {
  ModelSpec base = make_lgssm(0.5, 1.0, 1.0, {{0.0, 0.0, 0.0}});
  base.likelihood = [](std::size_t, StateView) { return 1.0; };
  const ForwardHistory history = run_filter(base, bootstrap_proposal(base), 16, 4);
  const ModelSpec model = testing::with_constant_kernel(base, 3.0);
  const double next = 0.1;
  for (double v : backward_weight_row(history, model, 1, StateView(&next, 1))) {
    EXPECT_DOUBLE_EQ(v, 1.0 / 16.0);
  }
}

TEST(BackwardRowTest, ZeroMassIsDegenerate) {
  const ModelSpec model = make_compact_rw(1.0, 0.1, {{0.5, 0.5}});
  const ForwardHistory history = run_filter(model, bootstrap_proposal(model), 10, 5);
  const double outside = 2.0;
  try {
    backward_weight_row(history, model, 0, StateView(&outside, 1));
    FAIL();
  } catch (const SmcError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateBackwardKernel);
  }
}

TEST(BackwardRowTest, RejectsTerminalTime) {
  const TwoParticleFixture f;
  const double next = 0.5;
  EXPECT_THROW(backward_weight_row(f.history, f.model, 1, StateView(&next, 1)), SmcError);
}

TEST(SmoothingWeightsTest, SingleParticle) {
  const ModelSpec model = make_lgssm(0.9, 1.0, 1.0, testing::simulate_lgssm(0.9, 6, 2));
  const ForwardHistory history = run_filter(model, bootstrap_proposal(model), 1, 6);
  const SmoothingWeights sw = marginal_smoothing_weights(history, model);
  ASSERT_EQ(sw.per_time.size(), 7u);
  for (const auto& slice : sw.per_time) {
    ASSERT_EQ(slice.size(), 1u);
    EXPECT_EQ(slice[0], 1.0);
  }
}

TEST(SmoothingWeightsTest, ConstantKernelCollapsesToFiltering) {
  const ModelSpec base = make_lgssm(0.9, 1.0, 1.0, testing::simulate_lgssm(0.9, 8, 3));
  const ForwardHistory history = run_filter(base, bootstrap_proposal(base), 200, 7);
  const ModelSpec model = testing::with_constant_kernel(base, 0.3);
  const SmoothingWeights sw = marginal_smoothing_weights(history, model);
  for (std::size_t s = 0; s <= history.horizon(); ++s) {
    const auto& step = history.steps[s];
    for (std::size_t i = 0; i < 200; ++i) {
      EXPECT_NEAR(sw.per_time[s][i], step.weights[i] / step.weight_sum, 1e-12);
    }
  }
}

TEST(SmoothingWeightsTest, SlicesAreProbabilityVectors) {
  const ModelSpec model = make_compact_rw(1.0, 0.1, testing::simulate_compact(1.0, 0.1, 15, 4));
  const ForwardHistory history = run_filter(model, bootstrap_proposal(model), 300, 8);
  const SmoothingWeights sw = marginal_smoothing_weights(history, model);
  for (const auto& slice : sw.per_time) {
    double total = 0.0;
    for (double v : slice) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-10);
  }
  const auto& last = history.steps.back();
  for (std::size_t i = 0; i < 300; ++i) {
    EXPECT_EQ(sw.per_time.back()[i], last.weights[i] / last.weight_sum);
  }
}

TEST(SmoothingWeightsTest, MatchesEnumeratedIndexLawOnDiscreteModel) {
  const ModelSpec model = testing::two_state_hmm(testing::simulate_two_state(5, 5));
  const ForwardHistory history = run_filter(model, bootstrap_proposal(model), 8, 9);
  const SmoothingWeights sw = marginal_smoothing_weights(history, model);
  const auto exact = enumerated_marginals(history, model);
  for (std::size_t s = 0; s <= 5; ++s) {
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_NEAR(sw.per_time[s][i], exact[s][i], 1e-10) << "s=" << s << " i=" << i;
    }
  }
}

TEST(SmoothingWeightsTest, MatchesEnumeratedIndexLawOnSmallInstances) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::size_t n = 2 + seed % 4;
    const std::size_t horizon = 1 + seed % 4;
    const ModelSpec model =
        make_compact_rw(1.0, 0.1, testing::simulate_compact(1.0, 0.1, horizon, 100 + seed));
    const ForwardHistory history = run_filter(model, bootstrap_proposal(model), n, seed);
    const SmoothingWeights sw = marginal_smoothing_weights(history, model);
    const auto exact = enumerated_marginals(history, model);
    for (std::size_t s = 0; s <= horizon; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        ASSERT_NEAR(sw.per_time[s][i], exact[s][i], 1e-10) << "seed " << seed;
      }
    }
  }
}

TEST(SmoothingWeightsTest, DegenerateKernelIsReported) {
  ModelSpec model = make_lgssm(0.9, 1.0, 1.0, {{0.0, 0.0, 0.0}});
  const ForwardHistory history = run_filter(model, bootstrap_proposal(model), 20, 10);
  model.transition_block = nullptr;
  model.transition_density = [](StateView, StateView) { return 0.0; };
  try {
    marginal_smoothing_weights(history, model);
    FAIL();
  } catch (const SmcError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateBackwardKernel);
  }
}

TEST(MarginalEstimateTest, ConstantAndTerminalSlice) {
  const ModelSpec model = make_lgssm(0.9, 1.0, 1.0, testing::simulate_lgssm(0.9, 10, 6));
  const ForwardHistory history = run_filter(model, bootstrap_proposal(model), 400, 11);
  const SmoothingWeights sw = marginal_smoothing_weights(history, model);
  for (std::size_t s = 0; s <= history.horizon(); ++s) {
    EXPECT_NEAR(marginal_estimate(history, sw, s, one), 1.0, 1e-10);
  }
  EXPECT_NEAR(marginal_estimate(history, sw, 10, identity),
              filter_estimate(history.steps[10], identity), 1e-12);
}

TEST(MarginalEstimateTest, MatchesRtsAtTimeZero) {
  const ObservationRecord obs = testing::simulate_lgssm(0.9, 40, 7);
  const ModelSpec model = make_lgssm(0.9, 1.0, 1.0, obs);
  const double exact = rts_smooth(0.9, 1.0, 1.0, obs).smoothed[0].mean;
  std::vector<double> errors;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ForwardHistory history = run_filter(model, bootstrap_proposal(model), 4000, 200 + seed);
    const SmoothingWeights sw = marginal_smoothing_weights(history, model);
    errors.push_back(marginal_estimate(history, sw, 0, identity) - exact);
  }
  EXPECT_LE(std::abs(stats::mean(errors)), 4.0 * stats::std_error(errors));
}

TEST(MarginalEstimateTest, PermutingParticlesLeavesEstimatesUnchanged) {
  const ModelSpec model = make_compact_rw(1.0, 0.1, testing::simulate_compact(1.0, 0.1, 6, 8));
  const ForwardHistory history = run_filter(model, bootstrap_proposal(model), 100, 12);
  ForwardHistory permuted = history;
  RngStream rng(13);
  for (std::size_t t = 0; t <= history.horizon(); ++t) {
    std::vector<Index> perm(100);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    auto& step = permuted.steps[t];
    const auto original = permuted.steps[t];
    const auto ancestors = permuted.ancestors[t];
    for (std::size_t i = 0; i < 100; ++i) {
      step.particles[perm[i]] = original.particles[i];
      step.weights[perm[i]] = original.weights[i];
      if (t > 0) permuted.ancestors[t][perm[i]] = ancestors[i];
    }
    if (t < history.horizon()) {
      for (auto& a : permuted.ancestors[t + 1]) a = perm[a];
    }
  }
  const SmoothingWeights a = marginal_smoothing_weights(history, model);
  const SmoothingWeights b = marginal_smoothing_weights(permuted, model);
  const GenealogyPaths ga = genealogy_trace_smoother(history);
  const GenealogyPaths gb = genealogy_trace_smoother(permuted);
  for (std::size_t s = 0; s <= history.horizon(); ++s) {
    EXPECT_NEAR(marginal_estimate(history, a, s, identity),
                marginal_estimate(permuted, b, s, identity), 1e-12);
    EXPECT_NEAR(filter_estimate(history.steps[s], identity),
                filter_estimate(permuted.steps[s], identity), 1e-12);
    EXPECT_NEAR(genealogy_estimate(history, ga, s, identity),
                genealogy_estimate(permuted, gb, s, identity), 1e-12);
  }
}

TEST(GenealogyTest, SingleStepIsTheFilter) {
  const ModelSpec model = make_lgssm(0.9, 1.0, 1.0, {{0.4}});
  const ForwardHistory history = run_filter(model, bootstrap_proposal(model), 30, 14);
  const GenealogyPaths paths = genealogy_trace_smoother(history);
  ASSERT_EQ(paths.indices.size(), 1u);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(paths.indices[0][i], i);
  EXPECT_EQ(paths.weights, history.steps[0].weights);
  EXPECT_EQ(genealogy_estimate(history, paths, 0, identity),
            filter_estimate(history.steps[0], identity));
}

TEST(GenealogyTest, PathsFollowAncestors) {
  const ModelSpec model = make_lgssm(0.9, 1.0, 1.0, testing::simulate_lgssm(0.9, 12, 9));
  const ForwardHistory history = run_filter(model, bootstrap_proposal(model), 200, 15);
  const GenealogyPaths paths = genealogy_trace_smoother(history);
  ASSERT_EQ(paths.indices.size(), 13u);
  double total = 0.0;
  for (double w : paths.weights) total += w;
  EXPECT_NEAR(total, history.steps.back().weight_sum, 1e-12 * total);
  for (std::size_t t = 1; t <= 12; ++t) {
    for (std::size_t i = 0; i < 200; ++i) {
      ASSERT_EQ(paths.indices[t - 1][i], history.ancestors[t][paths.indices[t][i]]);
    }
  }
}

TEST(GenealogyTest, AncestryCollapsesOverLongHorizons) {
  int collapsed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ModelSpec model =
        make_compact_rw(1.0, 0.1, testing::simulate_compact(1.0, 0.1, 100, 300 + seed));
    const ForwardHistory history = run_filter(model, bootstrap_proposal(model), 1000, seed);
    if (genealogy_trace_smoother(history).distinct_at(0) <= 10) ++collapsed;
  }
  EXPECT_GE(collapsed, 18);
}

}  // namespace
}  // namespace smc
