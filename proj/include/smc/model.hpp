#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smc/rng.hpp"
#include "smc/types.hpp"

namespace smc {

// Observations y_0..y_T, scalar-valued.
struct ObservationRecord {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  // T, the final time index.
  std::size_t horizon() const { return values.size() - 1; }
};

// A hidden Markov model with the observation record bound in.
//
// Densities are with respect to Lebesgue measure for continuous models and
// counting measure for discrete ones. Samplers take an explicit stream; the
// model holds no randomness and is safe to share across threads once built.
struct ModelSpec {
  using Sampler = std::function<void(RngStream&, StateOut)>;
  using TransitionSampler = std::function<void(StateView, RngStream&, StateOut)>;
  using Density = std::function<double(StateView)>;
  using KernelDensity = std::function<double(StateView, StateView)>;
  using Likelihood = std::function<double(std::size_t, StateView)>;
  // out[j * n_from + l] = m(from_l, to_j) for flat arrays of states.
  using KernelBlock = std::function<void(std::span<const double>,
                                         std::span<const double>,
                                         std::span<double>)>;

  std::string kind;
  std::size_t state_dim = 1;
  std::size_t n_obs = 0;

  Sampler initial_sampler;
  Density initial_density;
  KernelDensity transition_density;
  TransitionSampler transition_sampler;
  // Optional; vectorized evaluation of many kernel values at once.
  KernelBlock transition_block;
  Likelihood likelihood;

  std::optional<double> sigma_minus;
  std::optional<double> sigma_plus;

  // Optional ingredients of the fully adapted proposal:
  // predictive(t, x) = integral of m(x, x') g_t(x') over x', and the
  // normalized proposal m(x, .) g_t(.) / predictive(t, x).
  Likelihood predictive_likelihood;
  std::function<void(std::size_t, StateView, RngStream&, StateOut)> optimal_sampler;
  std::function<double(std::size_t, StateView, StateView)> optimal_density;

  std::size_t horizon() const { return n_obs - 1; }

  // Fills out[j * n_from + l] = m(from_l, to_j), using transition_block when
  // present and pointwise evaluation otherwise.
  void transition_matrix(std::span<const double> from, std::span<const double> to,
                         std::span<double> out) const;
};

enum class ProposalKind { kBootstrap, kFullyAdapted, kCustom };

// Instrumental ingredients of the auxiliary particle filter: the initial
// proposal, adjustment multipliers and the proposal kernel.
struct ProposalSpec {
  ProposalKind kind = ProposalKind::kCustom;
  ModelSpec::Sampler initial_sampler;
  ModelSpec::Density initial_density;
  std::function<double(std::size_t, StateView)> adjustment;
  std::function<double(std::size_t, StateView, StateView)> density;
  std::function<void(std::size_t, StateView, RngStream&, StateOut)> sampler;
};

// Adjustment 1 and proposal m; initial proposal equal to the prior.
ProposalSpec bootstrap_proposal(const ModelSpec& model);

// Adjustment predictive_likelihood and proposal proportional to m g_t.
// Throws a configuration error when the model does not provide them.
ProposalSpec fully_adapted_proposal(const ModelSpec& model);

enum class LgssmInit {
  // Stationary variance when |phi| < 1, otherwise sigma_v^2.
  kAutomatic,
  // Stationary variance; |phi| >= 1 is an error.
  kStationary,
};

// X_{t+1} = phi X_t + N(0, sigma_v^2), Y_t = X_t + N(0, sigma_w^2).
ModelSpec make_lgssm(double phi, double sigma_v, double sigma_w,
                     const ObservationRecord& obs,
                     LgssmInit init = LgssmInit::kAutomatic);

// Initial variance used by make_lgssm for the given parameters.
double lgssm_initial_variance(double phi, double sigma_v,
                              LgssmInit init = LgssmInit::kAutomatic);

using Matrix = std::vector<std::vector<double>>;
using EmissionDensity = std::function<double(std::size_t state, double y)>;

struct DiscreteHmmParams {
  Matrix trans;
  EmissionDensity emit;
  std::vector<double> init;
};

// Finite-state chain on {0..K-1}; states are stored as the real codes 0..K-1.
ModelSpec make_discrete_hmm(const Matrix& trans, const EmissionDensity& emit,
                            const std::vector<double>& init,
                            const ObservationRecord& obs);

// Checks stochasticity of trans and init within 1e-12.
void validate_discrete_params(const Matrix& trans, const std::vector<double>& init);

// Normalizing integral Z(x) of exp(-kappa (u - x)^2) over u in [0, 1],
// tabulated at x = i / 1024 by composite Simpson and linearly interpolated.
class CompactKernelNormalizer {
 public:
  static constexpr std::size_t kIntervals = 1024;

  explicit CompactKernelNormalizer(double kappa);

  double operator()(double x) const;
  double node(std::size_t i) const { return z_[i]; }
  double kappa() const { return kappa_; }

 private:
  double kappa_;
  std::vector<double> z_;
};

// Random walk on [0, 1]: m(x, x') = exp(-kappa (x' - x)^2) / Z(x), uniform
// initial law, Gaussian observation noise with sd sigma_obs. Bounds are
// sigma_minus = exp(-kappa), sigma_plus = exp(kappa).
ModelSpec make_compact_rw(double kappa, double sigma_obs, const ObservationRecord& obs);

// Draws X_0..X_T from the model's prior dynamics (observations unused).
std::vector<double> simulate_states(const ModelSpec& model, std::size_t horizon,
                                    RngStream& rng);

double normal_pdf(double x, double mean, double sd);

}  // namespace smc
