#include "smc/model.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "smc/error.hpp"

namespace smc {
namespace {

using ConstArrayMap = Eigen::Map<const Eigen::ArrayXd>;
using ArrayMap = Eigen::Map<Eigen::ArrayXd>;

void require_observations(const ObservationRecord& obs) {
  if (obs.values.empty()) {
    raise(ErrorKind::kInvalidParameter, "observation record is empty");
  }
}

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    raise(ErrorKind::kInvalidParameter, std::string(name) + " must be positive");
  }
}

std::size_t discrete_state(double code) {
  return static_cast<std::size_t>(std::lround(code));
}

std::size_t draw_categorical(std::span<const double> probs, double total,
                             RngStream& rng) {
  double u = rng.uniform() * total;
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    if (u < probs[k]) return k;
    u -= probs[k];
  }
  // Last index with positive mass absorbs rounding.
  for (std::size_t k = probs.size(); k-- > 0;) {
    if (probs[k] > 0.0) return k;
  }
  return probs.size() - 1;
}

}  // namespace

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

void ModelSpec::transition_matrix(std::span<const double> from,
                                  std::span<const double> to,
                                  std::span<double> out) const {
  if (transition_block) {
    transition_block(from, to, out);
    return;
  }
  const std::size_t d = state_dim;
  const std::size_t n_from = from.size() / d;
  const std::size_t n_to = to.size() / d;
  for (std::size_t j = 0; j < n_to; ++j) {
    const StateView target = to.subspan(j * d, d);
    for (std::size_t l = 0; l < n_from; ++l) {
      out[j * n_from + l] = transition_density(from.subspan(l * d, d), target);
    }
  }
}

ProposalSpec bootstrap_proposal(const ModelSpec& model) {
  ProposalSpec proposal;
  proposal.kind = ProposalKind::kBootstrap;
  proposal.initial_sampler = model.initial_sampler;
  proposal.initial_density = model.initial_density;
  proposal.adjustment = [](std::size_t, StateView) { return 1.0; };
  proposal.density = [m = model.transition_density](std::size_t, StateView x,
                                                    StateView next) {
    return m(x, next);
  };
  proposal.sampler = [sample = model.transition_sampler](
                         std::size_t, StateView x, RngStream& rng, StateOut out) {
    sample(x, rng, out);
  };
  return proposal;
}

ProposalSpec fully_adapted_proposal(const ModelSpec& model) {
  if (!model.predictive_likelihood || !model.optimal_sampler ||
      !model.optimal_density) {
    raise(ErrorKind::kConfiguration,
          "model '" + model.kind + "' has no fully adapted proposal");
  }
  ProposalSpec proposal;
  proposal.kind = ProposalKind::kFullyAdapted;
  proposal.initial_sampler = model.initial_sampler;
  proposal.initial_density = model.initial_density;
  proposal.adjustment = model.predictive_likelihood;
  proposal.density = model.optimal_density;
  proposal.sampler = model.optimal_sampler;
  return proposal;
}

double lgssm_initial_variance(double phi, double sigma_v, LgssmInit init) {
  const bool stationary_possible = std::abs(phi) < 1.0;
  if (init == LgssmInit::kStationary && !stationary_possible) {
    raise(ErrorKind::kInvalidParameter,
          "stationary initial law requires |phi| < 1");
  }
  const double v = sigma_v * sigma_v;
  return stationary_possible ? v / (1.0 - phi * phi) : v;
}

ModelSpec make_lgssm(double phi, double sigma_v, double sigma_w,
                     const ObservationRecord& obs, LgssmInit init) {
  require_positive(sigma_v, "sigma_v");
  require_positive(sigma_w, "sigma_w");
  if (!std::isfinite(phi)) raise(ErrorKind::kInvalidParameter, "phi must be finite");
  require_observations(obs);
  const double init_sd = std::sqrt(lgssm_initial_variance(phi, sigma_v, init));
  auto y = std::make_shared<const std::vector<double>>(obs.values);

  ModelSpec model;
  model.kind = "lgssm";
  model.state_dim = 1;
  model.n_obs = obs.size();
  model.initial_sampler = [init_sd](RngStream& rng, StateOut out) {
    out[0] = init_sd * rng.normal();
  };
  model.initial_density = [init_sd](StateView x) {
    return normal_pdf(x[0], 0.0, init_sd);
  };
  model.transition_density = [phi, sigma_v](StateView x, StateView next) {
    return normal_pdf(next[0], phi * x[0], sigma_v);
  };
  model.transition_sampler = [phi, sigma_v](StateView x, RngStream& rng,
                                            StateOut out) {
    out[0] = phi * x[0] + sigma_v * rng.normal();
  };
  const double peak = 1.0 / (sigma_v * std::sqrt(2.0 * std::numbers::pi));
  const double half_precision = 0.5 / (sigma_v * sigma_v);
  model.transition_block = [phi, peak, half_precision](
                               std::span<const double> from,
                               std::span<const double> to, std::span<double> out) {
    const auto n_from = static_cast<Eigen::Index>(from.size());
    const ConstArrayMap source(from.data(), n_from);
    for (std::size_t j = 0; j < to.size(); ++j) {
      ArrayMap column(out.data() + j * from.size(), n_from);
      column = peak * (-(to[j] - phi * source).square() * half_precision).exp();
    }
  };
  model.likelihood = [y, sigma_w](std::size_t t, StateView x) {
    return normal_pdf((*y)[t], x[0], sigma_w);
  };
  model.sigma_plus = peak;

  // Gaussian conjugacy gives the fully adapted ingredients in closed form.
  const double predictive_sd = std::sqrt(sigma_v * sigma_v + sigma_w * sigma_w);
  const double post_var =
      1.0 / (1.0 / (sigma_v * sigma_v) + 1.0 / (sigma_w * sigma_w));
  const double post_sd = std::sqrt(post_var);
  auto post_mean = [=](std::size_t t, double x) {
    return post_var * (phi * x / (sigma_v * sigma_v) + (*y)[t] / (sigma_w * sigma_w));
  };
  model.predictive_likelihood = [y, phi, predictive_sd](std::size_t t, StateView x) {
    return normal_pdf((*y)[t], phi * x[0], predictive_sd);
  };
  model.optimal_sampler = [post_mean, post_sd](std::size_t t, StateView x,
                                               RngStream& rng, StateOut out) {
    out[0] = post_mean(t, x[0]) + post_sd * rng.normal();
  };
  model.optimal_density = [post_mean, post_sd](std::size_t t, StateView x,
                                               StateView next) {
    return normal_pdf(next[0], post_mean(t, x[0]), post_sd);
  };
  return model;
}

void validate_discrete_params(const Matrix& trans, const std::vector<double>& init) {
  constexpr double kTolerance = 1e-12;
  const std::size_t k = trans.size();
  if (k == 0) raise(ErrorKind::kInvalidParameter, "transition matrix is empty");
  if (init.size() != k) {
    raise(ErrorKind::kInvalidParameter, "initial law length differs from K");
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (trans[i].size() != k) {
      raise(ErrorKind::kInvalidParameter,
            "transition row " + std::to_string(i) + " has wrong length");
    }
    double sum = 0.0;
    for (double p : trans[i]) {
      if (!(p >= 0.0)) {
        raise(ErrorKind::kInvalidParameter,
              "negative transition probability in row " + std::to_string(i));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kTolerance) {
      raise(ErrorKind::kInvalidParameter,
            "transition row " + std::to_string(i) + " does not sum to 1");
    }
  }
  double sum = 0.0;
  for (double p : init) {
    if (!(p >= 0.0)) raise(ErrorKind::kInvalidParameter, "negative initial probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kTolerance) {
    raise(ErrorKind::kInvalidParameter, "initial law does not sum to 1");
  }
}

ModelSpec make_discrete_hmm(const Matrix& trans, const EmissionDensity& emit,
                            const std::vector<double>& init,
                            const ObservationRecord& obs) {
  validate_discrete_params(trans, init);
  require_observations(obs);
  if (!emit) raise(ErrorKind::kInvalidParameter, "emission density missing");
  const std::size_t k = trans.size();
  auto params = std::make_shared<const DiscreteHmmParams>(
      DiscreteHmmParams{trans, emit, init});
  auto y = std::make_shared<const std::vector<double>>(obs.values);
  // Column-major copy so a target state's column is contiguous.
  auto columns = std::make_shared<std::vector<double>>(k * k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) (*columns)[j * k + i] = trans[i][j];
  }

  ModelSpec model;
  model.kind = "discrete";
  model.state_dim = 1;
  model.n_obs = obs.size();
  model.initial_sampler = [params](RngStream& rng, StateOut out) {
    out[0] = static_cast<double>(draw_categorical(params->init, 1.0, rng));
  };
  model.initial_density = [params](StateView x) {
    return params->init[discrete_state(x[0])];
  };
  model.transition_density = [params](StateView x, StateView next) {
    return params->trans[discrete_state(x[0])][discrete_state(next[0])];
  };
  model.transition_sampler = [params](StateView x, RngStream& rng, StateOut out) {
    const auto& row = params->trans[discrete_state(x[0])];
    out[0] = static_cast<double>(draw_categorical(row, 1.0, rng));
  };
  model.transition_block = [columns, k](std::span<const double> from,
                                        std::span<const double> to,
                                        std::span<double> out) {
    // Codes are stored as exact integers, so a plain cast indexes the column.
    const double* src = from.data();
    const std::size_t n = from.size();
    for (std::size_t j = 0; j < to.size(); ++j) {
      const double* column = columns->data() + discrete_state(to[j]) * k;
      double* dst = out.data() + j * n;
      for (std::size_t l = 0; l < n; ++l) dst[l] = column[static_cast<std::size_t>(src[l])];
    }
  };
  model.likelihood = [params, y](std::size_t t, StateView x) {
    return params->emit(discrete_state(x[0]), (*y)[t]);
  };
  double lo = trans[0][0];
  double hi = trans[0][0];
  for (const auto& row : trans) {
    lo = std::min(lo, *std::min_element(row.begin(), row.end()));
    hi = std::max(hi, *std::max_element(row.begin(), row.end()));
  }
  model.sigma_minus = lo;
  model.sigma_plus = hi;

  auto joint_row = [params, y, k](std::size_t t, double x) {
    std::vector<double> joint(k);
    const auto& row = params->trans[discrete_state(x)];
    for (std::size_t j = 0; j < k; ++j) joint[j] = row[j] * params->emit(j, (*y)[t]);
    return joint;
  };
  model.predictive_likelihood = [joint_row](std::size_t t, StateView x) {
    const auto joint = joint_row(t, x[0]);
    double sum = 0.0;
    for (double v : joint) sum += v;
    return sum;
  };
  model.optimal_sampler = [joint_row](std::size_t t, StateView x, RngStream& rng,
                                      StateOut out) {
    const auto joint = joint_row(t, x[0]);
    double sum = 0.0;
    for (double v : joint) sum += v;
    out[0] = static_cast<double>(draw_categorical(joint, sum, rng));
  };
  model.optimal_density = [joint_row](std::size_t t, StateView x, StateView next) {
    const auto joint = joint_row(t, x[0]);
    double sum = 0.0;
    for (double v : joint) sum += v;
    return joint[discrete_state(next[0])] / sum;
  };
  return model;
}

CompactKernelNormalizer::CompactKernelNormalizer(double kappa)
    : kappa_(kappa), z_(kIntervals + 1) {
  require_positive(kappa, "kappa");
  const double h = 1.0 / static_cast<double>(kIntervals);
  for (std::size_t i = 0; i <= kIntervals; ++i) {
    const double x = static_cast<double>(i) * h;
    auto f = [kappa, x](double u) { return std::exp(-kappa * (u - x) * (u - x)); };
    double sum = f(0.0) + f(1.0);
    for (std::size_t k = 1; k < kIntervals; ++k) {
      sum += (k % 2 == 1 ? 4.0 : 2.0) * f(static_cast<double>(k) * h);
    }
    z_[i] = sum * h / 3.0;
  }
}

double CompactKernelNormalizer::operator()(double x) const {
  const double pos = std::clamp(x, 0.0, 1.0) * static_cast<double>(kIntervals);
  const auto i = std::min(static_cast<std::size_t>(pos), kIntervals - 1);
  const double frac = pos - static_cast<double>(i);
  return z_[i] + frac * (z_[i + 1] - z_[i]);
}

ModelSpec make_compact_rw(double kappa, double sigma_obs, const ObservationRecord& obs) {
  require_positive(kappa, "kappa");
  require_positive(sigma_obs, "sigma_obs");
  require_observations(obs);
  auto z = std::make_shared<const CompactKernelNormalizer>(kappa);
  auto y = std::make_shared<const std::vector<double>>(obs.values);

  ModelSpec model;
  model.kind = "compact_rw";
  model.state_dim = 1;
  model.n_obs = obs.size();
  model.initial_sampler = [](RngStream& rng, StateOut out) { out[0] = rng.uniform(); };
  model.initial_density = [](StateView x) {
    return (x[0] >= 0.0 && x[0] <= 1.0) ? 1.0 : 0.0;
  };
  model.transition_density = [z, kappa](StateView x, StateView next) {
    if (!(next[0] >= 0.0 && next[0] <= 1.0)) return 0.0;
    const double d = next[0] - x[0];
    return std::exp(-kappa * d * d) / (*z)(x[0]);
  };
  model.transition_sampler = [kappa](StateView x, RngStream& rng, StateOut out) {
    // Exact draw from the truncated kernel: uniform proposals accept with
    // probability >= exp(-kappa); for sharp kernels a Gaussian proposal
    // restricted to [0, 1] is cheaper.
    if (kappa <= 2.0) {
      for (;;) {
        const double u = rng.uniform();
        const double d = u - x[0];
        if (rng.uniform() < std::exp(-kappa * d * d)) {
          out[0] = u;
          return;
        }
      }
    }
    const double sd = std::sqrt(0.5 / kappa);
    for (;;) {
      const double u = x[0] + sd * rng.normal();
      if (u >= 0.0 && u <= 1.0) {
        out[0] = u;
        return;
      }
    }
  };
  model.transition_block = [z, kappa](std::span<const double> from,
                                      std::span<const double> to,
                                      std::span<double> out) {
    const auto n_from = static_cast<Eigen::Index>(from.size());
    const ConstArrayMap source(from.data(), n_from);
    Eigen::ArrayXd inv_z(n_from);
    for (Eigen::Index l = 0; l < n_from; ++l) inv_z[l] = 1.0 / (*z)(source[l]);
    for (std::size_t j = 0; j < to.size(); ++j) {
      ArrayMap column(out.data() + j * from.size(), n_from);
      if (!(to[j] >= 0.0 && to[j] <= 1.0)) {
        column.setZero();
        continue;
      }
      column = (-kappa * (to[j] - source).square()).exp() * inv_z;
    }
  };
  model.likelihood = [y, sigma_obs](std::size_t t, StateView x) {
    return normal_pdf((*y)[t], x[0], sigma_obs);
  };
  model.sigma_minus = std::exp(-kappa);
  model.sigma_plus = std::exp(kappa);
  return model;
}

std::vector<double> simulate_states(const ModelSpec& model, std::size_t horizon,
                                    RngStream& rng) {
  const std::size_t d = model.state_dim;
  std::vector<double> states((horizon + 1) * d);
  model.initial_sampler(rng, StateOut(states.data(), d));
  for (std::size_t t = 1; t <= horizon; ++t) {
    model.transition_sampler(StateView(states.data() + (t - 1) * d, d), rng,
                             StateOut(states.data() + t * d, d));
  }
  return states;
}

}  // namespace smc
