#include "smc/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <string_view>

#include "smc/error.hpp"

namespace smc::harness {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  raise(ErrorKind::kValidation, path + ": " + message);
}

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string at_index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (std::string_view key : allowed) known = known || item.key() == key;
    if (!known) fail(join(path, item.key()), "unknown key");
  }
}

const json& require(const json& obj, const std::string& path, std::string_view key) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) fail(join(path, key), "missing required key");
  return *it;
}

const json* optional_field(const json& obj, std::string_view key) {
  const auto it = obj.find(std::string(key));
  return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(path, "must be finite");
  return x;
}

double as_positive(const json& v, const std::string& path) {
  const double x = as_number(v, path);
  if (!(x > 0.0)) fail(path, "must be positive");
  return x;
}

std::uint64_t as_u64(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    if (v.get<std::int64_t>() < 0) fail(path, "must be nonnegative");
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  fail(path, "expected a nonnegative integer");
}

std::size_t as_count(const json& v, const std::string& path, std::size_t minimum) {
  const std::uint64_t x = as_u64(v, path);
  if (x < minimum) fail(path, "must be at least " + std::to_string(minimum));
  return static_cast<std::size_t>(x);
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

std::vector<double> as_numbers(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], at_index(path, i)));
  return out;
}

std::vector<std::size_t> as_counts(const json& v, const std::string& path, std::size_t minimum) {
  if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array of integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_count(v[i], at_index(path, i), minimum));
  }
  return out;
}

ModelConfig parse_model(const json& obj, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  ModelConfig m;
  const std::string kind = as_string(require(obj, path, "kind"), join(path, "kind"));
  if (kind == "lgssm") {
    m.kind = ModelKind::kLgssm;
    check_keys(obj, path, {"kind", "observations", "simulate", "phi", "sigma_v", "sigma_w",
                           "initial_law"});
    m.phi = as_number(require(obj, path, "phi"), join(path, "phi"));
    m.sigma_v = as_positive(require(obj, path, "sigma_v"), join(path, "sigma_v"));
    m.sigma_w = as_positive(require(obj, path, "sigma_w"), join(path, "sigma_w"));
    if (const json* law = optional_field(obj, "initial_law")) {
      const std::string p = join(path, "initial_law");
      const std::string name = as_string(*law, p);
      if (name == "automatic") {
        m.initial_law = LgssmInit::kAutomatic;
      } else if (name == "stationary") {
        m.initial_law = LgssmInit::kStationary;
        if (std::abs(m.phi) >= 1.0) fail(p, "stationary law requires |phi| < 1");
      } else {
        fail(p, "expected \"automatic\" or \"stationary\"");
      }
    }
  } else if (kind == "discrete") {
    m.kind = ModelKind::kDiscrete;
    check_keys(obj, path, {"kind", "observations", "simulate", "trans", "init", "emission"});
    const std::string tp = join(path, "trans");
    const json& trans = require(obj, path, "trans");
    if (!trans.is_array() || trans.empty()) fail(tp, "expected a nonempty array of rows");
    for (std::size_t i = 0; i < trans.size(); ++i) {
      m.trans.push_back(as_numbers(trans[i], at_index(tp, i)));
    }
    m.init = as_numbers(require(obj, path, "init"), join(path, "init"));
    try {
      validate_discrete_params(m.trans, m.init);
    } catch (const SmcError& e) {
      fail(tp, e.what());
    }
    const std::string ep = join(path, "emission");
    const json& emission = require(obj, path, "emission");
    check_keys(emission, ep, {"means", "sd"});
    m.emission_means = as_numbers(require(emission, ep, "means"), join(ep, "means"));
    if (m.emission_means.size() != m.init.size()) {
      fail(join(ep, "means"), "needs one mean per state (" + std::to_string(m.init.size()) + ")");
    }
    m.emission_sd = as_positive(require(emission, ep, "sd"), join(ep, "sd"));
  } else if (kind == "compact_rw") {
    m.kind = ModelKind::kCompactRw;
    check_keys(obj, path, {"kind", "observations", "simulate", "kappa", "sigma_obs"});
    m.kappa = as_positive(require(obj, path, "kappa"), join(path, "kappa"));
    m.sigma_obs = as_positive(require(obj, path, "sigma_obs"), join(path, "sigma_obs"));
  } else {
    fail(join(path, "kind"), "unknown model kind \"" + kind +
                                 "\" (expected lgssm, discrete or compact_rw)");
  }

  const json* inline_obs = optional_field(obj, "observations");
  const json* simulate = optional_field(obj, "simulate");
  if ((inline_obs != nullptr) == (simulate != nullptr)) {
    fail(path, "exactly one of \"observations\" and \"simulate\" is required");
  }
  if (inline_obs != nullptr) {
    m.observations = as_numbers(*inline_obs, join(path, "observations"));
  } else {
    const std::string sp = join(path, "simulate");
    check_keys(*simulate, sp, {"seed", "T"});
    SimulateSpec spec;
    spec.seed = as_u64(require(*simulate, sp, "seed"), join(sp, "seed"));
    spec.horizon = as_count(require(*simulate, sp, "T"), join(sp, "T"), 1);
    m.simulate = spec;
  }
  return m;
}

AlgorithmConfig parse_algorithm(const json& obj, const std::string& path) {
  check_keys(obj, path, {"filter", "smoother", "N", "n_paths", "max_trials_per_draw"});
  AlgorithmConfig a;
  if (const json* f = optional_field(obj, "filter")) {
    const std::string name = as_string(*f, join(path, "filter"));
    if (name == "bootstrap") {
      a.filter = FilterKind::kBootstrap;
    } else if (name == "fully_adapted") {
      a.filter = FilterKind::kFullyAdapted;
    } else {
      fail(join(path, "filter"), "expected \"bootstrap\" or \"fully_adapted\"");
    }
  }
  const std::string sp = join(path, "smoother");
  const std::string name = as_string(require(obj, path, "smoother"), sp);
  if (name == "ffbsm") {
    a.smoother = SmootherKind::kFfbsm;
  } else if (name == "ffbsi_direct") {
    a.smoother = SmootherKind::kFfbsiDirect;
  } else if (name == "ffbsi_linear") {
    a.smoother = SmootherKind::kFfbsiLinear;
  } else if (name == "genealogy") {
    a.smoother = SmootherKind::kGenealogy;
  } else {
    fail(sp, "expected ffbsm, ffbsi_direct, ffbsi_linear or genealogy");
  }
  a.n_particles = as_count(require(obj, path, "N"), join(path, "N"), 1);
  if (const json* v = optional_field(obj, "n_paths")) {
    a.n_paths = as_count(*v, join(path, "n_paths"), 1);
  }
  if (const json* v = optional_field(obj, "max_trials_per_draw")) {
    a.max_trials_per_draw = as_count(*v, join(path, "max_trials_per_draw"), 1);
  }
  return a;
}

TargetFunction parse_h(const json& v, const std::string& path) {
  TargetFunction h;
  if (v.is_string()) {
    if (v.get<std::string>() != "identity") {
      fail(path, "expected \"identity\", {\"indicator_threshold\": {\"c\": ...}} or "
                 "{\"power\": {\"p\": ...}}");
    }
    return h;
  }
  if (!v.is_object() || v.size() != 1) {
    fail(path, "expected \"identity\" or an object with one key");
  }
  if (const json* ind = optional_field(v, "indicator_threshold")) {
    const std::string p = join(path, "indicator_threshold");
    check_keys(*ind, p, {"c"});
    h.kind = TargetFunction::Kind::kIndicatorThreshold;
    h.threshold = as_number(require(*ind, p, "c"), join(p, "c"));
  } else if (const json* pw = optional_field(v, "power")) {
    const std::string p = join(path, "power");
    check_keys(*pw, p, {"p"});
    h.kind = TargetFunction::Kind::kPower;
    const std::size_t power = as_count(require(*pw, p, "p"), join(p, "p"), 1);
    if (power > 16) fail(join(p, "p"), "must be at most 16");
    h.power = static_cast<unsigned>(power);
  } else {
    fail(join(path, v.begin().key()), "unknown target function");
  }
  return h;
}

std::vector<std::uint64_t> parse_seeds(const json& v, const std::string& path) {
  std::vector<std::uint64_t> seeds;
  if (v.is_array()) {
    if (v.empty()) fail(path, "seed list must be nonempty");
    for (std::size_t i = 0; i < v.size(); ++i) seeds.push_back(as_u64(v[i], at_index(path, i)));
    return seeds;
  }
  if (!v.is_object()) fail(path, "expected a list of seeds or {\"start\", \"count\"}");
  check_keys(v, path, {"start", "count"});
  const std::uint64_t start = as_u64(require(v, path, "start"), join(path, "start"));
  const std::size_t count = as_count(require(v, path, "count"), join(path, "count"), 1);
  if (start > std::numeric_limits<std::uint64_t>::max() - count) {
    fail(join(path, "count"), "seed range overflows");
  }
  for (std::size_t i = 0; i < count; ++i) seeds.push_back(start + i);
  return seeds;
}

ExperimentSpec parse_experiment(const json& obj, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  ExperimentSpec e;
  const std::string kp = join(path, "kind");
  const std::string kind = as_string(require(obj, path, "kind"), kp);
  if (kind == "oracle_compare") {
    e.kind = ExperimentKind::kOracleCompare;
    check_keys(obj, path, {"kind", "seeds", "s", "h", "N_grid", "grid_size"});
  } else if (kind == "scaling") {
    e.kind = ExperimentKind::kScaling;
    check_keys(obj, path, {"kind", "seeds", "s", "h", "N_grid", "grid_size"});
  } else if (kind == "time_uniform") {
    e.kind = ExperimentKind::kTimeUniform;
    check_keys(obj, path, {"kind", "seeds", "s", "h", "T_grid", "grid_size"});
  } else if (kind == "bench") {
    e.kind = ExperimentKind::kBench;
    check_keys(obj, path, {"kind", "seeds", "s", "h", "N_grid"});
  } else if (kind == "rb_check") {
    e.kind = ExperimentKind::kRbCheck;
    check_keys(obj, path, {"kind", "seeds", "s", "h"});
  } else {
    fail(kp, "unknown experiment kind \"" + kind +
                 "\" (expected oracle_compare, scaling, time_uniform, bench or rb_check)");
  }
  e.seeds = parse_seeds(require(obj, path, "seeds"), join(path, "seeds"));

  if (const json* g = optional_field(obj, "N_grid")) {
    e.n_grid = as_counts(*g, join(path, "N_grid"), 1);
  }
  if ((e.kind == ExperimentKind::kScaling || e.kind == ExperimentKind::kBench) &&
      e.n_grid.empty()) {
    fail(join(path, "N_grid"), "missing required key");
  }
  if (e.kind == ExperimentKind::kScaling && e.n_grid.size() < 2) {
    fail(join(path, "N_grid"), "scaling needs at least two values");
  }
  if (e.kind == ExperimentKind::kTimeUniform) {
    e.t_grid = as_counts(require(obj, path, "T_grid"), join(path, "T_grid"), 1);
  }

  if (const json* s = optional_field(obj, "s")) {
    const std::string sp = join(path, "s");
    if (s->is_string()) {
      if (s->get<std::string>() != "all") fail(sp, "expected a time index or \"all\"");
      if (e.kind == ExperimentKind::kTimeUniform || e.kind == ExperimentKind::kRbCheck) {
        fail(sp, "\"all\" is not supported by this experiment kind");
      }
      e.all_times = true;
    } else {
      e.s = as_count(*s, sp, 0);
    }
  } else {
    e.s = 0;
  }
  if (const json* h = optional_field(obj, "h")) e.h = parse_h(*h, join(path, "h"));
  if (const json* g = optional_field(obj, "grid_size")) {
    e.grid_size = as_count(*g, join(path, "grid_size"), 16);
  }
  return e;
}

OutputConfig parse_output(const json& obj, const std::string& path) {
  check_keys(obj, path, {"dir", "csv", "json", "wall_time"});
  OutputConfig o;
  if (const json* v = optional_field(obj, "dir")) o.dir = as_string(*v, join(path, "dir"));
  if (const json* v = optional_field(obj, "csv")) o.csv = as_string(*v, join(path, "csv"));
  if (const json* v = optional_field(obj, "json")) o.json = as_string(*v, join(path, "json"));
  if (const json* v = optional_field(obj, "wall_time")) {
    o.wall_time = as_bool(*v, join(path, "wall_time"));
  }
  if (o.csv.empty()) fail(join(path, "csv"), "must be nonempty");
  if (o.json.empty()) fail(join(path, "json"), "must be nonempty");
  return o;
}

// Checks that need more than one block.
void cross_validate(const ExperimentConfig& c) {
  const std::size_t horizon = configured_horizon(c.model);
  const ExperimentSpec& e = c.experiment;
  if (c.algorithm.filter == FilterKind::kFullyAdapted &&
      c.model.kind == ModelKind::kCompactRw) {
    fail("algorithm.filter", "fully_adapted is not available for compact_rw");
  }
  std::size_t s_limit = horizon;
  if (e.kind == ExperimentKind::kTimeUniform) {
    for (std::size_t i = 0; i < e.t_grid.size(); ++i) {
      if (e.t_grid[i] > horizon) {
        fail(at_index("experiment.T_grid", i),
             "exceeds the observation horizon " + std::to_string(horizon));
      }
      s_limit = std::min(s_limit, e.t_grid[i]);
    }
  }
  if (e.s && *e.s > s_limit) {
    fail("experiment.s", "must not exceed " + std::to_string(s_limit));
  }
  if (e.kind == ExperimentKind::kRbCheck) {
    if (c.algorithm.smoother != SmootherKind::kFfbsiLinear) {
      fail("algorithm.smoother", "rb_check runs the accept-reject sampler; use ffbsi_linear");
    }
    if (c.algorithm.max_trials_per_draw) {
      fail("algorithm.max_trials_per_draw", "rb_check uses the default trial cap");
    }
    const double outcomes = std::pow(static_cast<double>(c.algorithm.n_particles),
                                     static_cast<double>(horizon + 1));
    if (outcomes > 1e6) fail("algorithm.N", "rb_check needs N^(T+1) <= 1e6");
  }
  const bool ffbsi = c.algorithm.smoother == SmootherKind::kFfbsiDirect ||
                     c.algorithm.smoother == SmootherKind::kFfbsiLinear;
  if (!ffbsi && c.algorithm.n_paths) {
    fail("algorithm.n_paths", "only used by ffbsi smoothers");
  }
  if (c.algorithm.smoother != SmootherKind::kFfbsiLinear && c.algorithm.max_trials_per_draw) {
    fail("algorithm.max_trials_per_draw", "only used by ffbsi_linear");
  }
  if (c.model.kind != ModelKind::kCompactRw && c.source["experiment"].contains("grid_size")) {
    fail("experiment.grid_size", "only used with compact_rw");
  }
}

}  // namespace

double TargetFunction::operator()(double x) const {
  switch (kind) {
    case Kind::kIdentity:
      return x;
    case Kind::kIndicatorThreshold:
      return x > threshold ? 1.0 : 0.0;
    case Kind::kPower:
      return std::pow(x, static_cast<int>(power));
  }
  return x;
}

std::string TargetFunction::describe() const {
  switch (kind) {
    case Kind::kIdentity:
      return "identity";
    case Kind::kIndicatorThreshold: {
      std::ostringstream out;
      out.precision(17);
      out << "indicator_threshold(c=" << threshold << ")";
      return out.str();
    }
    case Kind::kPower:
      return "power(p=" + std::to_string(power) + ")";
  }
  return "identity";
}

ExperimentConfig parse_config(const json& document) {
  check_keys(document, "", {"description", "model", "algorithm", "experiment", "output"});
  if (const json* d = optional_field(document, "description")) as_string(*d, "description");
  ExperimentConfig c;
  c.source = document;
  c.model = parse_model(require(document, "", "model"), "model");
  c.algorithm = parse_algorithm(require(document, "", "algorithm"), "algorithm");
  c.experiment = parse_experiment(require(document, "", "experiment"), "experiment");
  if (const json* o = optional_field(document, "output")) c.output = parse_output(*o, "output");
  cross_validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kIo, "cannot open config " + path.string());
  json document;
  try {
    document = json::parse(in);
  } catch (const json::parse_error& e) {
    raise(ErrorKind::kValidation, path.string() + ": " + e.what());
  }
  return parse_config(document);
}

std::size_t configured_horizon(const ModelConfig& config) {
  return config.observations ? config.observations->size() - 1 : config.simulate->horizon;
}

ModelSpec build_model(const ModelConfig& config, const ObservationRecord& obs) {
  switch (config.kind) {
    case ModelKind::kLgssm:
      return make_lgssm(config.phi, config.sigma_v, config.sigma_w, obs, config.initial_law);
    case ModelKind::kDiscrete: {
      const std::vector<double> means = config.emission_means;
      const double sd = config.emission_sd;
      return make_discrete_hmm(
          config.trans, [means, sd](std::size_t k, double y) { return normal_pdf(y, means[k], sd); },
          config.init, obs);
    }
    case ModelKind::kCompactRw:
      return make_compact_rw(config.kappa, config.sigma_obs, obs);
  }
  raise(ErrorKind::kConfiguration, "unknown model kind");
}

ObservationRecord observations(const ModelConfig& config) {
  if (config.observations) return ObservationRecord{*config.observations};
  const std::size_t horizon = config.simulate->horizon;
  // Only the dynamics are used here; the placeholder record is never read.
  const ModelSpec model = build_model(config, ObservationRecord{std::vector<double>(horizon + 1)});
  RngStream rng = RngStream(config.simulate->seed).derive(StreamPurpose::kObservations);
  const std::vector<double> states = simulate_states(model, horizon, rng);
  ObservationRecord obs;
  obs.values.resize(horizon + 1);
  for (std::size_t t = 0; t <= horizon; ++t) {
    const double noise = rng.normal();
    switch (config.kind) {
      case ModelKind::kLgssm:
        obs.values[t] = states[t] + config.sigma_w * noise;
        break;
      case ModelKind::kDiscrete:
        obs.values[t] = config.emission_means[static_cast<std::size_t>(states[t])] +
                        config.emission_sd * noise;
        break;
      case ModelKind::kCompactRw:
        obs.values[t] = states[t] + config.sigma_obs * noise;
        break;
    }
  }
  return obs;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLgssm: return "lgssm";
    case ModelKind::kDiscrete: return "discrete";
    case ModelKind::kCompactRw: return "compact_rw";
  }
  return "?";
}

std::string to_string(SmootherKind kind) {
  switch (kind) {
    case SmootherKind::kFfbsm: return "ffbsm";
    case SmootherKind::kFfbsiDirect: return "ffbsi_direct";
    case SmootherKind::kFfbsiLinear: return "ffbsi_linear";
    case SmootherKind::kGenealogy: return "genealogy";
  }
  return "?";
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kOracleCompare: return "oracle_compare";
    case ExperimentKind::kScaling: return "scaling";
    case ExperimentKind::kTimeUniform: return "time_uniform";
    case ExperimentKind::kBench: return "bench";
    case ExperimentKind::kRbCheck: return "rb_check";
  }
  return "?";
}

}  // namespace smc::harness
