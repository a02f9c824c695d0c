#include "cifar/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include <yaml-cpp/yaml.h>

#include "cifar/errors.hpp"
#include "cifar/trace_io.hpp"

namespace cifar {

namespace {

int line_of(const YAML::Node& node) { return node.Mark().line >= 0 ? node.Mark().line + 1 : 0; }

bool has_suffix(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Rejects keys outside `allowed`, with a hint when only the unit suffix is
// missing or wrong.
void check_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& where) {
  if (!map.IsMap()) throw ParseError(where + " must be a mapping", line_of(map));
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    if (allowed.count(key)) continue;
    for (const char* suffix : {"_hz", "_deg"}) {
      if (allowed.count(key + suffix)) {
        throw ParseError(where + "." + key + ": missing unit suffix, expected '" + key + suffix + "'",
                         line_of(kv.first));
      }
    }
    throw ParseError("unknown key '" + key + "' in " + where, line_of(kv.first));
  }
}

double get_double(const YAML::Node& node, const std::string& key, const std::string& where) {
  try {
    const double v = node.as<double>();
    if (!std::isfinite(v)) throw ParseError(where + "." + key + " must be finite", line_of(node));
    return v;
  } catch (const YAML::Exception&) {
    throw ParseError(where + "." + key + ": expected a number", line_of(node));
  }
}

template <typename T>
T get_as(const YAML::Node& node, const std::string& key, const std::string& where, const char* what) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ParseError(where + "." + key + ": expected " + what, line_of(node));
  }
}

std::optional<double> opt_double(const YAML::Node& map, const std::string& key, const std::string& where) {
  const YAML::Node n = map[key];
  if (!n) return std::nullopt;
  return get_double(n, key, where);
}

void require(bool ok, const YAML::Node& map, const std::string& key, const std::string& where,
             const std::string& message) {
  if (!ok) throw ParseError(where + "." + key + " " + message, line_of(map[key]));
}

struct ModeEntry {
  std::optional<double> omega_hz, gamma0_hz, gamma_hz, rate_hz, zeta;
  int line = 0;
  YAML::Node node;
};

ModeEntry read_mode(const YAML::Node& node, const std::string& where) {
  check_keys(node, {"omega_s_hz", "gamma_s0_hz", "gamma_s_hz", "readout_rate_hz", "zeta_s"}, where);
  ModeEntry m;
  m.node = node;
  m.line = line_of(node);
  m.omega_hz = opt_double(node, "omega_s_hz", where);
  m.gamma0_hz = opt_double(node, "gamma_s0_hz", where);
  m.gamma_hz = opt_double(node, "gamma_s_hz", where);
  m.rate_hz = opt_double(node, "readout_rate_hz", where);
  m.zeta = opt_double(node, "zeta_s", where);
  if (m.gamma0_hz && m.gamma_hz) {
    throw ParseError(where + ": give either gamma_s0_hz or gamma_s_hz, not both", line_of(node["gamma_s_hz"]));
  }
  if (!m.gamma0_hz && !m.gamma_hz) throw ParseError(where + ": missing gamma_s0_hz", m.line);
  if (!m.rate_hz) throw ParseError(where + ": missing readout_rate_hz", m.line);
  if (m.omega_hz) require(*m.omega_hz != 0.0, node, "omega_s_hz", where, "must be nonzero");
  if (m.gamma0_hz) require(*m.gamma0_hz >= 0.0, node, "gamma_s0_hz", where, "must be >= 0");
  if (m.gamma_hz) require(*m.gamma_hz > 0.0, node, "gamma_s_hz", where, "must be > 0");
  require(*m.rate_hz >= 0.0, node, "readout_rate_hz", where, "must be >= 0");
  if (m.zeta) require(std::abs(*m.zeta) < 1.0, node, "zeta_s", where, "must satisfy |zeta_s| < 1");
  return m;
}

void read_optics(const YAML::Node& node, RunConfig& cfg, bool& detuning_given) {
  const std::string where = "optics";
  check_keys(node, {"theta_deg", "phi_deg", "alpha_deg", "detuning_hz", "drive_amplitude"}, where);
  if (auto v = opt_double(node, "theta_deg", where)) cfg.optics.theta = deg_to_rad(*v);
  if (auto v = opt_double(node, "phi_deg", where)) cfg.optics.phi = deg_to_rad(*v);
  if (auto v = opt_double(node, "alpha_deg", where)) cfg.optics.alpha = deg_to_rad(*v);
  if (auto v = opt_double(node, "detuning_hz", where)) {
    cfg.optics.detuning = hz_to_angular(*v);
    detuning_given = true;
  }
  if (auto v = opt_double(node, "drive_amplitude", where)) {
    require(*v >= 0.0, node, "drive_amplitude", where, "must be >= 0");
    cfg.optics.drive_amplitude = *v;
  }
}

void read_noise(const YAML::Node& node, RunConfig& cfg, std::optional<double>& center, std::optional<double>& width) {
  const std::string where = "noise";
  check_keys(node, {"sigma_floor", "sigma_peak", "center_hz", "width_hz", "seed"}, where);
  if (auto v = opt_double(node, "sigma_floor", where)) {
    require(*v >= 0.0, node, "sigma_floor", where, "must be >= 0");
    cfg.noise.sigma_floor = *v;
  }
  if (auto v = opt_double(node, "sigma_peak", where)) {
    require(*v >= 0.0, node, "sigma_peak", where, "must be >= 0");
    cfg.noise.sigma_peak = *v;
  }
  center = opt_double(node, "center_hz", where);
  width = opt_double(node, "width_hz", where);
  if (width) require(*width > 0.0, node, "width_hz", where, "must be > 0");
  if (node["seed"]) {
    cfg.noise.seed = get_as<std::uint64_t>(node["seed"], "seed", where, "a non-negative integer");
    cfg.noise_seed_set = true;
  }
}

void read_grid(const YAML::Node& node, RunConfig& cfg) {
  const std::string where = "grid";
  check_keys(node, {"preset", "points", "center_hz", "half_span_hz"}, where);
  if (node["preset"]) {
    const auto preset = get_as<std::string>(node["preset"], "preset", where, "a string");
    if (preset == "default") {
      cfg.grid.preset = GridConfig::Preset::kDefault;
    } else if (preset == "wide") {
      cfg.grid.preset = GridConfig::Preset::kWide;
    } else {
      throw ParseError("grid.preset must be 'default' or 'wide'", line_of(node["preset"]));
    }
  }
  if (node["points"]) {
    cfg.grid.points = get_as<int>(node["points"], "points", where, "an integer");
    require(cfg.grid.points >= 5, node, "points", where, "must be >= 5");
  }
  cfg.grid.center_hz = opt_double(node, "center_hz", where);
  cfg.grid.half_span_hz = opt_double(node, "half_span_hz", where);
  if (cfg.grid.half_span_hz) require(*cfg.grid.half_span_hz > 0.0, node, "half_span_hz", where, "must be > 0");
}

// Fit parameter keyed by name; rates need "_hz", the phase offset "_deg".
std::pair<FitParam, double> unit_factor(const YAML::Node& key_node, const std::string& where) {
  const auto key = key_node.as<std::string>();
  FitParam p;
  try {
    p = param_from_name(key);
  } catch (const std::invalid_argument&) {
    throw ParseError("unknown fit parameter '" + key + "' in " + where, line_of(key_node));
  }
  if (is_rate(p)) {
    if (!has_suffix(key, "_hz")) {
      throw ParseError(where + "." + key + ": missing unit suffix, expected '" + key + "_hz'", line_of(key_node));
    }
    return {p, kTwoPi};
  }
  if (p == FitParam::kPhaseOffset) {
    if (!has_suffix(key, "_deg")) {
      throw ParseError(where + "." + key + ": missing unit suffix, expected '" + key + "_deg'", line_of(key_node));
    }
    return {p, std::numbers::pi / 180.0};
  }
  return {p, 1.0};
}

FitParam param_from_node(const YAML::Node& node, const std::string& where) {
  const auto name = get_as<std::string>(node, "", where, "a parameter name");
  try {
    return param_from_name(name);
  } catch (const std::invalid_argument&) {
    throw ParseError("unknown fit parameter '" + name + "' in " + where, line_of(node));
  }
}

void read_fit(const YAML::Node& node, RunConfig& cfg, bool& n_modes_given) {
  const std::string where = "fit";
  check_keys(node, {"n_modes", "domain", "free", "frozen", "bounds"}, where);
  FitModelSpec& spec = cfg.fit;
  if (node["n_modes"]) {
    const int n = get_as<int>(node["n_modes"], "n_modes", where, "an integer");
    require(n == 1 || n == 2, node, "n_modes", where, "must be 1 or 2");
    spec = n == 2 ? FitModelSpec::two_mode() : FitModelSpec::single_mode();
    n_modes_given = true;
  }
  if (node["domain"]) {
    const auto d = get_as<std::string>(node["domain"], "domain", where, "a string");
    if (d == "amplitude_phase") {
      spec.domain = ResidualDomain::kAmplitudePhase;
    } else if (d == "quadrature") {
      spec.domain = ResidualDomain::kQuadrature;
    } else {
      throw ParseError("fit.domain must be 'amplitude_phase' or 'quadrature'", line_of(node["domain"]));
    }
  }
  if (node["free"] && node["frozen"]) {
    throw ParseError("fit: give either 'free' or 'frozen', not both", line_of(node["frozen"]));
  }
  if (const YAML::Node free = node["free"]) {
    if (!free.IsSequence()) throw ParseError("fit.free must be a list", line_of(free));
    spec.free.fill(false);
    for (const auto& item : free) spec.free[index_of(param_from_node(item, "fit.free"))] = true;
  }
  if (const YAML::Node frozen = node["frozen"]) {
    if (!frozen.IsSequence()) throw ParseError("fit.frozen must be a list", line_of(frozen));
    for (const auto& item : frozen) spec.free[index_of(param_from_node(item, "fit.frozen"))] = false;
  }
  if (const YAML::Node bounds = node["bounds"]) {
    if (!bounds.IsMap()) throw ParseError("fit.bounds must be a mapping", line_of(bounds));
    for (const auto& kv : bounds) {
      const auto [p, factor] = unit_factor(kv.first, "fit.bounds");
      const auto key = kv.first.as<std::string>();
      if (!kv.second.IsSequence() || kv.second.size() != 2) {
        throw ParseError("fit.bounds." + key + " must be [lo, hi]", line_of(kv.second));
      }
      const double lo = get_as<double>(kv.second[0], key, "fit.bounds", "a number");
      const double hi = get_as<double>(kv.second[1], key, "fit.bounds", "a number");
      if (std::isnan(lo) || std::isnan(hi) || lo > hi) {
        throw ParseError("fit.bounds." + key + " needs lo <= hi", line_of(kv.second));
      }
      spec.bounds[index_of(p)] = {lo * factor, hi * factor};
    }
  }
}

void read_initial(const YAML::Node& node, RunConfig& cfg) {
  if (!node.IsMap()) throw ParseError("initial must be a mapping", line_of(node));
  for (const auto& kv : node) {
    const auto [p, factor] = unit_factor(kv.first, "initial");
    cfg.initial[index_of(p)] = get_double(kv.second, kv.first.as<std::string>(), "initial") * factor;
  }
}

}  // namespace

std::vector<double> RunConfig::make_grid(bool wide) const {
  if (modes.empty()) throw ParseError("missing 'modes' section");
  const bool use_wide = wide || grid.preset == GridConfig::Preset::kWide;
  const int points = grid.points > 0 ? grid.points : (use_wide ? kWideGridPoints : kDefaultGridPoints);
  const double center = grid.center_hz ? *grid.center_hz : angular_to_hz(std::abs(modes.front().omega_s));
  double half_span;
  if (grid.half_span_hz) {
    half_span = *grid.half_span_hz;
  } else if (use_wide) {
    half_span = kWideHalfSpanHz;
  } else {
    const SpinModeParams& m = modes.front();
    half_span = 10.0 * angular_to_hz(std::max(effective_damping(m), m.readout_rate));
  }
  return linear_grid(center, half_span, points);
}

RunConfig parse_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ParseError(e.msg, e.mark.line + 1);
  }
  if (!root.IsMap()) throw ParseError("configuration must be a mapping at top level", 1);
  check_keys(root, {"modes", "optics", "noise", "grid", "fit", "initial"}, "config");

  RunConfig cfg;
  bool detuning_given = false;
  if (root["optics"]) read_optics(root["optics"], cfg, detuning_given);

  const YAML::Node modes = root["modes"] ? root["modes"] : YAML::Node(YAML::NodeType::Sequence);
  if (!modes.IsSequence() || modes.size() > 2) {
    throw ParseError("modes must be a list of one or two modes", line_of(modes));
  }
  double default_zeta = 0.0;
  if (detuning_given) {
    default_zeta = tensor_coupling(cfg.optics.alpha, polarizability_weights(cfg.optics.detuning));
  }
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const std::string where = "modes[" + std::to_string(i) + "]";
    const ModeEntry e = read_mode(modes[i], where);
    if (!e.omega_hz && i == 0) throw ParseError(where + ": missing omega_s_hz", e.line);
    const double omega = e.omega_hz ? hz_to_angular(*e.omega_hz) : cfg.modes.front().omega_s;
    // The broadband mode shares the narrow mode's tensor coupling by default.
    const double zeta = e.zeta ? *e.zeta : (i == 0 ? default_zeta : cfg.modes.front().zeta_s);
    const double rate = hz_to_angular(*e.rate_hz);
    SpinModeParams mode;
    if (e.gamma0_hz) {
      mode = {omega, hz_to_angular(*e.gamma0_hz), rate, zeta};
    } else {
      mode = SpinModeParams::from_effective_damping(omega, hz_to_angular(*e.gamma_hz), rate, zeta);
      if (mode.gamma_s0 < 0.0) {
        throw ParseError(where + ".gamma_s_hz implies a negative intrinsic damping gamma_s0", line_of(modes[i]["gamma_s_hz"]));
      }
    }
    cfg.modes.push_back(mode);
  }

  std::optional<double> noise_center, noise_width;
  if (root["noise"]) {
    read_noise(root["noise"], cfg, noise_center, noise_width);
  } else {
    cfg.noise.sigma_floor = 2e-3;
  }
  if (noise_center) {
    cfg.noise.center_hz = *noise_center;
  } else if (!cfg.modes.empty()) {
    cfg.noise.center_hz = angular_to_hz(std::abs(cfg.modes.front().omega_s));
  }
  if (noise_width) {
    cfg.noise.width_hz = *noise_width;
  } else if (!cfg.modes.empty()) {
    const SpinModeParams& m = cfg.modes.front();
    const double gamma = m.gamma_s0 + 2.0 * m.zeta_s * m.readout_rate;
    cfg.noise.width_hz = angular_to_hz(gamma > 0.0 ? gamma : std::max(m.gamma_s0, 1.0));
  }

  if (root["grid"]) read_grid(root["grid"], cfg);
  bool n_modes_given = false;
  if (root["fit"]) read_fit(root["fit"], cfg, n_modes_given);
  if (!n_modes_given && cfg.modes.size() == 2) {
    FitModelSpec two = FitModelSpec::two_mode();
    two.domain = cfg.fit.domain;
    two.bounds = cfg.fit.bounds;
    for (std::size_t k = 0; k < kFitParamCount; ++k) {
      if (k != index_of(FitParam::kRateBB) && k != index_of(FitParam::kGammaBB)) two.free[k] = cfg.fit.free[k];
    }
    cfg.fit = two;
  }
  try {
    cfg.fit.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("fit: ") + e.what(), root["fit"] ? line_of(root["fit"]) : 0);
  }
  if (root["initial"]) read_initial(root["initial"], cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

FitVector merge_initial(const RunConfig& cfg, const FitVector& guess) {
  FitVector p = guess;
  for (std::size_t k = 0; k < kFitParamCount; ++k) {
    if (cfg.initial[k]) p[k] = *cfg.initial[k];
  }
  return p;
}

}  // namespace cifar
