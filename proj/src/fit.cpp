#include "cifar/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "cifar/errors.hpp"

namespace cifar {

namespace {

constexpr std::array<std::string_view, kFitParamCount> kNames = {
    "omega_S", "gamma_S", "Gamma_S", "zeta_S", "Gamma_BB", "gamma_BB", "scale", "phase_offset",
};

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

OpticalConfig optics_from(const TraceMeta& meta) {
  OpticalConfig optics;
  optics.theta = meta.theta;
  optics.phi = meta.phi;
  optics.alpha = meta.alpha;
  optics.drive_amplitude = meta.drive_amplitude;
  return optics;
}

Complex model_value_unchecked(const FitVector& p, std::span<const SpinModeParams> modes, const OpticalConfig& optics,
                              double freq_hz) {
  const Complex gain = std::polar(p[index_of(FitParam::kScale)], p[index_of(FitParam::kPhaseOffset)]);
  return gain * multimode_response(hz_to_angular(freq_hz), modes, optics).value;
}

// Residuals for one parameter vector; sigma checks are done by the caller.
void fill_residuals(const SweepTrace& trace, const FitVector& p, const FitModelSpec& spec, std::span<double> out) {
  const std::vector<SpinModeParams> modes = modes_from(p, spec.n_modes);
  const OpticalConfig optics = optics_from(trace.meta);
  const std::size_t n = trace.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Complex m = model_value_unchecked(p, modes, optics, trace.freqs_hz[i]);
    if (spec.domain == ResidualDomain::kAmplitudePhase) {
      out[i] = (trace.amplitude[i] - std::abs(m)) / trace.sigma_amp[i];
      out[n + i] = wrap_phase(trace.phase[i] - std::arg(m)) / trace.sigma_phase[i];
    } else {
      const Complex d = trace.complex_at(i) - m;
      out[i] = d.real() / trace.sigma_amp[i];
      out[n + i] = d.imag() / trace.sigma_amp[i];
    }
  }
}

void check_sigmas(const SweepTrace& trace, const FitModelSpec& spec) {
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const bool bad = !(trace.sigma_amp[i] > 0.0) ||
                     (spec.domain == ResidualDomain::kAmplitudePhase && !(trace.sigma_phase[i] > 0.0));
    if (bad) {
      throw ZeroSigmaError("zero uncertainty at " + std::to_string(trace.freqs_hz[i]) + " Hz (row " +
                           std::to_string(i) + ")");
    }
  }
}

void check_trace(const SweepTrace& trace, const FitModelSpec& spec) {
  trace.validate();
  spec.validate();
  if (trace.size() < 3) throw InsufficientDataError("a fit needs at least three grid points");
  check_sigmas(trace, spec);
}

FitVector to_fit_vector(std::span<const double> x) {
  FitVector p{};
  std::copy(x.begin(), x.end(), p.begin());
  return p;
}

// Parameter magnitudes used to scale the solver's coordinates. Rates scale
// with the linewidth so that a unit step is comparable across parameters.
std::vector<double> parameter_scales(const FitVector& p) {
  const double gamma = std::max(std::abs(p[index_of(FitParam::kGammaS)]), 1e-6);
  const double gamma_bb = std::max(std::abs(p[index_of(FitParam::kGammaBB)]), gamma);
  std::vector<double> s(kFitParamCount);
  s[index_of(FitParam::kOmegaS)] = gamma;
  s[index_of(FitParam::kGammaS)] = gamma;
  s[index_of(FitParam::kRateS)] = std::max(std::abs(p[index_of(FitParam::kRateS)]), gamma);
  s[index_of(FitParam::kZetaS)] = 0.1;
  s[index_of(FitParam::kRateBB)] = std::max(std::abs(p[index_of(FitParam::kRateBB)]), 1e-3 * gamma_bb);
  s[index_of(FitParam::kGammaBB)] = gamma_bb;
  s[index_of(FitParam::kScale)] = std::max(std::abs(p[index_of(FitParam::kScale)]), 1e-12);
  s[index_of(FitParam::kPhaseOffset)] = 1.0;
  return s;
}

LeastSquaresProblem build_problem(const SweepTrace& trace, const FitModelSpec& spec, const FitVector& start) {
  LeastSquaresProblem problem;
  problem.n_residuals = 2 * trace.size();
  problem.scale = parameter_scales(start);
  problem.free.assign(spec.free.begin(), spec.free.end());
  problem.bounds.assign(spec.bounds.begin(), spec.bounds.end());
  const int n_modes = spec.n_modes;
  problem.residuals = [&trace, &spec, n_modes](std::span<const double> x, std::span<double> out) {
    const FitVector p = to_fit_vector(x);
    if (!is_admissible(p, n_modes)) return false;
    fill_residuals(trace, p, spec, out);
    return true;
  };
  return problem;
}

double chi2_of(const SweepTrace& trace, const FitVector& p, const FitModelSpec& spec) {
  std::vector<double> r(2 * trace.size());
  fill_residuals(trace, p, spec, r);
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

// Peak of a three-point parabola through (x0,y0), (x1,y1), (x2,y2).
std::pair<double, double> parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double d0 = (y1 - y0) / (x1 - x0);
  const double d1 = (y2 - y1) / (x2 - x1);
  const double curvature = (d1 - d0) / (x2 - x0);
  if (curvature == 0.0) return {x1, y1};
  const double x = 0.5 * (x0 + x1) - d0 / (2.0 * curvature);
  if (x < x0 || x > x2) return {x1, y1};
  const double y = y1 + d0 * (x - x1) + curvature * (x - x0) * (x - x1);
  return {x, y};
}

// Complex gain c minimizing sum w |z - c m|^2.
Complex project_gain(std::span<const Complex> data, std::span<const Complex> model, std::span<const double> weight) {
  Complex num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    num += weight[i] * std::conj(model[i]) * data[i];
    den += weight[i] * std::norm(model[i]);
  }
  return den > 0.0 ? num / den : Complex(1.0, 0.0);
}

std::vector<Complex> evaluate(const FitVector& p, int n_modes, const SweepTrace& trace) {
  const std::vector<SpinModeParams> modes = modes_from(p, n_modes);
  const OpticalConfig optics = optics_from(trace.meta);
  std::vector<Complex> out(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out[i] = model_value_unchecked(p, modes, optics, trace.freqs_hz[i]);
  }
  return out;
}

void set_gain(FitVector& p, Complex gain) {
  p[index_of(FitParam::kScale)] = std::abs(gain);
  p[index_of(FitParam::kPhaseOffset)] = std::arg(gain);
}

FitResult finish(const SolverResult& res, const FitModelSpec& spec) {
  FitResult out;
  out.params = to_fit_vector(res.params);
  out.params[index_of(FitParam::kPhaseOffset)] = wrap_phase(out.params[index_of(FitParam::kPhaseOffset)]);
  out.free = spec.free;
  out.n_modes = spec.n_modes;
  out.covariance = res.covariance;
  for (std::size_t k = 0; k < kFitParamCount; ++k) {
    const double var = res.covariance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    out.std_errors[k] = spec.free[k] ? std::sqrt(std::max(var, 0.0)) : 0.0;
  }
  out.chi2 = res.chi2;
  const auto n_free = static_cast<int>(std::count(spec.free.begin(), spec.free.end(), true));
  out.dof = static_cast<int>(res.residuals.size()) - n_free;
  out.reduced_chi2 = out.dof > 0 ? res.chi2 / out.dof : 0.0;
  out.converged = res.converged;
  out.iterations = res.iterations;
  out.status = res.status;
  out.residuals = res.residuals;
  return out;
}

}  // namespace

std::string_view param_name(FitParam p) { return kNames[index_of(p)]; }

FitParam param_from_name(std::string_view name) {
  for (std::size_t k = 0; k < kFitParamCount; ++k) {
    const auto p = static_cast<FitParam>(k);
    if (name == kNames[k]) return p;
    const std::string_view suffix = is_rate(p) ? "_hz" : (p == FitParam::kPhaseOffset ? "_deg" : "");
    if (!suffix.empty() && ends_with(name, suffix) && name.substr(0, name.size() - suffix.size()) == kNames[k]) {
      return p;
    }
  }
  throw std::invalid_argument("unknown fit parameter '" + std::string(name) + "'");
}

bool is_rate(FitParam p) {
  switch (p) {
    case FitParam::kOmegaS:
    case FitParam::kGammaS:
    case FitParam::kRateS:
    case FitParam::kRateBB:
    case FitParam::kGammaBB:
      return true;
    default:
      return false;
  }
}

FitModelSpec FitModelSpec::single_mode() {
  FitModelSpec spec;
  spec.n_modes = 1;
  spec.free.fill(true);
  spec.free[index_of(FitParam::kRateBB)] = false;
  spec.free[index_of(FitParam::kGammaBB)] = false;
  spec.bounds[index_of(FitParam::kGammaS)].lo = 0.0;
  spec.bounds[index_of(FitParam::kRateS)].lo = 0.0;
  spec.bounds[index_of(FitParam::kZetaS)] = {-0.999, 0.999};
  spec.bounds[index_of(FitParam::kRateBB)].lo = 0.0;
  spec.bounds[index_of(FitParam::kGammaBB)].lo = 0.0;
  spec.bounds[index_of(FitParam::kScale)].lo = 0.0;
  return spec;
}

FitModelSpec FitModelSpec::two_mode() {
  FitModelSpec spec = single_mode();
  spec.n_modes = 2;
  spec.free[index_of(FitParam::kRateBB)] = true;
  spec.free[index_of(FitParam::kGammaBB)] = true;
  return spec;
}

void FitModelSpec::validate() const {
  if (n_modes != 1 && n_modes != 2) throw std::invalid_argument("n_modes must be 1 or 2");
  for (std::size_t k = 0; k < kFitParamCount; ++k) {
    if (std::isnan(bounds[k].lo) || std::isnan(bounds[k].hi) || bounds[k].lo > bounds[k].hi) {
      throw std::invalid_argument("invalid bounds for " + std::string(kNames[k]));
    }
  }
  if (std::none_of(free.begin(), free.end(), [](bool f) { return f; })) {
    throw std::invalid_argument("at least one fit parameter must be free");
  }
  if (n_modes == 1 && (free[index_of(FitParam::kRateBB)] || free[index_of(FitParam::kGammaBB)])) {
    throw std::invalid_argument("broadband parameters cannot be free in a single-mode fit");
  }
}

std::vector<SpinModeParams> modes_from(const FitVector& p, int n_modes) {
  const double omega = p[index_of(FitParam::kOmegaS)];
  const double zeta = p[index_of(FitParam::kZetaS)];
  std::vector<SpinModeParams> modes;
  modes.push_back(SpinModeParams::from_effective_damping(omega, p[index_of(FitParam::kGammaS)],
                                                         p[index_of(FitParam::kRateS)], zeta));
  if (n_modes == 2) {
    modes.push_back(SpinModeParams::from_effective_damping(omega, p[index_of(FitParam::kGammaBB)],
                                                           p[index_of(FitParam::kRateBB)], zeta));
  }
  return modes;
}

bool is_admissible(const FitVector& p, int n_modes) {
  for (double v : p) {
    if (!std::isfinite(v)) return false;
  }
  if (!(p[index_of(FitParam::kGammaS)] > 0.0) || std::abs(p[index_of(FitParam::kZetaS)]) >= 1.0) return false;
  if (n_modes == 2 && !(p[index_of(FitParam::kGammaBB)] > 0.0)) return false;
  return true;
}

Complex model_value(const FitVector& p, int n_modes, const TraceMeta& meta, double freq_hz) {
  if (!is_admissible(p, n_modes)) throw InstabilityError("fit parameters describe an unstable mode");
  return model_value_unchecked(p, modes_from(p, n_modes), optics_from(meta), freq_hz);
}

std::vector<Complex> model_values(const FitVector& p, int n_modes, const SweepTrace& trace) {
  if (!is_admissible(p, n_modes)) throw InstabilityError("fit parameters describe an unstable mode");
  return evaluate(p, n_modes, trace);
}

std::vector<double> weighted_residuals(const SweepTrace& trace, const FitVector& p, const FitModelSpec& spec) {
  check_sigmas(trace, spec);
  if (!is_admissible(p, spec.n_modes)) throw InstabilityError("fit parameters describe an unstable mode");
  std::vector<double> r(2 * trace.size());
  fill_residuals(trace, p, spec, r);
  return r;
}

FitVector initial_guess(const SweepTrace& trace, const FitModelSpec& spec) {
  trace.validate();
  spec.validate();
  const std::size_t n = trace.size();
  if (n < 5) throw InsufficientDataError("initial guess needs at least five grid points");

  std::vector<Complex> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = trace.complex_at(i);
  std::vector<double> weight(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (trace.sigma_amp[i] > 0.0) weight[i] = 1.0 / (trace.sigma_amp[i] * trace.sigma_amp[i]);
  }

  // Background: straight line between the averaged ends of the trace.
  const std::size_t k = std::max<std::size_t>(1, n / 40);
  Complex left = 0.0, right = 0.0;
  double f_left = 0.0, f_right = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    left += z[i];
    right += z[n - 1 - i];
    f_left += trace.freqs_hz[i];
    f_right += trace.freqs_hz[n - 1 - i];
  }
  left /= static_cast<double>(k);
  right /= static_cast<double>(k);
  f_left /= static_cast<double>(k);
  f_right /= static_cast<double>(k);
  std::vector<double> dev2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Complex base = left + (right - left) * ((trace.freqs_hz[i] - f_left) / (f_right - f_left));
    dev2[i] = std::norm(z[i] - base);
  }

  const auto peak_it = std::max_element(dev2.begin() + 1, dev2.end() - 1);
  const auto ip = static_cast<std::size_t>(peak_it - dev2.begin());
  const auto [f_peak, dev2_peak] = parabola_vertex(trace.freqs_hz[ip - 1], dev2[ip - 1], trace.freqs_hz[ip],
                                                   dev2[ip], trace.freqs_hz[ip + 1], dev2[ip + 1]);

  // Full width at half maximum of |deviation|^2.
  const double half = 0.5 * dev2_peak;
  auto crossing = [&](int dir) -> std::optional<double> {
    for (std::size_t i = ip;;) {
      const std::size_t j = dir > 0 ? i + 1 : i - 1;
      if (dev2[j] < half) {
        const double t = (dev2[i] - half) / (dev2[i] - dev2[j]);
        return trace.freqs_hz[i] + t * (trace.freqs_hz[j] - trace.freqs_hz[i]);
      }
      i = j;
      if (i == 0 || i == n - 1) return std::nullopt;
    }
  };
  const std::optional<double> lo = crossing(-1);
  const std::optional<double> hi = crossing(+1);
  const double spacing = (trace.freqs_hz.back() - trace.freqs_hz.front()) / static_cast<double>(n - 1);
  double fwhm;
  if (lo && hi) {
    fwhm = *hi - *lo;
  } else if (lo) {
    fwhm = 2.0 * (f_peak - *lo);
  } else if (hi) {
    fwhm = 2.0 * (*hi - f_peak);
  } else {
    fwhm = 0.25 * (trace.freqs_hz.back() - trace.freqs_hz.front());
  }
  fwhm = std::max(fwhm, spacing);
  const double gamma = hz_to_angular(fwhm);
  const double span = hz_to_angular(trace.freqs_hz.back() - trace.freqs_hz.front());

  // Quadrature chi^2 with unit weight wherever sigma is missing.
  SweepTrace unit = trace;
  for (auto& s : unit.sigma_amp) s = s > 0.0 ? s : 1.0;
  auto iq_chi2 = [&](const FitVector& p) {
    FitModelSpec iq = spec;
    iq.domain = ResidualDomain::kQuadrature;
    return chi2_of(unit, p, iq);
  };

  double best_chi2 = std::numeric_limits<double>::infinity();
  FitVector best{};
  for (double sign : {1.0, -1.0}) {
    FitVector p{};
    p[index_of(FitParam::kOmegaS)] = sign * hz_to_angular(std::abs(f_peak));
    p[index_of(FitParam::kGammaS)] = gamma;
    p[index_of(FitParam::kZetaS)] = 0.0;
    p[index_of(FitParam::kScale)] = 1.0;

    // The deviation from the uncoupled response is linear in Gamma_S at
    // zeta = 0, so a unit-rate evaluation at the peak fixes its size.
    p[index_of(FitParam::kRateS)] = gamma;
    const double unit_dev = std::abs(model_value_unchecked(p, modes_from(p, 1), optics_from(trace.meta), f_peak) -
                                     trace.meta.drive_amplitude * std::sin(trace.meta.theta + trace.meta.phi)) /
                            gamma;
    const double rate =
        unit_dev > 1e-3 * std::abs(trace.meta.drive_amplitude) / gamma ? std::sqrt(dev2_peak) / unit_dev : gamma;
    p[index_of(FitParam::kRateS)] = std::clamp(rate, 1e-3 * gamma, 1e3 * gamma);

    if (spec.n_modes == 2) {
      // Broadband mode: try a few widths around the scanned span and project
      // its rate onto what the narrow mode leaves unexplained.
      double bb_chi2 = std::numeric_limits<double>::infinity();
      FitVector bb_best = p;
      for (double width : {0.5, 1.0, 2.0, 4.0}) {
        FitVector q = p;
        q[index_of(FitParam::kGammaBB)] = width * span;
        q[index_of(FitParam::kRateBB)] = 0.0;
        const std::vector<Complex> narrow = evaluate(q, 2, trace);
        q[index_of(FitParam::kRateBB)] = 1.0;
        const std::vector<Complex> with_bb = evaluate(q, 2, trace);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const Complex u = with_bb[i] - narrow[i];
          num += weight[i] * (std::conj(u) * (z[i] - narrow[i])).real();
          den += weight[i] * std::norm(u);
        }
        q[index_of(FitParam::kRateBB)] = den > 0.0 ? std::max(num / den, 0.0) : 0.0;
        if (q[index_of(FitParam::kRateBB)] == 0.0) q[index_of(FitParam::kRateBB)] = 1e-3 * q[index_of(FitParam::kGammaBB)];
        const std::vector<Complex> m = evaluate(q, 2, trace);
        set_gain(q, project_gain(z, m, weight));
        const double c2 = iq_chi2(q);
        if (c2 < bb_chi2) {
          bb_chi2 = c2;
          bb_best = q;
        }
      }
      p = bb_best;
    } else {
      const std::vector<Complex> m = evaluate(p, 1, trace);
      set_gain(p, project_gain(z, m, weight));
    }

    const double c2 = iq_chi2(p);
    if (c2 < best_chi2) {
      best_chi2 = c2;
      best = p;
    }
  }
  for (std::size_t j = 0; j < kFitParamCount; ++j) best[j] = spec.bounds[j].clamp(best[j]);
  return best;
}

FitResult fit(const SweepTrace& trace, const FitModelSpec& spec, const std::optional<FitVector>& initial) {
  check_trace(trace, spec);
  FitVector start = initial ? *initial : initial_guess(trace, spec);
  for (std::size_t j = 0; j < kFitParamCount; ++j) start[j] = spec.bounds[j].clamp(start[j]);
  if (!is_admissible(start, spec.n_modes)) throw InstabilityError("initial guess describes an unstable mode");
  const LeastSquaresProblem problem = build_problem(trace, spec, start);
  const SolverResult res = levenberg_marquardt(problem, start);
  return finish(res, spec);
}

Interval profile_interval(const SweepTrace& trace, const FitModelSpec& spec, FitResult& fit, FitParam param) {
  check_trace(trace, spec);
  const std::size_t k = index_of(param);
  if (!spec.free[k]) throw std::invalid_argument("cannot profile frozen parameter " + std::string(param_name(param)));
  const LeastSquaresProblem problem = build_problem(trace, spec, fit.params);
  SolverResult best;
  best.params.assign(fit.params.begin(), fit.params.end());
  best.chi2 = fit.chi2;
  best.covariance = fit.covariance;
  best.converged = fit.converged;
  const Interval interval = cifar::profile_interval(problem, best, k);
  fit.intervals[param] = interval;
  return interval;
}

namespace {

FitResult fit_one(const SweepTrace& trace, const FitModelSpec& spec, std::span<const FitParam> profile) {
  FitResult result;
  try {
    result = fit(trace, spec);
  } catch (const std::exception& e) {
    result.free = spec.free;
    result.n_modes = spec.n_modes;
    result.status = e.what();
    return result;
  }
  for (FitParam p : profile) {
    try {
      profile_interval(trace, spec, result, p);
    } catch (const NotBracketedError&) {
    }
  }
  return result;
}

}  // namespace

std::vector<FitResult> fit_batch(std::span<const SweepTrace> traces, const FitModelSpec& spec,
                                 std::span<const FitParam> profile) {
  std::vector<FitResult> out(traces.size());
  const auto n = static_cast<std::ptrdiff_t>(traces.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = fit_one(traces[static_cast<std::size_t>(i)], spec, profile);
  }
  return out;
}

std::vector<FitResult> fit_batch_reference(std::span<const SweepTrace> traces, const FitModelSpec& spec,
                                           std::span<const FitParam> profile) {
  std::vector<FitResult> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(fit_one(t, spec, profile));
  return out;
}

QuickRate quick_readout_rate(const SweepTrace& trace) {
  trace.validate();
  const std::size_t n = trace.size();
  if (n < 3) throw NoExtremumError("trace too short to locate extrema");
  const auto& a = trace.amplitude;
  const auto imax = static_cast<std::size_t>(std::max_element(a.begin(), a.end()) - a.begin());
  const auto imin = static_cast<std::size_t>(std::min_element(a.begin(), a.end()) - a.begin());
  if (a[imax] - a[imin] <= 1e-9 * a[imax]) throw NoExtremumError("amplitude trace is flat");
  if (imax == 0 || imax == n - 1 || imin == 0 || imin == n - 1) {
    throw NoExtremumError("amplitude extremum lies on the edge of the scan (monotonic trace)");
  }
  const auto& f = trace.freqs_hz;
  const auto [f_max, a_max] = parabola_vertex(f[imax - 1], a[imax - 1], f[imax], a[imax], f[imax + 1], a[imax + 1]);
  const auto [f_min, a_min] = parabola_vertex(f[imin - 1], a[imin - 1], f[imin], a[imin], f[imin + 1], a[imin + 1]);
  QuickRate out;
  out.f_max_hz = f_max;
  out.f_min_hz = f_min;
  out.separation_hz = std::abs(f_min - f_max);
  out.contrast = (a_max - a_min) / (a_max + a_min);
  out.low_coupling = out.contrast < 1.0 / std::numbers::sqrt2;
  return out;
}

}  // namespace cifar
