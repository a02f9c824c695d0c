#include "cifar/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "cifar/errors.hpp"
#include "cifar/kernels.hpp"

namespace cifar {

void SweepTrace::validate() const {
  const std::size_t n = freqs_hz.size();
  if (amplitude.size() != n || phase.size() != n || sigma_amp.size() != n || sigma_phase.size() != n) {
    throw std::invalid_argument("trace columns have unequal lengths");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(freqs_hz[i]) || !std::isfinite(amplitude[i]) || !std::isfinite(phase[i]) ||
        !std::isfinite(sigma_amp[i]) || !std::isfinite(sigma_phase[i])) {
      throw std::invalid_argument("trace contains non-finite values at row " + std::to_string(i));
    }
    if (i > 0 && !(freqs_hz[i] > freqs_hz[i - 1])) {
      throw std::invalid_argument("trace frequencies are not strictly increasing at row " + std::to_string(i));
    }
    if (amplitude[i] < 0.0 || sigma_amp[i] < 0.0 || sigma_phase[i] < 0.0) {
      throw std::invalid_argument("negative amplitude or sigma at row " + std::to_string(i));
    }
  }
}

SweepTrace SweepTrace::from_complex(std::span<const double> freqs_hz, std::span<const std::complex<double>> values,
                                    const TraceMeta& meta) {
  SweepTrace t;
  t.meta = meta;
  t.freqs_hz.assign(freqs_hz.begin(), freqs_hz.end());
  for (const auto& v : values) {
    t.amplitude.push_back(std::abs(v));
    t.phase.push_back(wrap_phase(std::arg(v)));
  }
  t.sigma_amp.assign(values.size(), 0.0);
  t.sigma_phase.assign(values.size(), 0.0);
  return t;
}

void NoiseModel::validate() const {
  if (!(sigma_floor >= 0.0)) throw std::invalid_argument("sigma_floor must be >= 0");
  if (!(sigma_peak >= 0.0)) throw std::invalid_argument("sigma_peak must be >= 0");
  if (!(width_hz > 0.0)) throw std::invalid_argument("noise width must be > 0");
}

double noise_sigma(double freq_hz, const NoiseModel& nm) {
  const double half = 0.5 * nm.width_hz;
  const double d = freq_hz - nm.center_hz;
  return nm.sigma_floor + nm.sigma_peak * half * half / (d * d + half * half);
}

std::vector<double> linear_grid(double center_hz, double half_span_hz, int points) {
  if (points < 2) throw std::invalid_argument("a grid needs at least two points");
  if (!(half_span_hz > 0.0)) throw std::invalid_argument("grid half-span must be positive");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    grid[static_cast<std::size_t>(i)] = center_hz - half_span_hz + 2.0 * half_span_hz * i / (points - 1);
  }
  return grid;
}

std::vector<double> default_grid(const SpinModeParams& mode, int points) {
  const double width = std::max(effective_damping(mode), mode.readout_rate);
  return linear_grid(angular_to_hz(std::abs(mode.omega_s)), 10.0 * angular_to_hz(width), points);
}

namespace {

TraceMeta meta_for(const OpticalConfig& optics, std::uint64_t seed) {
  TraceMeta meta;
  meta.drive_amplitude = optics.drive_amplitude;
  meta.theta = optics.theta;
  meta.phi = optics.phi;
  meta.alpha = optics.alpha;
  meta.seed = seed;
  return meta;
}

std::vector<Complex> model_values(std::span<const SpinModeParams> modes, const OpticalConfig& optics,
                                  std::span<const double> freqs_hz) {
  std::vector<double> omega(freqs_hz.size());
  std::transform(freqs_hz.begin(), freqs_hz.end(), omega.begin(), hz_to_angular);
  return response_sweep_reference(omega, modes, optics);
}

void assign_nominal_sigmas(SweepTrace& t, std::span<const Complex> model, const NoiseModel& nm) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double sigma = noise_sigma(t.freqs_hz[i], nm);
    const double mag = std::abs(model[i]);
    t.sigma_amp[i] = sigma;
    t.sigma_phase[i] = sigma == 0.0 ? 0.0 : (mag > 0.0 ? std::min(sigma / mag, std::numbers::pi) : std::numbers::pi);
  }
}

SweepTrace noisy_scan(std::span<const double> freqs_hz, std::span<const Complex> model, const NoiseModel& nm,
                      const OpticalConfig& optics, int scan) {
  const std::uint64_t seed = nm.seed + static_cast<std::uint64_t>(scan);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Complex> noisy(model.begin(), model.end());
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const double sigma = noise_sigma(freqs_hz[i], nm);
    const double re = normal(rng);
    const double im = normal(rng);
    noisy[i] += Complex(sigma * re, sigma * im);
  }
  SweepTrace t = SweepTrace::from_complex(freqs_hz, noisy, meta_for(optics, seed));
  assign_nominal_sigmas(t, model, nm);
  return t;
}

void check_inputs(std::span<const double> freqs_hz, const NoiseModel& nm, int n_scans) {
  nm.validate();
  if (n_scans < 1) throw std::invalid_argument("n_scans must be >= 1");
  if (freqs_hz.size() < 2) throw std::invalid_argument("grid needs at least two points");
  for (std::size_t i = 1; i < freqs_hz.size(); ++i) {
    if (!(freqs_hz[i] > freqs_hz[i - 1])) throw std::invalid_argument("frequency grid must be strictly increasing");
  }
}

}  // namespace

SweepTrace model_trace(std::span<const SpinModeParams> modes, const OpticalConfig& optics,
                       std::span<const double> freqs_hz, const NoiseModel& nm) {
  nm.validate();
  const std::vector<Complex> model = model_values(modes, optics, freqs_hz);
  SweepTrace t = SweepTrace::from_complex(freqs_hz, model, meta_for(optics, nm.seed));
  assign_nominal_sigmas(t, model, nm);
  return t;
}

std::vector<SweepTrace> generate_sweep(std::span<const SpinModeParams> modes, const OpticalConfig& optics,
                                       std::span<const double> freqs_hz, const NoiseModel& nm, int n_scans) {
  check_inputs(freqs_hz, nm, n_scans);
  const std::vector<Complex> model = model_values(modes, optics, freqs_hz);
  std::vector<SweepTrace> scans(static_cast<std::size_t>(n_scans));
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n_scans; ++s) scans[static_cast<std::size_t>(s)] = noisy_scan(freqs_hz, model, nm, optics, s);
  return scans;
}

std::vector<SweepTrace> generate_sweep_reference(std::span<const SpinModeParams> modes,
                                                 const OpticalConfig& optics, std::span<const double> freqs_hz,
                                                 const NoiseModel& nm, int n_scans) {
  check_inputs(freqs_hz, nm, n_scans);
  const std::vector<Complex> model = model_values(modes, optics, freqs_hz);
  std::vector<SweepTrace> scans;
  for (int s = 0; s < n_scans; ++s) scans.push_back(noisy_scan(freqs_hz, model, nm, optics, s));
  return scans;
}

SweepTrace average_traces(std::span<const SweepTrace> traces) {
  if (traces.empty()) throw std::invalid_argument("nothing to average");
  const SweepTrace& first = traces.front();
  for (const auto& t : traces) {
    t.validate();
    if (t.freqs_hz != first.freqs_hz) throw GridMismatchError("traces to average have different frequency grids");
  }
  if (traces.size() == 1) return first;

  const auto n = static_cast<double>(traces.size());
  constexpr double eps = std::numeric_limits<double>::epsilon();
  SweepTrace out = first;
  out.meta.scans = static_cast<int>(traces.size());
  out.meta.sigma_floored = 0;
  for (std::size_t i = 0; i < first.size(); ++i) {
    double amp_sum = 0.0;
    Complex unit_sum = 0.0;
    for (const auto& t : traces) {
      amp_sum += t.amplitude[i];
      unit_sum += std::polar(1.0, t.phase[i]);
    }
    const double amp_mean = amp_sum / n;
    const double phase_mean = wrap_phase(std::arg(unit_sum));
    double amp_var = 0.0;
    double phase_var = 0.0;
    for (const auto& t : traces) {
      const double da = t.amplitude[i] - amp_mean;
      const double dp = wrap_phase(t.phase[i] - phase_mean);
      amp_var += da * da;
      phase_var += dp * dp;
    }
    double sigma_amp = std::sqrt(amp_var / (n - 1.0) / n);
    double sigma_phase = std::sqrt(phase_var / (n - 1.0) / n);
    if (sigma_amp == 0.0 || sigma_phase == 0.0) ++out.meta.sigma_floored;
    out.amplitude[i] = amp_mean;
    out.phase[i] = phase_mean;
    out.sigma_amp[i] = std::max(sigma_amp, eps * std::max(amp_mean, std::numeric_limits<double>::min()));
    out.sigma_phase[i] = std::max(sigma_phase, eps * std::numbers::pi);
  }
  return out;
}

}  // namespace cifar
