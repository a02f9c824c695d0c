#pragma once

// Synthetic sweep datasets: frequency grids, additive lock-in noise whose
// standard deviation follows a Lorentzian peak on a flat floor, and averaging
// of repeated scans.

#include <cstdint>
#include <span>
#include <vector>

#include "cifar/response_model.hpp"
#include "cifar/trace.hpp"

namespace cifar {

struct NoiseModel {
  double sigma_floor = 0.0;  // response units
  double sigma_peak = 0.0;   // extra noise at the center
  double center_hz = 0.0;
  double width_hz = 1.0;     // FWHM
  std::uint64_t seed = 0;

  /// sigma_floor >= 0 (zero gives noiseless scans), sigma_peak >= 0, width > 0.
  void validate() const;
};

/// sigma(f) = sigma_floor + sigma_peak (w/2)^2 / ((f - center)^2 + (w/2)^2).
double noise_sigma(double freq_hz, const NoiseModel& nm);

/// `points` equally spaced frequencies covering [center - half_span, center + half_span].
std::vector<double> linear_grid(double center_hz, double half_span_hz, int points);

/// 401 points over |omega_S| +/- 10 max(gamma_S, Gamma_S).
std::vector<double> default_grid(const SpinModeParams& mode, int points = 401);

/// Half-span of the broadband preset (Hz).
inline constexpr double kWideHalfSpanHz = 300e3;

/// Noiseless trace with the sigmas the noise model would assign.
SweepTrace model_trace(std::span<const SpinModeParams> modes, const OpticalConfig& optics,
                       std::span<const double> freqs_hz, const NoiseModel& nm);

/// `n_scans` independent noisy scans. Noise is complex Gaussian with
/// standard deviation sigma(f) on each of the real and imaginary parts; scan
/// k draws from a generator seeded with nm.seed + k. Each scan carries
/// sigma_amp = sigma(f) and sigma_phase = sigma(f) / |model|.
std::vector<SweepTrace> generate_sweep(std::span<const SpinModeParams> modes, const OpticalConfig& optics,
                                       std::span<const double> freqs_hz, const NoiseModel& nm, int n_scans);
std::vector<SweepTrace> generate_sweep_reference(std::span<const SpinModeParams> modes,
                                                 const OpticalConfig& optics, std::span<const double> freqs_hz,
                                                 const NoiseModel& nm, int n_scans);

/// Pointwise mean amplitude and circular-mean phase. Sigmas become the
/// standard deviation of the mean; zero spreads are raised to a machine-scale
/// floor and counted in meta.sigma_floored. A single trace is returned as is.
/// Throws GridMismatchError when the grids differ.
SweepTrace average_traces(std::span<const SweepTrace> traces);

}  // namespace cifar
