#pragma once

// Time-domain oracle: integrates the driven linear spin dynamics with a
// fixed-step classical Runge-Kutta scheme and demodulates the detected
// quadrature the way a lock-in amplifier referenced to the drive would.
//
// The integrator puts the effective damping gamma_S / 2 on the diagonal of
// the dynamical matrix, so its steady state is directly comparable with the
// frequency-domain model.

#include <array>
#include <span>
#include <vector>

#include "cifar/response_model.hpp"
#include "cifar/trace.hpp"

namespace cifar {

struct IntegrationConfig {
  double dt = 0.0;              // s; 0 picks a step commensurate with the drive period
  double duration = 0.0;        // s; 0 picks settle window + measure_periods
  double settle_periods = 30.0; // discarded window, in damping times 1/gamma_S of the slowest mode
  double max_phase_step = 0.02; // rad advanced per step by the fastest rotation (automatic dt)
  int measure_periods = 200;    // drive periods demodulated (automatic duration)
};

/// Integration parameters with every automatic field filled in.
struct ResolvedIntegration {
  double dt = 0.0;
  double duration = 0.0;
  double settle_time = 0.0;
  std::size_t steps = 0;
};

/// Fills automatic fields and checks the invariants:
/// dt * max(|omega_S|, omega_rf) < 0.1 (ResolutionError) and
/// duration >= settle time + 50 drive periods (InsufficientDataError).
ResolvedIntegration resolve_integration(const IntegrationConfig& cfg, std::span<const SpinModeParams> modes,
                                        double omega_rf);

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> x_s;  // [mode][sample]
  std::vector<std::vector<double>> p_s;  // [mode][sample]
  std::vector<double> detected;
  double dt = 0.0;
  double settle_time = 0.0;
};

using ModeState = std::array<double, 2>;  // (X_S, P_S)

/// Integrates all modes under the drive G sin(omega_rf t) applied to the
/// input quadratures. `initial` defaults to all modes at rest.
Trajectory integrate_dynamics(std::span<const SpinModeParams> modes, const OpticalConfig& optics,
                              double omega_rf, const IntegrationConfig& cfg,
                              std::span<const ModeState> initial = {});

/// Lock-in estimate over the largest whole number of drive periods after
/// `settle_time`: a tone A sin(omega_rf t + psi) maps to A exp(i psi).
/// Throws InsufficientDataError with fewer than 50 periods available.
ComplexResponse lock_in_demodulate(std::span<const double> samples, double dt, double omega_rf,
                                   double settle_time);
ComplexResponse lock_in_demodulate(const Trajectory& traj, double omega_rf);

/// Converts a lock-in phasor into the exp(-i omega t) model convention used by
/// cifar_response (the two differ by complex conjugation).
inline ComplexResponse to_model_convention(const ComplexResponse& lock_in) { return {std::conj(lock_in.value)}; }

/// Integrate and demodulate at one drive frequency without storing the
/// trajectory. Returns the response in model convention.
ComplexResponse steady_state_response(std::span<const SpinModeParams> modes, const OpticalConfig& optics,
                                      double omega_rf, const IntegrationConfig& cfg = {});

/// Noiseless trace from the time-domain route, one integration per point.
SweepTrace steady_state_sweep(std::span<const SpinModeParams> modes, const OpticalConfig& optics,
                              std::span<const double> freqs_hz, const IntegrationConfig& cfg = {});
SweepTrace steady_state_sweep_reference(std::span<const SpinModeParams> modes, const OpticalConfig& optics,
                                        std::span<const double> freqs_hz, const IntegrationConfig& cfg = {});

}  // namespace cifar
