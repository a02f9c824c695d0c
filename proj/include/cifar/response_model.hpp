#pragma once

// Frequency-domain model of the coherently induced Faraday rotation (CIFAR)
// signal of a driven spin oscillator.
//
// All rates are angular (rad/s) and all angles are radians. The complex
// amplitudes follow the exp(-i omega_rf t) convention of the linear-response
// ansatz, so a positive phase here is a phase lag on the lock-in.

#include <complex>
#include <span>
#include <utility>

#include <Eigen/Core>

#include "cifar/units.hpp"

namespace cifar {

using Complex = std::complex<double>;
using Quadratures = Eigen::Vector2cd;   // (X_L, P_L)
using TransferMatrix = Eigen::Matrix2cd;

/// Excited-state hyperfine splittings of the cesium D2 line, F'=3 and F'=4
/// measured from F'=5 (rad/s).
inline constexpr double kSplitting35 = kTwoPi * 452e6;
inline constexpr double kSplitting45 = kTwoPi * 251e6;

/// Relative distance |1 + splitting/detuning| below which the weights are
/// considered singular.
inline constexpr double kPoleTolerance = 1e-9;

/// One oscillator mode. omega_s is signed: its sign selects the effective
/// mass (positive or negative) of the spin oscillator.
struct SpinModeParams {
  double omega_s = 0.0;       // rad/s, signed
  double gamma_s0 = 0.0;      // rad/s, intrinsic full width
  double readout_rate = 0.0;  // rad/s
  double zeta_s = 0.0;        // tensor coupling

  /// Builds a mode from its effective (tensor-shifted) damping.
  static SpinModeParams from_effective_damping(double omega_s, double gamma_s, double readout_rate,
                                               double zeta_s);

  /// Throws std::invalid_argument on out-of-domain fields and
  /// InstabilityError when the effective damping is not positive.
  void validate() const;
};

struct OpticalConfig {
  double theta = 0.0;            // input modulation phase
  double phi = 0.0;              // detection phase
  double alpha = 0.0;            // LO polarization angle to the bias field
  double detuning = 0.0;         // laser detuning from F=4 -> F'=5 (rad/s)
  double drive_amplitude = 1.0;  // G

  void validate() const;
};

struct PolarizabilityWeights {
  double a0 = 0.0;  // scalar
  double a1 = 0.0;  // vector
  double a2 = 0.0;  // tensor
};

struct PhysicalCoupling {
  double g_s = 0.0;
  double s_parallel = 0.0;  // photon flux of the strong polarization component
  double j_x = 0.0;         // macroscopic mean spin
  double n_s = 0.0;         // thermal occupation
};

struct ComplexResponse {
  Complex value;

  double amplitude() const { return std::abs(value); }
  /// Phase in (-pi, pi].
  double phase() const;
};

/// Wraps an angle into (-pi, pi].
double wrap_phase(double angle);

// ---------------------------------------------------------------------------
// Coupling constants

/// Scalar, vector and tensor polarizability weights of the F=4 ground state.
/// Throws PoleProximityError within kPoleTolerance of either hyperfine pole.
PolarizabilityWeights polarizability_weights(double detuning);

/// zeta_S = -14 (a2/a1) cos(2 alpha).
double tensor_coupling(double alpha, const PolarizabilityWeights& weights);

/// Gamma_S = g_S^2 a1^2 S_par J_x.
double readout_rate(const PhysicalCoupling& coupling, const PolarizabilityWeights& weights);

/// gamma_S = gamma_S0 + 2 zeta_S Gamma_S. Throws InstabilityError if <= 0.
double effective_damping(const SpinModeParams& mode);

/// C_q = Gamma_S / (2 gamma_S (n_S + 1/2)).
double quantum_cooperativity(const SpinModeParams& mode, double n_s);

// ---------------------------------------------------------------------------
// Linear response

/// chi_S(omega_rf) = 1 / (omega_S^2 + (gamma_S/2 - i omega_rf)^2).
Complex susceptibility(double omega_rf, const SpinModeParams& mode);

/// Input-output matrix written out element by element.
TransferMatrix transfer_matrix(double omega_rf, const SpinModeParams& mode);

/// Same matrix assembled as 1 + 2 Gamma_S Z L Z with L obtained by inverting
/// the dynamical matrix numerically. Kept as an independent route.
TransferMatrix transfer_matrix_product(double omega_rf, const SpinModeParams& mode);

/// Sum over modes: 1 + sum_n 2 Gamma_n Z_n L_n Z_n.
TransferMatrix multimode_transfer(double omega_rf, std::span<const SpinModeParams> modes);

Quadratures output_quadratures(double omega_rf, const SpinModeParams& mode, const Quadratures& input);

/// Convention used to turn (theta, G) into input quadratures.
enum class DriveConvention {
  kRotation,  // (cos theta, sin theta) G
  kStokes,    // (-sin theta, cos theta) G, i.e. the rotation convention at theta + 90 deg
};

/// Convention used by every response and simulation path in this library.
inline constexpr DriveConvention kDriveConvention = DriveConvention::kRotation;

Quadratures drive_quadratures(double theta, double g, DriveConvention convention = kDriveConvention);

/// AC drive written from the input Stokes components: (-sin theta, cos theta) G.
Quadratures stokes_drive(double theta, double g);

/// Detected quadrature P_det = sin(phi) X_out + cos(phi) P_out.
Complex detect(const Quadratures& output, double phi);

ComplexResponse cifar_response(double omega_rf, const SpinModeParams& mode, const OpticalConfig& optics);

/// Direct evaluation of the expanded |CIFAR| expression (sin(theta+phi),
/// cos(theta-phi), cos(theta+phi) terms). Independent of the matrix path.
Complex cifar_response_expanded(double omega_rf, const SpinModeParams& mode, const OpticalConfig& optics);

ComplexResponse multimode_response(double omega_rf, std::span<const SpinModeParams> modes,
                                   const OpticalConfig& optics);

// ---------------------------------------------------------------------------
// High-Q closed forms (theta = 45 deg, phi = 0)

/// True when gamma_S / |omega_S| < 0.1, where the high-Q forms apply.
bool is_high_q(const SpinModeParams& mode);

/// |CIFAR|^2 / G^2 in the high-Q limit as a function of
/// delta_rf = omega_rf - |omega_S|. For a positive-mass mode:
///   1 + [Gamma^2 (1 + zeta^2) - 2 Gamma (delta + zeta gamma / 2)] / (delta^2 + gamma^2 / 4).
/// A negative-mass mode mirrors the dispersive term (delta -> -delta).
double highq_cifar(double delta_rf, const SpinModeParams& mode);

struct ExtremaSeparation {
  double separation = 0.0;           // rad/s, max-to-min distance
  double high_coupling_limit = 0.0;  // Gamma_S (1 + zeta_S^2)
  bool no_interference = false;      // Gamma_S == 0: trace is flat
};

ExtremaSeparation extrema_separation(const SpinModeParams& mode);

/// Detuning of the high-Q minimum and maximum, (delta_min, delta_max).
std::pair<double, double> highq_extrema(const SpinModeParams& mode);

}  // namespace cifar
