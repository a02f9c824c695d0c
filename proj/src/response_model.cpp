#include "cifar/response_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/LU>

#include "cifar/errors.hpp"

namespace cifar {

namespace {

constexpr Complex kI{0.0, 1.0};

// 1 / (1 + splitting / detuning), written to stay finite at detuning = 0.
double pole_term(double detuning, double splitting) {
  if (detuning != 0.0 && std::abs(1.0 + splitting / detuning) < kPoleTolerance) {
    throw PoleProximityError("detuning " + std::to_string(detuning / kTwoPi) +
                             " Hz is on an excited-state hyperfine pole");
  }
  return detuning / (detuning + splitting);
}

TransferMatrix interaction_matrix(double zeta) {
  TransferMatrix z;
  z << 0.0, -zeta, 1.0, 0.0;
  return z;
}

}  // namespace

SpinModeParams SpinModeParams::from_effective_damping(double omega_s, double gamma_s, double readout_rate,
                                                      double zeta_s) {
  return {omega_s, gamma_s - 2.0 * zeta_s * readout_rate, readout_rate, zeta_s};
}

void SpinModeParams::validate() const {
  if (!std::isfinite(omega_s) || !std::isfinite(gamma_s0) || !std::isfinite(readout_rate) ||
      !std::isfinite(zeta_s)) {
    throw std::invalid_argument("spin mode parameters must be finite");
  }
  if (gamma_s0 < 0.0) throw std::invalid_argument("gamma_s0 must be >= 0");
  if (readout_rate < 0.0) throw std::invalid_argument("readout_rate must be >= 0");
  if (std::abs(zeta_s) >= 1.0) throw std::invalid_argument("|zeta_s| must be < 1");
  effective_damping(*this);
}

void OpticalConfig::validate() const {
  if (!(drive_amplitude >= 0.0)) throw std::invalid_argument("drive_amplitude must be >= 0");
  polarizability_weights(detuning);
}

double ComplexResponse::phase() const { return wrap_phase(std::arg(value)); }

double wrap_phase(double angle) {
  constexpr double pi = std::numbers::pi;
  double wrapped = std::remainder(angle, kTwoPi);
  if (wrapped <= -pi) wrapped += kTwoPi;
  return wrapped;
}

PolarizabilityWeights polarizability_weights(double detuning) {
  const double t35 = pole_term(detuning, kSplitting35);
  const double t45 = pole_term(detuning, kSplitting45);
  return {
      (t35 + 7.0 * t45 + 8.0) / 4.0,
      (-35.0 * t35 - 21.0 * t45 + 176.0) / 120.0,
      (5.0 * t35 - 21.0 * t45 + 16.0) / 240.0,
  };
}

double tensor_coupling(double alpha, const PolarizabilityWeights& weights) {
  // cos(2 alpha) written as sin(pi/2 - 2 alpha): exactly zero at alpha = 45 deg.
  const double cos2a = std::sin(0.5 * std::numbers::pi - 2.0 * alpha);
  return -14.0 * (weights.a2 / weights.a1) * cos2a;
}

double readout_rate(const PhysicalCoupling& coupling, const PolarizabilityWeights& weights) {
  return coupling.g_s * coupling.g_s * weights.a1 * weights.a1 * coupling.s_parallel * coupling.j_x;
}

double effective_damping(const SpinModeParams& mode) {
  const double gamma = mode.gamma_s0 + 2.0 * mode.zeta_s * mode.readout_rate;
  if (!(gamma > 0.0)) {
    throw InstabilityError("effective damping gamma_s = " + std::to_string(gamma / kTwoPi) +
                           " Hz is not positive");
  }
  return gamma;
}

double quantum_cooperativity(const SpinModeParams& mode, double n_s) {
  return mode.readout_rate / (2.0 * effective_damping(mode) * (n_s + 0.5));
}

Complex susceptibility(double omega_rf, const SpinModeParams& mode) {
  const Complex a = 0.5 * effective_damping(mode) - kI * omega_rf;
  return 1.0 / (mode.omega_s * mode.omega_s + a * a);
}

TransferMatrix transfer_matrix(double omega_rf, const SpinModeParams& mode) {
  const Complex chi = susceptibility(omega_rf, mode);
  const Complex a = 0.5 * effective_damping(mode) - kI * omega_rf;
  const double rate = mode.readout_rate;
  const double zeta = mode.zeta_s;
  const Complex diag = 1.0 - 2.0 * rate * zeta * a * chi;
  TransferMatrix t;
  t << diag, -2.0 * rate * zeta * zeta * mode.omega_s * chi, 2.0 * rate * mode.omega_s * chi, diag;
  return t;
}

TransferMatrix transfer_matrix_product(double omega_rf, const SpinModeParams& mode) {
  const Complex a = 0.5 * effective_damping(mode) - kI * omega_rf;
  TransferMatrix dynamics;
  dynamics << a, -mode.omega_s, mode.omega_s, a;
  const TransferMatrix l = dynamics.inverse();
  const TransferMatrix z = interaction_matrix(mode.zeta_s);
  return TransferMatrix::Identity() + 2.0 * mode.readout_rate * z * l * z;
}

TransferMatrix multimode_transfer(double omega_rf, std::span<const SpinModeParams> modes) {
  if (modes.empty()) throw std::invalid_argument("multimode response needs at least one mode");
  TransferMatrix t = TransferMatrix::Identity();
  for (const auto& mode : modes) t += transfer_matrix(omega_rf, mode) - TransferMatrix::Identity();
  return t;
}

Quadratures output_quadratures(double omega_rf, const SpinModeParams& mode, const Quadratures& input) {
  return transfer_matrix(omega_rf, mode) * input;
}

Quadratures drive_quadratures(double theta, double g, DriveConvention convention) {
  Quadratures q;
  if (convention == DriveConvention::kRotation) {
    q << std::cos(theta) * g, std::sin(theta) * g;
  } else {
    q << -std::sin(theta) * g, std::cos(theta) * g;
  }
  return q;
}

Quadratures stokes_drive(double theta, double g) {
  return drive_quadratures(theta, g, DriveConvention::kStokes);
}

Complex detect(const Quadratures& output, double phi) {
  return std::sin(phi) * output(0) + std::cos(phi) * output(1);
}

ComplexResponse cifar_response(double omega_rf, const SpinModeParams& mode, const OpticalConfig& optics) {
  const Quadratures in = drive_quadratures(optics.theta, optics.drive_amplitude);
  return {detect(output_quadratures(omega_rf, mode, in), optics.phi)};
}

Complex cifar_response_expanded(double omega_rf, const SpinModeParams& mode, const OpticalConfig& optics) {
  const Complex chi = susceptibility(omega_rf, mode);
  const double gamma = effective_damping(mode);
  const double rate = mode.readout_rate;
  const double zeta = mode.zeta_s;
  const double sum = optics.theta + optics.phi;
  const double diff = optics.theta - optics.phi;
  const Complex drive_term = (1.0 - 2.0 * rate * zeta * (0.5 * gamma - kI * omega_rf) * chi) * std::sin(sum);
  const Complex spin_term =
      rate * mode.omega_s * chi * ((1.0 - zeta * zeta) * std::cos(diff) + (1.0 + zeta * zeta) * std::cos(sum));
  return (drive_term + spin_term) * optics.drive_amplitude;
}

ComplexResponse multimode_response(double omega_rf, std::span<const SpinModeParams> modes,
                                   const OpticalConfig& optics) {
  const Quadratures in = drive_quadratures(optics.theta, optics.drive_amplitude);
  return {detect(multimode_transfer(omega_rf, modes) * in, optics.phi)};
}

bool is_high_q(const SpinModeParams& mode) {
  return effective_damping(mode) < 0.1 * std::abs(mode.omega_s);
}

double highq_cifar(double delta_rf, const SpinModeParams& mode) {
  const double gamma = effective_damping(mode);
  const double rate = mode.readout_rate;
  const double zeta = mode.zeta_s;
  const double dispersive = mode.omega_s < 0.0 ? -delta_rf : delta_rf;
  const double half = 0.5 * gamma;
  return 1.0 + (rate * rate * (1.0 + zeta * zeta) - 2.0 * rate * (dispersive + zeta * half)) /
                   (delta_rf * delta_rf + half * half);
}

std::pair<double, double> highq_extrema(const SpinModeParams& mode) {
  // Stationary points of highq_cifar solve d^2 - b d - gamma^2/4 = 0.
  const double gamma = effective_damping(mode);
  const double zeta = mode.zeta_s;
  const double b = mode.readout_rate * (1.0 + zeta * zeta) - zeta * gamma;
  const double root = std::hypot(b, gamma);
  double d_min = 0.5 * (b + root);
  double d_max = 0.5 * (b - root);
  if (mode.omega_s < 0.0) {
    d_min = -d_min;
    d_max = -d_max;
  }
  return {d_min, d_max};
}

ExtremaSeparation extrema_separation(const SpinModeParams& mode) {
  const double gamma = effective_damping(mode);
  const double rate = mode.readout_rate;
  const double z2 = 1.0 + mode.zeta_s * mode.zeta_s;
  ExtremaSeparation out;
  if (mode.zeta_s == 0.0) {
    out.separation = std::hypot(rate, gamma);
  } else {
    out.separation = std::sqrt(z2 * (rate * rate * z2 + gamma * gamma - 2.0 * rate * gamma * mode.zeta_s));
  }
  out.high_coupling_limit = rate * z2;
  out.no_interference = rate == 0.0;
  return out;
}

}  // namespace cifar
