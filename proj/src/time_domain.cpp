#include "cifar/time_domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cifar/errors.hpp"

namespace cifar {

namespace {

constexpr double kResolutionLimit = 0.1;
constexpr int kMinDemodPeriods = 50;

struct ModeCoefficients {
  double half_gamma;
  double omega;
  double x_gain;  // -2 sqrt(Gamma) zeta, multiplies P_L^in in dX_S/dt
  double p_gain;  //  2 sqrt(Gamma),      multiplies X_L^in in dP_S/dt
  double out_x;   // -sqrt(Gamma) zeta, multiplies P_S in X_L^out
  double out_p;   //  sqrt(Gamma),      multiplies X_S in P_L^out
};

class DrivenDynamics {
 public:
  DrivenDynamics(std::span<const SpinModeParams> modes, const OpticalConfig& optics, double omega_rf)
      : omega_rf_(omega_rf), sin_phi_(std::sin(optics.phi)), cos_phi_(std::cos(optics.phi)) {
    const Quadratures q = drive_quadratures(optics.theta, optics.drive_amplitude);
    drive_x_ = q(0).real();
    drive_p_ = q(1).real();
    for (const auto& m : modes) {
      const double root = std::sqrt(m.readout_rate);
      coeffs_.push_back({0.5 * effective_damping(m), m.omega_s, -2.0 * root * m.zeta_s, 2.0 * root,
                         -root * m.zeta_s, root});
    }
  }

  std::size_t size() const { return coeffs_.size(); }

  // One classical fourth-order Runge-Kutta step from time t.
  void step(std::vector<ModeState>& y, double t, double dt) const {
    const double s0 = std::sin(omega_rf_ * t);
    const double s1 = std::sin(omega_rf_ * (t + 0.5 * dt));
    const double s2 = std::sin(omega_rf_ * (t + dt));
    for (std::size_t n = 0; n < coeffs_.size(); ++n) {
      const auto& c = coeffs_[n];
      auto deriv = [&c, this](const ModeState& s, double drive) -> ModeState {
        return {-c.half_gamma * s[0] + c.omega * s[1] + c.x_gain * drive_p_ * drive,
                -c.omega * s[0] - c.half_gamma * s[1] + c.p_gain * drive_x_ * drive};
      };
      const ModeState y0 = y[n];
      const ModeState k1 = deriv(y0, s0);
      const ModeState k2 = deriv({y0[0] + 0.5 * dt * k1[0], y0[1] + 0.5 * dt * k1[1]}, s1);
      const ModeState k3 = deriv({y0[0] + 0.5 * dt * k2[0], y0[1] + 0.5 * dt * k2[1]}, s1);
      const ModeState k4 = deriv({y0[0] + dt * k3[0], y0[1] + dt * k3[1]}, s2);
      y[n][0] = y0[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
      y[n][1] = y0[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    }
  }

  // Detected quadrature of the output light at time t.
  double detected(const std::vector<ModeState>& y, double t) const {
    const double drive = std::sin(omega_rf_ * t);
    double x_out = drive_x_ * drive;
    double p_out = drive_p_ * drive;
    for (std::size_t n = 0; n < coeffs_.size(); ++n) {
      x_out += coeffs_[n].out_x * y[n][1];
      p_out += coeffs_[n].out_p * y[n][0];
    }
    return sin_phi_ * x_out + cos_phi_ * p_out;
  }

 private:
  double omega_rf_;
  double sin_phi_;
  double cos_phi_;
  double drive_x_ = 0.0;
  double drive_p_ = 0.0;
  std::vector<ModeCoefficients> coeffs_;
};

// Least-squares projection onto sin/cos at the drive frequency. Over a whole
// number of periods with commensurate sampling this is the plain lock-in
// average; the 2x2 solve keeps it exact for a pure tone otherwise.
class LockInAccumulator {
 public:
  explicit LockInAccumulator(double omega_rf) : omega_rf_(omega_rf) {}

  void add(double t, double y) {
    const double s = std::sin(omega_rf_ * t);
    const double c = std::cos(omega_rf_ * t);
    ss_ += s * s;
    cc_ += c * c;
    sc_ += s * c;
    ys_ += y * s;
    yc_ += y * c;
  }

  ComplexResponse result() const {
    const double det = ss_ * cc_ - sc_ * sc_;
    const double in_phase = (ys_ * cc_ - yc_ * sc_) / det;
    const double quadrature = (yc_ * ss_ - ys_ * sc_) / det;
    return {Complex(in_phase, quadrature)};
  }

 private:
  double omega_rf_;
  double ss_ = 0.0, cc_ = 0.0, sc_ = 0.0, ys_ = 0.0, yc_ = 0.0;
};

struct DemodWindow {
  std::size_t first = 0;
  std::size_t count = 0;
};

DemodWindow demod_window(std::size_t n_samples, double dt, double omega_rf, double settle_time) {
  const double period = kTwoPi / omega_rf;
  const auto first = static_cast<std::size_t>(std::ceil(settle_time / dt - 1e-9));
  if (first >= n_samples) throw InsufficientDataError("no samples after the settle window");
  const std::size_t available = n_samples - first;
  const double periods = std::floor(static_cast<double>(available) * dt / period + 1e-9);
  if (periods < kMinDemodPeriods) {
    throw InsufficientDataError("only " + std::to_string(static_cast<int>(periods)) +
                                " drive periods after settling, need " + std::to_string(kMinDemodPeriods));
  }
  auto count = static_cast<std::size_t>(std::llround(periods * period / dt));
  return {first, std::min(count, available)};
}

void check_finite(const std::vector<ModeState>& y) {
  for (const auto& s : y) {
    if (!std::isfinite(s[0]) || !std::isfinite(s[1]) || std::abs(s[0]) > 1e150 || std::abs(s[1]) > 1e150) {
      throw InstabilityError("trajectory diverged");
    }
  }
}

std::vector<ModeState> initial_state(std::size_t n_modes, std::span<const ModeState> initial) {
  if (initial.empty()) return std::vector<ModeState>(n_modes, ModeState{0.0, 0.0});
  if (initial.size() != n_modes) throw std::invalid_argument("initial state needs one entry per mode");
  return {initial.begin(), initial.end()};
}

}  // namespace

ResolvedIntegration resolve_integration(const IntegrationConfig& cfg, std::span<const SpinModeParams> modes,
                                        double omega_rf) {
  if (modes.empty()) throw std::invalid_argument("time-domain integration needs at least one mode");
  if (!(omega_rf > 0.0)) throw std::invalid_argument("drive frequency must be positive");
  double fastest = omega_rf;
  double slowest_damping = std::numeric_limits<double>::infinity();
  for (const auto& m : modes) {
    m.validate();
    fastest = std::max(fastest, std::abs(m.omega_s));
    slowest_damping = std::min(slowest_damping, effective_damping(m));
  }
  const double period = kTwoPi / omega_rf;

  ResolvedIntegration out;
  if (cfg.dt > 0.0) {
    out.dt = cfg.dt;
  } else {
    const double per_period = std::ceil(period * fastest / cfg.max_phase_step);
    out.dt = period / per_period;
  }
  if (out.dt * fastest >= kResolutionLimit) {
    throw ResolutionError("time step resolves the fastest rotation with " + std::to_string(out.dt * fastest) +
                          " rad per step, limit is 0.1");
  }
  out.settle_time = cfg.settle_periods / slowest_damping;
  out.duration = cfg.duration > 0.0 ? cfg.duration
                                    : std::ceil(out.settle_time / period) * period + cfg.measure_periods * period;
  if (out.duration < out.settle_time + kMinDemodPeriods * period) {
    throw InsufficientDataError("duration must cover the settle window plus 50 drive periods");
  }
  out.steps = static_cast<std::size_t>(std::llround(out.duration / out.dt));
  return out;
}

Trajectory integrate_dynamics(std::span<const SpinModeParams> modes, const OpticalConfig& optics,
                              double omega_rf, const IntegrationConfig& cfg, std::span<const ModeState> initial) {
  const ResolvedIntegration r = resolve_integration(cfg, modes, omega_rf);
  const DrivenDynamics dyn(modes, optics, omega_rf);
  std::vector<ModeState> y = initial_state(dyn.size(), initial);

  Trajectory traj;
  traj.dt = r.dt;
  traj.settle_time = r.settle_time;
  const std::size_t n = r.steps + 1;
  traj.times.reserve(n);
  traj.detected.reserve(n);
  traj.x_s.assign(dyn.size(), {});
  traj.p_s.assign(dyn.size(), {});
  for (std::size_t m = 0; m < dyn.size(); ++m) {
    traj.x_s[m].reserve(n);
    traj.p_s[m].reserve(n);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * r.dt;
    if (k > 0) {
      dyn.step(y, static_cast<double>(k - 1) * r.dt, r.dt);
      check_finite(y);
    }
    traj.times.push_back(t);
    traj.detected.push_back(dyn.detected(y, t));
    for (std::size_t m = 0; m < dyn.size(); ++m) {
      traj.x_s[m].push_back(y[m][0]);
      traj.p_s[m].push_back(y[m][1]);
    }
  }
  return traj;
}

ComplexResponse lock_in_demodulate(std::span<const double> samples, double dt, double omega_rf,
                                   double settle_time) {
  const DemodWindow w = demod_window(samples.size(), dt, omega_rf, settle_time);
  LockInAccumulator acc(omega_rf);
  for (std::size_t k = w.first; k < w.first + w.count; ++k) acc.add(static_cast<double>(k) * dt, samples[k]);
  return acc.result();
}

ComplexResponse lock_in_demodulate(const Trajectory& traj, double omega_rf) {
  return lock_in_demodulate(traj.detected, traj.dt, omega_rf, traj.settle_time);
}

ComplexResponse steady_state_response(std::span<const SpinModeParams> modes, const OpticalConfig& optics,
                                      double omega_rf, const IntegrationConfig& cfg) {
  const ResolvedIntegration r = resolve_integration(cfg, modes, omega_rf);
  const DrivenDynamics dyn(modes, optics, omega_rf);
  const DemodWindow w = demod_window(r.steps + 1, r.dt, omega_rf, r.settle_time);
  std::vector<ModeState> y = initial_state(dyn.size(), {});
  LockInAccumulator acc(omega_rf);
  for (std::size_t k = 0; k < w.first + w.count; ++k) {
    if (k > 0) {
      dyn.step(y, static_cast<double>(k - 1) * r.dt, r.dt);
      if (k % 4096 == 0) check_finite(y);
    }
    if (k >= w.first) {
      const double t = static_cast<double>(k) * r.dt;
      acc.add(t, dyn.detected(y, t));
    }
  }
  check_finite(y);
  return to_model_convention(acc.result());
}

namespace {

SweepTrace make_trace(std::span<const double> freqs_hz, std::span<const Complex> values,
                      const OpticalConfig& optics) {
  TraceMeta meta;
  meta.drive_amplitude = optics.drive_amplitude;
  meta.theta = optics.theta;
  meta.phi = optics.phi;
  meta.alpha = optics.alpha;
  return SweepTrace::from_complex(freqs_hz, values, meta);
}

void check_grid(std::span<const double> freqs_hz) {
  for (std::size_t i = 1; i < freqs_hz.size(); ++i) {
    if (!(freqs_hz[i] > freqs_hz[i - 1])) throw std::invalid_argument("frequency grid must be strictly increasing");
  }
}

}  // namespace

SweepTrace steady_state_sweep(std::span<const SpinModeParams> modes, const OpticalConfig& optics,
                              std::span<const double> freqs_hz, const IntegrationConfig& cfg) {
  check_grid(freqs_hz);
  for (double f : freqs_hz) resolve_integration(cfg, modes, hz_to_angular(f));
  std::vector<Complex> values(freqs_hz.size());
  const auto n = static_cast<std::ptrdiff_t>(freqs_hz.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    values[i] = steady_state_response(modes, optics, hz_to_angular(freqs_hz[i]), cfg).value;
  }
  return make_trace(freqs_hz, values, optics);
}

SweepTrace steady_state_sweep_reference(std::span<const SpinModeParams> modes, const OpticalConfig& optics,
                                        std::span<const double> freqs_hz, const IntegrationConfig& cfg) {
  check_grid(freqs_hz);
  std::vector<Complex> values;
  values.reserve(freqs_hz.size());
  for (double f : freqs_hz) values.push_back(steady_state_response(modes, optics, hz_to_angular(f), cfg).value);
  return make_trace(freqs_hz, values, optics);
}

}  // namespace cifar
