#pragma once

// Weighted least-squares estimation of the one- or two-mode CIFAR model from
// a swept trace.
//
// Parameter vector (internal units, rad/s and rad):
//   omega_S, gamma_S, Gamma_S, zeta_S, Gamma_BB, gamma_BB, scale, phase_offset
// gamma_S and gamma_BB are effective dampings. The broadband mode shares
// omega_S and zeta_S with the narrow mode. The model is
//   scale * exp(i phase_offset) * response(G, theta, phi from the trace).

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cifar/least_squares.hpp"
#include "cifar/response_model.hpp"
#include "cifar/trace.hpp"

namespace cifar {

enum class FitParam : std::size_t {
  kOmegaS = 0,
  kGammaS,
  kRateS,
  kZetaS,
  kRateBB,
  kGammaBB,
  kScale,
  kPhaseOffset,
};

inline constexpr std::size_t kFitParamCount = 8;
using FitVector = std::array<double, kFitParamCount>;

inline constexpr std::size_t index_of(FitParam p) { return static_cast<std::size_t>(p); }

/// "omega_S", "gamma_S", "Gamma_S", "zeta_S", "Gamma_BB", "gamma_BB", "scale", "phase_offset".
std::string_view param_name(FitParam p);
/// Accepts the names above, optionally with a "_hz" (rates) or "_deg"
/// (phase offset) suffix. Throws std::invalid_argument otherwise.
FitParam param_from_name(std::string_view name);
/// True for parameters stored as angular rates.
bool is_rate(FitParam p);

enum class ResidualDomain {
  kAmplitudePhase,  // (R, wrapped phase) pairs
  kQuadrature,      // real/imaginary parts, both weighted by sigma_amp
};

struct FitModelSpec {
  int n_modes = 1;
  std::array<bool, kFitParamCount> free{};
  std::array<Bounds, kFitParamCount> bounds{};
  ResidualDomain domain = ResidualDomain::kAmplitudePhase;

  /// Narrow mode, scale and phase offset free; broadband parameters frozen.
  static FitModelSpec single_mode();
  /// As single_mode plus the broadband rate and damping.
  static FitModelSpec two_mode();

  /// n_modes in {1, 2}, lo <= hi, at least one free parameter, broadband
  /// parameters frozen for a single mode. Throws std::invalid_argument.
  void validate() const;
};

/// Mode list described by `p` (one or two modes).
std::vector<SpinModeParams> modes_from(const FitVector& p, int n_modes);

/// True when every mode of `p` is stable with |zeta| < 1.
bool is_admissible(const FitVector& p, int n_modes);

/// Model value at one drive frequency for the geometry recorded in `meta`.
Complex model_value(const FitVector& p, int n_modes, const TraceMeta& meta, double freq_hz);

/// Model evaluated on the grid of `trace`.
std::vector<Complex> model_values(const FitVector& p, int n_modes, const SweepTrace& trace);

/// Residual vector: amplitude block then phase block (or real then imaginary).
/// Throws ZeroSigmaError if any sigma used is zero.
std::vector<double> weighted_residuals(const SweepTrace& trace, const FitVector& p, const FitModelSpec& spec);

/// Deterministic starting point: resonance and width from the deviation of
/// the complex trace from its off-resonant background, rate from the depth of
/// that deviation, zeta = 0, scale and phase offset from a linear projection.
/// Both oscillator masses are tried and the lower chi^2 kept.
FitVector initial_guess(const SweepTrace& trace, const FitModelSpec& spec);

struct FitResult {
  FitVector params{};
  std::array<bool, kFitParamCount> free{};
  int n_modes = 1;
  Eigen::MatrixXd covariance;  // (J^T J)^-1, internal units
  FitVector std_errors{};      // sqrt(diag(covariance)), 0 for frozen
  double chi2 = 0.0;
  double reduced_chi2 = 0.0;
  int dof = 0;
  bool converged = false;
  int iterations = 0;
  std::string status;
  std::vector<double> residuals;
  std::map<FitParam, Interval> intervals;
};

/// Bounded Levenberg-Marquardt fit. Starts from `initial` or, when absent,
/// from initial_guess. Non-convergence is reported in the result, not thrown.
FitResult fit(const SweepTrace& trace, const FitModelSpec& spec, const std::optional<FitVector>& initial = {});

/// Delta chi^2 = 1 profile interval of `param`; also stored in fit.intervals.
/// Throws std::invalid_argument for a frozen parameter, NotBracketedError if
/// chi^2 never rises by one within the bounds.
Interval profile_interval(const SweepTrace& trace, const FitModelSpec& spec, FitResult& fit, FitParam param);

/// One fit per trace, optionally with profiles. Traces are processed
/// concurrently; a failed trace yields a non-converged result whose status
/// carries the error message. Intervals that cannot be bracketed are omitted.
std::vector<FitResult> fit_batch(std::span<const SweepTrace> traces, const FitModelSpec& spec,
                                 std::span<const FitParam> profile = {});
std::vector<FitResult> fit_batch_reference(std::span<const SweepTrace> traces, const FitModelSpec& spec,
                                           std::span<const FitParam> profile = {});

// ---------------------------------------------------------------------------
// Quick-look readout rate

struct QuickRate {
  double separation_hz = 0.0;  // f_min - f_max, estimates Gamma_S (1 + zeta_S^2)
  double f_max_hz = 0.0;
  double f_min_hz = 0.0;
  /// (A_max - A_min) / (A_max + A_min). In the high-Q QND limit this equals
  /// Gamma_S / sqrt(Gamma_S^2 + gamma_S^2).
  double contrast = 0.0;
  /// Set when contrast < 1/sqrt(2), i.e. Gamma_S < gamma_S: the separation is
  /// then dominated by the damping.
  bool low_coupling = false;
};

/// Locates the amplitude maximum and minimum with parabolic refinement.
/// Throws NoExtremumError when either sits on the grid edge or the trace is
/// flat.
QuickRate quick_readout_rate(const SweepTrace& trace);

}  // namespace cifar
