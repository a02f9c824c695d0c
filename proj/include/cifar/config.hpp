#pragma once

// YAML run configuration. Rates are given in Hz and angles in degrees; every
// such key carries a `_hz` or `_deg` suffix and is converted on load.
//
//   modes:
//     - omega_s_hz: 1.0e6        # signed: negative for a negative-mass oscillator
//       gamma_s0_hz: 1.9e3       # or gamma_s_hz for the effective damping
//       readout_rate_hz: 1.0e4
//       zeta_s: -0.05            # optional, derived from alpha and detuning if absent
//   optics: {theta_deg: 45, phi_deg: 0, alpha_deg: 0, detuning_hz: 3.0e9, drive_amplitude: 1}
//   noise:  {sigma_floor: 2e-3, sigma_peak: 1e-2, width_hz: 1.4e3, seed: 1}
//   grid:   {preset: default, points: 401}
//   fit:    {n_modes: 1, domain: amplitude_phase, frozen: [zeta_S], bounds: {Gamma_S_hz: [0, 1e5]}}
//   initial: {Gamma_S_hz: 9e3}

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "cifar/fit.hpp"
#include "cifar/response_model.hpp"
#include "cifar/sweep.hpp"

namespace cifar {

struct GridConfig {
  enum class Preset { kDefault, kWide };
  Preset preset = Preset::kDefault;
  int points = 0;                     // 0: 401 (default) or 3001 (wide)
  std::optional<double> center_hz;    // default |omega_S| of the first mode
  std::optional<double> half_span_hz; // overrides the preset span
};

inline constexpr int kDefaultGridPoints = 401;
inline constexpr int kWideGridPoints = 3001;

struct RunConfig {
  std::vector<SpinModeParams> modes;
  OpticalConfig optics;
  NoiseModel noise;
  bool noise_seed_set = false;
  GridConfig grid;
  FitModelSpec fit = FitModelSpec::single_mode();
  /// Partial starting point; unset entries come from initial_guess.
  std::array<std::optional<double>, kFitParamCount> initial{};

  /// Frequency grid for the configured preset, or the wide preset if `wide`.
  std::vector<double> make_grid(bool wide = false) const;
};

/// Parses and checks a configuration document; `modes` may be omitted for
/// fit-only documents. Unknown keys, missing unit suffixes and out-of-range
/// values raise ParseError with the line number. Dynamic instability of a
/// mode is not checked here.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Fills unset entries of `cfg.initial` from `guess`.
FitVector merge_initial(const RunConfig& cfg, const FitVector& guess);

}  // namespace cifar
