#pragma once

// Data-parallel frequency-domain kernels. Each OpenMP kernel has a serial
// *_reference twin with identical arithmetic; tests require the two to agree
// bit for bit and the benchmark target compares their throughput.

#include <cstdint>
#include <span>
#include <vector>

#include "cifar/response_model.hpp"

namespace cifar {

/// Counter-based generator: every (seed, index) pair yields an independent,
/// reproducible stream regardless of thread scheduling.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}
  SplitMix64(std::uint64_t seed, std::uint64_t index) : state_(seed ^ (0x9E3779B97F4A7C15ULL * (index + 1))) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double log_uniform(double lo, double hi);

 private:
  std::uint64_t state_;
};

/// One admissible random operating point: a stable mode plus a drive
/// frequency within ten linewidths of resonance.
struct RandomCase {
  SpinModeParams mode;
  double omega_rf = 0.0;
};

/// Draws case `index` of stream `seed`. Covers both oscillator masses,
/// quality factors from 1 to 1e4, Gamma/gamma from 1e-2 to 1e2 and
/// |zeta| < 0.2.
RandomCase random_admissible_case(std::uint64_t seed, std::uint64_t index);

/// Detected complex response at every drive frequency (rad/s).
std::vector<Complex> response_sweep(std::span<const double> omega_rf, std::span<const SpinModeParams> modes,
                                    const OpticalConfig& optics);
std::vector<Complex> response_sweep_reference(std::span<const double> omega_rf,
                                              std::span<const SpinModeParams> modes, const OpticalConfig& optics);

/// Largest elementwise relative difference between the closed-form transfer
/// matrix and the Z L Z product over `count` random cases.
double max_transfer_discrepancy(std::uint64_t count, std::uint64_t seed);
double max_transfer_discrepancy_reference(std::uint64_t count, std::uint64_t seed);

/// Elementwise relative difference max_ij |a_ij - b_ij| / max(|a_ij|, |b_ij|).
double relative_discrepancy(const TransferMatrix& a, const TransferMatrix& b);

}  // namespace cifar
