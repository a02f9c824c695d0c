#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace cifar {

struct TraceMeta {
  double drive_amplitude = 1.0;  // G
  double theta = 0.0;            // rad
  double phi = 0.0;              // rad
  double alpha = 0.0;            // rad
  int scans = 1;
  std::uint64_t seed = 0;
  int sigma_floored = 0;  // points whose sigma was raised to the machine floor
};

/// Swept-frequency amplitude/phase record. Frequencies are ordinary (Hz).
struct SweepTrace {
  std::vector<double> freqs_hz;
  std::vector<double> amplitude;
  std::vector<double> phase;  // rad, (-pi, pi]
  std::vector<double> sigma_amp;
  std::vector<double> sigma_phase;
  TraceMeta meta;

  std::size_t size() const { return freqs_hz.size(); }

  /// Equal array lengths, strictly increasing finite frequencies, finite
  /// values, non-negative sigmas. Throws std::invalid_argument.
  void validate() const;

  std::complex<double> complex_at(std::size_t i) const { return std::polar(amplitude[i], phase[i]); }

  /// Builds a trace from complex samples with zero sigmas.
  static SweepTrace from_complex(std::span<const double> freqs_hz, std::span<const std::complex<double>> values,
                                 const TraceMeta& meta);
};

}  // namespace cifar
