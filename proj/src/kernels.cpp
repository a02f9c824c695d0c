#include "cifar/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace cifar {

double SplitMix64::log_uniform(double lo, double hi) {
  return std::exp(uniform(std::log(lo), std::log(hi)));
}

RandomCase random_admissible_case(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 rng(seed, index);
  const double omega = hz_to_angular(rng.log_uniform(1e3, 1e7)) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  const double gamma = std::abs(omega) * rng.log_uniform(1e-4, 1.0);
  const double rate = gamma * rng.log_uniform(1e-2, 1e2);
  double zeta = rng.uniform(-0.2, 0.2);
  // Keep the intrinsic width non-negative.
  if (gamma - 2.0 * zeta * rate < 0.0) zeta = -zeta;
  RandomCase out;
  out.mode = SpinModeParams::from_effective_damping(omega, gamma, rate, zeta);
  out.omega_rf = std::abs(std::abs(omega) + gamma * rng.uniform(-10.0, 10.0));
  return out;
}

std::vector<Complex> response_sweep(std::span<const double> omega_rf, std::span<const SpinModeParams> modes,
                                    const OpticalConfig& optics) {
  for (const auto& m : modes) m.validate();
  std::vector<Complex> out(omega_rf.size());
  const auto n = static_cast<std::ptrdiff_t>(omega_rf.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = multimode_response(omega_rf[i], modes, optics).value;
  return out;
}

std::vector<Complex> response_sweep_reference(std::span<const double> omega_rf,
                                              std::span<const SpinModeParams> modes, const OpticalConfig& optics) {
  for (const auto& m : modes) m.validate();
  std::vector<Complex> out;
  out.reserve(omega_rf.size());
  for (double w : omega_rf) out.push_back(multimode_response(w, modes, optics).value);
  return out;
}

double relative_discrepancy(const TransferMatrix& a, const TransferMatrix& b) {
  double worst = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double scale = std::max(std::abs(a(i, j)), std::abs(b(i, j)));
      if (scale == 0.0) continue;
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / scale);
    }
  }
  return worst;
}

namespace {

double discrepancy_at(std::uint64_t seed, std::uint64_t index) {
  const RandomCase c = random_admissible_case(seed, index);
  return relative_discrepancy(transfer_matrix(c.omega_rf, c.mode), transfer_matrix_product(c.omega_rf, c.mode));
}

}  // namespace

double max_transfer_discrepancy(std::uint64_t count, std::uint64_t seed) {
  double worst = 0.0;
  const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(static) reduction(max : worst)
  for (std::int64_t i = 0; i < n; ++i) worst = std::max(worst, discrepancy_at(seed, static_cast<std::uint64_t>(i)));
  return worst;
}

double max_transfer_discrepancy_reference(std::uint64_t count, std::uint64_t seed) {
  double worst = 0.0;
  for (std::uint64_t i = 0; i < count; ++i) worst = std::max(worst, discrepancy_at(seed, i));
  return worst;
}

}  // namespace cifar
