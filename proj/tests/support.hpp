#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "cifar/response_model.hpp"

namespace cifar::testing {

/// Golden-section search for a minimum of f on [a, b].
inline double golden_minimum(const std::function<double(double)>& f, double a, double b, double tol) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (std::abs(b - a) > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Locations of the global minimum and maximum of f on [lo, hi]: dense grid
/// scan followed by golden-section refinement around the best grid points.
inline std::pair<double, double> numeric_extrema(const std::function<double(double)>& f, double lo, double hi,
                                                 int points = 20001) {
  const double h = (hi - lo) / (points - 1);
  int i_min = 0, i_max = 0;
  double f_min = f(lo), f_max = f_min;
  for (int i = 1; i < points; ++i) {
    const double v = f(lo + i * h);
    if (v < f_min) f_min = v, i_min = i;
    if (v > f_max) f_max = v, i_max = i;
  }
  const double tol = 1e-13 * (std::abs(hi) + std::abs(lo));
  const double x_min = golden_minimum(f, lo + (i_min - 1) * h, lo + (i_min + 1) * h, tol);
  const double x_max = golden_minimum([&](double x) { return -f(x); }, lo + (i_max - 1) * h, lo + (i_max + 1) * h, tol);
  return {x_min, x_max};
}

/// Numeric max-to-min distance of the high-Q signal, in rad/s.
inline double numeric_separation(const SpinModeParams& mode) {
  const double scale = std::max(mode.readout_rate, effective_damping(mode)) * (1.0 + std::abs(mode.zeta_s));
  const auto [d_min, d_max] =
      numeric_extrema([&](double d) { return highq_cifar(d, mode); }, -30.0 * scale, 30.0 * scale);
  return std::abs(d_min - d_max);
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

inline double rel_diff(Complex a, Complex b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace cifar::testing
