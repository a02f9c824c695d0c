#pragma once

// Bounded Levenberg-Marquardt least squares with profile-likelihood
// confidence intervals. Model-agnostic: the CIFAR fitter and the linear test
// fixtures both sit on top of this.

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cifar {

struct Bounds {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double v) const { return v >= lo && v <= hi; }
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

/// Fills `out` with the weighted residuals at `params`. Returns false when the
/// parameters lie outside the model's admissible region (e.g. unstable); the
/// solver then rejects the step.
using ResidualFunction = std::function<bool(std::span<const double> params, std::span<double> out)>;

struct LeastSquaresProblem {
  ResidualFunction residuals;
  std::size_t n_residuals = 0;
  std::vector<double> scale;  // typical magnitude of each parameter, > 0
  std::vector<bool> free;
  std::vector<Bounds> bounds;

  std::size_t n_params() const { return scale.size(); }
  std::size_t n_free() const;
  /// Throws std::invalid_argument on inconsistent sizes or no free parameter.
  void validate() const;
};

struct SolverOptions {
  double rel_chi2_tol = 1e-10;
  double step_tol = 1e-12;
  int max_iterations = 500;
};

struct SolverResult {
  std::vector<double> params;
  std::vector<double> residuals;
  double chi2 = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  std::string status;
  /// (J^T J)^-1 in parameter units, zero for frozen parameters. Not scaled by
  /// the reduced chi^2, so sqrt(diag) is the Delta chi^2 = 1 half-width of a
  /// linear problem.
  Eigen::MatrixXd covariance;
};

/// Minimizes sum(residuals^2) from `initial`. Returns the best point found;
/// `converged` is false when the iteration cap is hit. Throws
/// InstabilityError if the initial point is not admissible.
SolverResult levenberg_marquardt(const LeastSquaresProblem& problem, std::span<const double> initial,
                                 const SolverOptions& options = {});

struct ProfileOptions {
  double delta_chi2 = 1.0;
  double rel_tol = 1e-4;  // bisection stops at this fraction of the offset from the optimum
  int max_expansions = 60;
  int max_bisections = 200;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Profile-likelihood interval of parameter `index`: moves it away from the
/// optimum in both directions, re-optimizing every other free parameter, and
/// bisects for chi^2 = chi^2_min + delta_chi2. Throws std::invalid_argument
/// for a frozen parameter and NotBracketedError if a bound or the admissible
/// region is reached first.
Interval profile_interval(const LeastSquaresProblem& problem, const SolverResult& fit, std::size_t index,
                          const SolverOptions& solver = {}, const ProfileOptions& options = {});

}  // namespace cifar
