#include "cifar/least_squares.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "cifar/errors.hpp"

namespace cifar {

std::size_t LeastSquaresProblem::n_free() const {
  return static_cast<std::size_t>(std::count(free.begin(), free.end(), true));
}

void LeastSquaresProblem::validate() const {
  if (!residuals) throw std::invalid_argument("least-squares problem has no residual function");
  if (free.size() != n_params() || bounds.size() != n_params()) {
    throw std::invalid_argument("scale, free and bounds must have one entry per parameter");
  }
  for (double s : scale) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("parameter scales must be positive");
  }
  if (n_free() == 0) throw std::invalid_argument("at least one parameter must be free");
}

namespace {

double sum_squares(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

// Works in scaled coordinates u_j = x_j / scale_j over the free parameters.
class ScaledProblem {
 public:
  explicit ScaledProblem(const LeastSquaresProblem& p) : p_(p) {
    for (std::size_t j = 0; j < p.n_params(); ++j) {
      if (p.free[j]) index_.push_back(j);
    }
  }

  std::size_t n_free() const { return index_.size(); }
  std::size_t n_residuals() const { return p_.n_residuals; }

  Eigen::VectorXd to_scaled(const std::vector<double>& x) const {
    Eigen::VectorXd u(index_.size());
    for (std::size_t k = 0; k < index_.size(); ++k) u(k) = x[index_[k]] / p_.scale[index_[k]];
    return u;
  }

  // Writes the free coordinates of u into x (clamped to bounds).
  void to_full(const Eigen::VectorXd& u, std::vector<double>& x) const {
    for (std::size_t k = 0; k < index_.size(); ++k) {
      const std::size_t j = index_[k];
      x[j] = p_.bounds[j].clamp(u(k) * p_.scale[j]);
    }
  }

  Eigen::VectorXd clamp_scaled(const Eigen::VectorXd& u) const {
    Eigen::VectorXd out(u.size());
    for (std::size_t k = 0; k < index_.size(); ++k) {
      const std::size_t j = index_[k];
      out(k) = p_.bounds[j].clamp(u(k) * p_.scale[j]) / p_.scale[j];
    }
    return out;
  }

  bool evaluate(const std::vector<double>& x, std::vector<double>& r) const {
    r.assign(p_.n_residuals, 0.0);
    if (!p_.residuals(x, r)) return false;
    return std::all_of(r.begin(), r.end(), [](double v) { return std::isfinite(v); });
  }

  // Central differences where both neighbours are admissible, one-sided
  // otherwise.
  Eigen::MatrixXd jacobian(const std::vector<double>& x, const std::vector<double>& r0) const {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p_.n_residuals),
                                                static_cast<Eigen::Index>(index_.size()));
    std::vector<double> xp = x, rp, rm;
    for (std::size_t k = 0; k < index_.size(); ++k) {
      const std::size_t j = index_[k];
      const double s = p_.scale[j];
      const double h = std::max(6e-6, 1e-9 * std::abs(x[j] / s));
      const double up = x[j] + h * s;
      const double down = x[j] - h * s;
      xp[j] = up;
      const bool ok_up = p_.bounds[j].contains(up) && evaluate(xp, rp);
      xp[j] = down;
      const bool ok_down = p_.bounds[j].contains(down) && evaluate(xp, rm);
      xp[j] = x[j];
      for (std::size_t i = 0; i < p_.n_residuals; ++i) {
        double d = 0.0;
        if (ok_up && ok_down) {
          d = (rp[i] - rm[i]) / (2.0 * h);
        } else if (ok_up) {
          d = (rp[i] - r0[i]) / h;
        } else if (ok_down) {
          d = (r0[i] - rm[i]) / h;
        }
        jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = d;
      }
    }
    return jac;
  }

  Eigen::MatrixXd full_covariance(const Eigen::MatrixXd& jac) const {
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    const Eigen::MatrixXd inv = normal.completeOrthogonalDecomposition().pseudoInverse();
    const auto n = static_cast<Eigen::Index>(p_.n_params());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t a = 0; a < index_.size(); ++a) {
      for (std::size_t b = 0; b < index_.size(); ++b) {
        cov(static_cast<Eigen::Index>(index_[a]), static_cast<Eigen::Index>(index_[b])) =
            inv(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * p_.scale[index_[a]] *
            p_.scale[index_[b]];
      }
    }
    return cov;
  }

 private:
  const LeastSquaresProblem& p_;
  std::vector<std::size_t> index_;
};

}  // namespace

SolverResult levenberg_marquardt(const LeastSquaresProblem& problem, std::span<const double> initial,
                                 const SolverOptions& options) {
  problem.validate();
  if (initial.size() != problem.n_params()) throw std::invalid_argument("initial guess has the wrong size");
  const ScaledProblem sp(problem);

  std::vector<double> x(initial.begin(), initial.end());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = problem.bounds[j].clamp(x[j]);
  std::vector<double> r;
  if (!sp.evaluate(x, r)) throw InstabilityError("model is not admissible at the initial guess");

  SolverResult out;
  double chi2 = sum_squares(r);
  Eigen::VectorXd u = sp.to_scaled(x);
  Eigen::MatrixXd jac = sp.jacobian(x, r);
  Eigen::MatrixXd normal = jac.transpose() * jac;
  Eigen::VectorXd grad = jac.transpose() * Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
  // Dimensionless: the damping term below is already scaled by diag(J^T J).
  double lambda = 1e-3;
  double nu = 2.0;

  std::vector<double> x_trial = x, r_trial;
  int it = 0;
  out.status = "iteration limit reached";
  for (; it < options.max_iterations; ++it) {
    if (chi2 == 0.0) {
      out.converged = true;
      out.status = "exact fit";
      break;
    }
    Eigen::VectorXd damping = normal.diagonal();
    const double floor = 1e-12 * std::max(damping.maxCoeff(), 1e-300);
    for (Eigen::Index k = 0; k < damping.size(); ++k) damping(k) = std::max(damping(k), floor);
    Eigen::MatrixXd lhs = normal;
    lhs.diagonal() += lambda * damping;
    const Eigen::VectorXd step_raw = lhs.ldlt().solve(-grad);
    const Eigen::VectorXd u_trial = sp.clamp_scaled(u + step_raw);
    const Eigen::VectorXd step = u_trial - u;

    // Per component, so one large coordinate cannot mask progress elsewhere.
    if ((step.array().abs() <= options.step_tol * (u.array().abs() + options.step_tol)).all()) {
      out.converged = true;
      out.status = "step below tolerance";
      break;
    }

    sp.to_full(u_trial, x_trial);
    const bool admissible = sp.evaluate(x_trial, r_trial);
    const double chi2_trial = admissible ? sum_squares(r_trial) : std::numeric_limits<double>::infinity();
    const double predicted = -(2.0 * step.dot(grad) + step.dot(normal * step));
    const double rho = predicted > 0.0 ? (chi2 - chi2_trial) / predicted : -1.0;

    if (admissible && chi2_trial < chi2 && rho > 0.0) {
      const double rel_change = (chi2 - chi2_trial) / chi2;
      u = u_trial;
      x = x_trial;
      r = r_trial;
      chi2 = chi2_trial;
      jac = sp.jacobian(x, r);
      normal = jac.transpose() * jac;
      grad = jac.transpose() * Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
      lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      if (rel_change < options.rel_chi2_tol) {
        out.converged = true;
        out.status = "relative chi2 change below tolerance";
        ++it;
        break;
      }
    } else {
      lambda *= nu;
      nu *= 2.0;
      if (lambda > 1e30) {
        out.converged = true;
        out.status = "no further reduction possible";
        break;
      }
    }
  }

  out.params = x;
  out.residuals = r;
  out.chi2 = chi2;
  out.iterations = it;
  out.covariance = sp.full_covariance(jac);
  return out;
}

namespace {

struct ProfilePoint {
  double value;
  double delta;
  std::vector<double> params;
};

class Profiler {
 public:
  Profiler(const LeastSquaresProblem& problem, const SolverResult& fit, std::size_t index, const SolverOptions& solver)
      : fixed_(problem), fit_(fit), index_(index), solver_(solver) {
    fixed_.free[index] = false;
  }

  // chi^2 minimized over the other free parameters with parameter `index`
  // held at `value`. Returns false if that point is not admissible.
  bool evaluate(double value, const std::vector<double>& warm, ProfilePoint& out) const {
    std::vector<double> start = warm;
    start[index_] = value;
    double chi2;
    std::vector<double> params;
    try {
      if (fixed_.n_free() == 0) {
        std::vector<double> r(fixed_.n_residuals);
        if (!fixed_.residuals(start, r)) return false;
        chi2 = sum_squares(r);
        params = start;
      } else {
        SolverResult res = levenberg_marquardt(fixed_, start, solver_);
        chi2 = res.chi2;
        params = std::move(res.params);
      }
    } catch (const InstabilityError&) {
      return false;
    }
    out = {value, chi2 - fit_.chi2, std::move(params)};
    return true;
  }

 private:
  LeastSquaresProblem fixed_;
  const SolverResult& fit_;
  std::size_t index_;
  SolverOptions solver_;
};

}  // namespace

Interval profile_interval(const LeastSquaresProblem& problem, const SolverResult& fit, std::size_t index,
                          const SolverOptions& solver, const ProfileOptions& options) {
  problem.validate();
  if (index >= problem.n_params()) throw std::invalid_argument("profile index out of range");
  if (!problem.free[index]) throw std::invalid_argument("cannot profile a frozen parameter");

  const Profiler profiler(problem, fit, index, solver);
  const double best = fit.params[index];
  const Bounds& bound = problem.bounds[index];
  double step = std::sqrt(std::max(fit.covariance(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(index)), 0.0));
  if (!(step > 0.0) || !std::isfinite(step)) step = 1e-3 * std::max(std::abs(best), problem.scale[index]);

  auto one_side = [&](double direction) {
    ProfilePoint inner{best, 0.0, fit.params};
    ProfilePoint outer{};
    double offset = 0.5 * step;
    bool bracketed = false;
    for (int e = 0; e < options.max_expansions; ++e, offset *= 2.0) {
      const double trial = bound.clamp(best + direction * offset);
      ProfilePoint p;
      if (!profiler.evaluate(trial, inner.params, p)) break;
      if (p.delta >= options.delta_chi2) {
        outer = std::move(p);
        bracketed = true;
        break;
      }
      inner = std::move(p);
      if (trial == bound.lo || trial == bound.hi) break;
    }
    if (!bracketed) {
      throw NotBracketedError("chi2 never rises by " + std::to_string(options.delta_chi2) +
                              " before the parameter bound or admissible region");
    }
    for (int b = 0; b < options.max_bisections; ++b) {
      if (std::abs(outer.value - inner.value) <= options.rel_tol * std::abs(outer.value - best)) break;
      const double mid = 0.5 * (inner.value + outer.value);
      ProfilePoint p;
      if (!profiler.evaluate(mid, inner.params, p)) break;
      if (p.delta >= options.delta_chi2) {
        outer = std::move(p);
      } else {
        inner = std::move(p);
      }
    }
    const double span = outer.delta - inner.delta;
    const double frac = span > 0.0 ? (options.delta_chi2 - inner.delta) / span : 0.5;
    return inner.value + std::clamp(frac, 0.0, 1.0) * (outer.value - inner.value);
  };

  Interval out;
  out.lo = one_side(-1.0);
  out.hi = one_side(+1.0);
  out.lo = std::min(out.lo, best);
  out.hi = std::max(out.hi, best);
  return out;
}

}  // namespace cifar
