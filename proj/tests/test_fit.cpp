#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cifar/errors.hpp"
#include "cifar/fit.hpp"
#include "cifar/kernels.hpp"
#include "cifar/sweep.hpp"

using namespace cifar;

namespace {

SpinModeParams mode_hz(double omega_hz, double gamma_hz, double rate_hz, double zeta) {
  return SpinModeParams::from_effective_damping(hz_to_angular(omega_hz), hz_to_angular(gamma_hz),
                                                hz_to_angular(rate_hz), zeta);
}

SpinModeParams narrow_mode() { return mode_hz(1e6, 1.4e3, 1e4, -0.05); }

OpticalConfig optics_deg(double theta_deg, double phi_deg = 0.0) {
  OpticalConfig o;
  o.theta = deg_to_rad(theta_deg);
  o.phi = deg_to_rad(phi_deg);
  return o;
}

NoiseModel realistic_noise(std::uint64_t seed) { return {2e-3, 1e-2, 1e6, 1.4e3, seed}; }

FitVector truth_of(const SpinModeParams& m) {
  FitVector p{};
  p[index_of(FitParam::kOmegaS)] = m.omega_s;
  p[index_of(FitParam::kGammaS)] = effective_damping(m);
  p[index_of(FitParam::kRateS)] = m.readout_rate;
  p[index_of(FitParam::kZetaS)] = m.zeta_s;
  p[index_of(FitParam::kScale)] = 1.0;
  return p;
}

SweepTrace noiseless(const SpinModeParams& m, const OpticalConfig& o) {
  const std::vector<SpinModeParams> modes = {m};
  return model_trace(modes, o, default_grid(m), realistic_noise(0));
}

SweepTrace noisy(const SpinModeParams& m, const OpticalConfig& o, const NoiseModel& nm) {
  const std::vector<SpinModeParams> modes = {m};
  return generate_sweep(modes, o, default_grid(m), nm, 1)[0];
}

}  // namespace

TEST_CASE("parameter names") {
  for (std::size_t k = 0; k < kFitParamCount; ++k) {
    const auto p = static_cast<FitParam>(k);
    CHECK(param_from_name(param_name(p)) == p);
  }
  CHECK(param_from_name("Gamma_S_hz") == FitParam::kRateS);
  CHECK(param_from_name("phase_offset_deg") == FitParam::kPhaseOffset);
  CHECK_THROWS_AS(param_from_name("zeta_S_hz"), std::invalid_argument);
  CHECK_THROWS_AS(param_from_name("scale_deg"), std::invalid_argument);
  CHECK_THROWS_AS(param_from_name("gamma"), std::invalid_argument);
  CHECK(is_rate(FitParam::kGammaBB));
  CHECK_FALSE(is_rate(FitParam::kZetaS));
}

TEST_CASE("model specifications") {
  const FitModelSpec one = FitModelSpec::single_mode();
  CHECK_NOTHROW(one.validate());
  CHECK_FALSE(one.free[index_of(FitParam::kRateBB)]);
  const FitModelSpec two = FitModelSpec::two_mode();
  CHECK_NOTHROW(two.validate());
  CHECK(two.free[index_of(FitParam::kGammaBB)]);

  FitModelSpec bad = one;
  bad.free[index_of(FitParam::kRateBB)] = true;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = one;
  bad.n_modes = 3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = one;
  bad.free.fill(false);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = one;
  bad.bounds[0] = Bounds{1.0, 0.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("residuals") {
  const SpinModeParams m = narrow_mode();
  const OpticalConfig o = optics_deg(45.0);
  SweepTrace t = noiseless(m, o);
  const FitVector p = truth_of(m);

  SUBCASE("zero at the generating parameters") {
    for (ResidualDomain d : {ResidualDomain::kAmplitudePhase, ResidualDomain::kQuadrature}) {
      FitModelSpec spec = FitModelSpec::single_mode();
      spec.domain = d;
      const std::vector<double> r = weighted_residuals(t, p, spec);
      CHECK(r.size() == 2 * t.size());
      for (double v : r) CHECK(std::abs(v) < 1e-9);
    }
  }
  SUBCASE("one sigma offset gives a unit residual") {
    const std::size_t i = 123;
    t.amplitude[i] += t.sigma_amp[i];
    t.phase[i] = wrap_phase(t.phase[i] - t.sigma_phase[i]);
    const std::vector<double> r = weighted_residuals(t, p, FitModelSpec::single_mode());
    CHECK(r[i] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r[t.size() + i] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(std::abs(r[i + 1]) < 1e-9);
  }
  SUBCASE("zero sigma is rejected") {
    t.sigma_phase[7] = 0.0;
    CHECK_THROWS_AS(weighted_residuals(t, p, FitModelSpec::single_mode()), ZeroSigmaError);
    FitModelSpec quad = FitModelSpec::single_mode();
    quad.domain = ResidualDomain::kQuadrature;
    CHECK_NOTHROW(weighted_residuals(t, p, quad));
    CHECK_THROWS_AS(fit(t, FitModelSpec::single_mode()), ZeroSigmaError);
  }
  SUBCASE("model geometry comes from the trace metadata") {
    t.meta.theta = deg_to_rad(90.0);
    CHECK(std::abs(model_value(p, 1, t.meta, 1e6) -
                   multimode_response(hz_to_angular(1e6), std::vector<SpinModeParams>{m}, optics_deg(90.0)).value) <
          1e-12);
  }
}

TEST_CASE("admissibility") {
  FitVector p = truth_of(narrow_mode());
  CHECK(is_admissible(p, 1));
  p[index_of(FitParam::kZetaS)] = 1.0;
  CHECK_FALSE(is_admissible(p, 1));
  p = truth_of(narrow_mode());
  p[index_of(FitParam::kGammaS)] = 0.0;
  CHECK_FALSE(is_admissible(p, 1));
  p = truth_of(narrow_mode());
  CHECK_FALSE(is_admissible(p, 2));  // broadband damping is zero
  p[index_of(FitParam::kGammaBB)] = 1e6;
  CHECK(is_admissible(p, 2));
  CHECK(modes_from(p, 2).size() == 2);
  CHECK(modes_from(p, 2)[1].omega_s == p[0]);
}

TEST_CASE("initial guess lands near the truth") {
  for (double sign : {1.0, -1.0}) {
    SpinModeParams m = narrow_mode();
    m.omega_s *= sign;
    const FitVector g = initial_guess(noiseless(m, optics_deg(45.0)), FitModelSpec::single_mode());
    const double gamma = effective_damping(m);
    CAPTURE(sign);
    CHECK(std::abs(g[0] - m.omega_s) < gamma);
    CHECK(g[1] > 0.3 * gamma);
    CHECK(g[1] < 3.0 * gamma);
    CHECK(g[2] > 0.3 * m.readout_rate);
    CHECK(g[2] < 3.0 * m.readout_rate);
  }
}

TEST_CASE("noiseless round trip") {
  const FitModelSpec spec = FitModelSpec::single_mode();
  SUBCASE("reference case") {
    const SpinModeParams m = narrow_mode();
    const FitResult r = fit(noiseless(m, optics_deg(45.0)), spec);
    CHECK(r.converged);
    const FitVector t = truth_of(m);
    for (std::size_t k : {0u, 1u, 2u, 3u, 6u}) CHECK(std::abs(r.params[k] - t[k]) <= 1e-8 * std::abs(t[k]));
    CHECK(std::abs(r.params[index_of(FitParam::kPhaseOffset)]) < 1e-8);
    CHECK(r.chi2 < 1e-12);
    CHECK(r.dof == static_cast<int>(2 * default_grid(m).size()) - 6);
  }
  SUBCASE("random cases") {
    for (std::uint64_t i = 0; i < 10; ++i) {
      const RandomCase c = random_admissible_case(99, i);
      const FitResult r = fit(noiseless(c.mode, optics_deg(45.0)), spec);
      const FitVector t = truth_of(c.mode);
      CAPTURE(i);
      for (std::size_t k : {0u, 1u, 2u, 3u}) CHECK(std::abs(r.params[k] - t[k]) <= 1e-6 * std::abs(t[k]));
    }
  }
  SUBCASE("gain and phase offset") {
    const SpinModeParams m = narrow_mode();
    SweepTrace t = noiseless(m, optics_deg(45.0, 20.0));
    for (std::size_t i = 0; i < t.size(); ++i) {
      t.amplitude[i] *= 2.5;
      t.sigma_amp[i] *= 2.5;
      t.phase[i] = wrap_phase(t.phase[i] + 0.4);
    }
    const FitResult r = fit(t, spec);
    CHECK(r.params[index_of(FitParam::kScale)] == doctest::Approx(2.5).epsilon(1e-8));
    CHECK(r.params[index_of(FitParam::kPhaseOffset)] == doctest::Approx(0.4).epsilon(1e-8));
    CHECK(r.params[index_of(FitParam::kRateS)] == doctest::Approx(m.readout_rate).epsilon(1e-8));
  }
}

TEST_CASE("noisy fit statistics") {
  const SpinModeParams m = narrow_mode();
  const FitModelSpec spec = FitModelSpec::single_mode();
  SweepTrace t = noisy(m, optics_deg(45.0), realistic_noise(11));
  FitResult r = fit(t, spec);
  CHECK(r.converged);
  CHECK(r.reduced_chi2 == doctest::Approx(1.0).epsilon(0.2));
  CHECK(std::abs(r.params[2] - m.readout_rate) < 5.0 * r.std_errors[2]);

  const Interval iv = profile_interval(t, spec, r, FitParam::kRateS);
  CHECK(iv.lo < r.params[2]);
  CHECK(r.params[2] < iv.hi);
  CHECK(r.intervals.count(FitParam::kRateS) == 1);
  // Nearly linear near the optimum: half-width close to the covariance error.
  CHECK((iv.hi - iv.lo) / 2.0 == doctest::Approx(r.std_errors[2]).epsilon(0.1));
  CHECK_THROWS_AS(profile_interval(t, spec, r, FitParam::kRateBB), std::invalid_argument);

  NoiseModel louder = realistic_noise(11);
  louder.sigma_floor *= 4.0;
  louder.sigma_peak *= 4.0;
  SweepTrace t4 = noisy(m, optics_deg(45.0), louder);
  FitResult r4 = fit(t4, spec);
  const Interval iv4 = profile_interval(t4, spec, r4, FitParam::kRateS);
  CHECK((iv4.hi - iv4.lo) > 3.0 * (iv.hi - iv.lo));
}

TEST_CASE("heteroscedastic weighting matters") {
  // Noise concentrated on resonance; the same data fitted with the true
  // sigmas and with a flat sigma.
  const SpinModeParams m = narrow_mode();
  const FitModelSpec spec = FitModelSpec::single_mode();
  double err_weighted = 0.0, err_flat = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const NoiseModel nm{5e-4, 5e-2, 1e6, 3e3, 500 + s};
    const SweepTrace t = noisy(m, optics_deg(45.0), nm);
    SweepTrace flat = t;
    const double mean_sigma = 0.02;
    for (std::size_t i = 0; i < flat.size(); ++i) {
      flat.sigma_amp[i] = mean_sigma;
      flat.sigma_phase[i] = mean_sigma / t.amplitude[i];
    }
    err_weighted += std::pow((fit(t, spec).params[2] - m.readout_rate) / m.readout_rate, 2);
    err_flat += std::pow((fit(flat, spec).params[2] - m.readout_rate) / m.readout_rate, 2);
  }
  CHECK(err_weighted < 0.5 * err_flat);
}

TEST_CASE("non-convergence is reported, not thrown") {
  const SpinModeParams m = narrow_mode();
  const SweepTrace t = noisy(m, optics_deg(45.0), realistic_noise(3));
  FitVector far = truth_of(m);
  far[index_of(FitParam::kOmegaS)] *= 1.05;
  far[index_of(FitParam::kGammaS)] *= 0.01;
  far[index_of(FitParam::kRateS)] *= 40.0;
  const FitResult r = fit(t, FitModelSpec::single_mode(), far);
  CHECK(r.chi2 > 0.0);
  if (!r.converged) CHECK_FALSE(r.status.empty());

  FitVector unstable = truth_of(m);
  unstable[index_of(FitParam::kGammaS)] = 0.0;
  CHECK_THROWS_AS(fit(t, FitModelSpec::single_mode(), unstable), InstabilityError);
}

TEST_CASE("batch fitting") {
  const std::vector<SpinModeParams> modes = {narrow_mode()};
  std::vector<SweepTrace> traces = generate_sweep(modes, optics_deg(45.0), default_grid(modes[0]),
                                                  realistic_noise(20), 6);
  traces[5].sigma_amp[0] = 0.0;
  const FitParam prof[] = {FitParam::kRateS};
  const std::vector<FitResult> par = fit_batch(traces, FitModelSpec::single_mode(), prof);
  const std::vector<FitResult> ser = fit_batch_reference(traces, FitModelSpec::single_mode(), prof);
  REQUIRE(par.size() == 6);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(par[i].converged);
    CHECK(par[i].params == ser[i].params);
    CHECK(par[i].intervals.count(FitParam::kRateS) == 1);
  }
  CHECK_FALSE(par[5].converged);
  CHECK(par[5].status.find("zero uncertainty") != std::string::npos);
}

TEST_CASE("quick readout rate") {
  SUBCASE("QND separation within 1% of sqrt(Gamma^2 + gamma^2)") {
    const SpinModeParams m = mode_hz(1e6, 1e3, 7e3, 0.0);
    const std::vector<SpinModeParams> modes = {m};
    const SweepTrace t = model_trace(modes, optics_deg(45.0), linear_grid(1e6, 5e4, 2001), realistic_noise(0));
    const QuickRate q = quick_readout_rate(t);
    CHECK(q.separation_hz == doctest::Approx(std::hypot(7e3, 1e3)).epsilon(0.01));
    CHECK(q.f_max_hz < 1e6);
    CHECK(q.f_min_hz > 1e6);
    CHECK(q.contrast == doctest::Approx(7.0 / std::hypot(7.0, 1.0)).epsilon(0.01));
    CHECK_FALSE(q.low_coupling);
  }
  SUBCASE("weak coupling is flagged") {
    const SpinModeParams m = mode_hz(1e6, 2e3, 1e3, 0.0);
    const std::vector<SpinModeParams> modes = {m};
    const QuickRate q =
        quick_readout_rate(model_trace(modes, optics_deg(45.0), linear_grid(1e6, 5e4, 2001), realistic_noise(0)));
    CHECK(q.low_coupling);
    CHECK(q.contrast == doctest::Approx(1.0 / std::hypot(1.0, 2.0)).epsilon(0.01));
  }
  SUBCASE("minimum tracks the readout rate") {
    const double gamma_hz = 1e3;
    double previous = 0.0;
    for (double rate_hz = 1.1e3; rate_hz <= 10.01e3; rate_hz += 0.9e3) {
      const SpinModeParams m = mode_hz(1e6, gamma_hz, rate_hz, 0.0);
      const std::vector<SpinModeParams> modes = {m};
      const QuickRate q =
          quick_readout_rate(model_trace(modes, optics_deg(45.0), linear_grid(1e6, 5e4, 4001), realistic_noise(0)));
      const double offset = q.f_min_hz - 1e6;
      CHECK(offset > previous);
      previous = offset;
      if (rate_hz / gamma_hz > 3.0) CHECK(offset / rate_hz == doctest::Approx(1.0).epsilon(0.1));
    }
  }
  SUBCASE("flat and monotonic traces") {
    const SpinModeParams m = mode_hz(1e6, 1e3, 0.0, 0.0);
    const std::vector<SpinModeParams> modes = {m};
    CHECK_THROWS_AS(quick_readout_rate(model_trace(modes, optics_deg(45.0), default_grid(m), realistic_noise(0))),
                    NoExtremumError);
    const SpinModeParams coupled = mode_hz(1e6, 1e3, 7e3, 0.0);
    const std::vector<SpinModeParams> cm = {coupled};
    CHECK_THROWS_AS(
        quick_readout_rate(model_trace(cm, optics_deg(45.0), linear_grid(1.2e6, 1e5, 101), realistic_noise(0))),
        NoExtremumError);
  }
}
