#include "cifar/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cifar/config.hpp"
#include "cifar/errors.hpp"
#include "cifar/fit.hpp"
#include "cifar/report.hpp"
#include "cifar/sweep.hpp"
#include "cifar/time_domain.hpp"
#include "cifar/trace_io.hpp"

namespace cifar {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

/// Maps an exception to its exit code and prints the diagnostic.
int report_error(std::ostream& err, const std::exception& e) {
  err << "error: " << e.what() << '\n';
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ZeroSigmaError*>(&e) ||
      dynamic_cast<const GridMismatchError*>(&e) || dynamic_cast<const InsufficientDataError*>(&e) ||
      dynamic_cast<const std::invalid_argument*>(&e)) {
    return kExitInputError;
  }
  if (dynamic_cast<const InstabilityError*>(&e) || dynamic_cast<const PoleProximityError*>(&e)) return kExitUnstable;
  if (dynamic_cast<const NoExtremumError*>(&e)) return kExitNoExtremum;
  return kExitFailure;
}

std::vector<fs::path> trace_inputs(const fs::path& path) {
  if (!fs::is_directory(path)) {
    if (!fs::exists(path)) throw ParseError("no such file: " + path.string());
    return {path};
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ParseError("no .csv traces in " + path.string());
  return files;
}

std::uint64_t resolve_seed(const RunConfig& cfg, const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (cfg.noise_seed_set) return cfg.noise.seed;
  if (const char* env = std::getenv("CIFAR_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ParseError(std::string("CIFAR_SEED is not an integer: '") + env + "'");
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string output;
  int scans = 3;
  std::optional<std::uint64_t> seed;
  bool wide = false;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  RunConfig cfg = load_config(a.config);
  if (cfg.modes.empty()) throw ParseError(a.config + ": missing 'modes' section");
  for (const auto& m : cfg.modes) m.validate();
  cfg.noise.seed = resolve_seed(cfg, a.seed);
  const std::vector<double> grid = cfg.make_grid(a.wide);
  const std::vector<SweepTrace> scans = generate_sweep(cfg.modes, cfg.optics, grid, cfg.noise, a.scans);
  const SweepTrace avg = average_traces(scans);

  fs::create_directories(a.output);
  for (std::size_t s = 0; s < scans.size(); ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "scan_%03zu.csv", s + 1);
    const fs::path path = fs::path(a.output) / name;
    write_trace(path, scans[s]);
    out << "wrote " << path.string() << '\n';
  }
  const fs::path avg_path = fs::path(a.output) / "average.csv";
  write_trace(avg_path, avg);
  out << "wrote " << avg_path.string() << " (" << scans.size() << " scans, seed " << cfg.noise.seed << ", "
      << grid.size() << " points)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string trace;
  std::string config;
  std::vector<std::string> profile;
  std::string report;
  std::string table;
};

struct FileFit {
  fs::path path;
  FitResult result;
  std::vector<std::string> warnings;
  int code = kExitOk;
  std::string error;
};

FileFit fit_file(const fs::path& path, const RunConfig& cfg, const std::vector<FitParam>& profile) {
  FileFit f;
  f.path = path;
  try {
    const SweepTrace trace = read_trace(path);
    const bool all_given =
        std::all_of(cfg.initial.begin(), cfg.initial.end(), [](const auto& v) { return v.has_value(); });
    const FitVector start = merge_initial(cfg, all_given ? FitVector{} : initial_guess(trace, cfg.fit));
    f.result = fit(trace, cfg.fit, start);
    for (FitParam p : profile) {
      try {
        profile_interval(trace, cfg.fit, f.result, p);
      } catch (const NotBracketedError& e) {
        f.warnings.push_back(std::string(param_name(p)) + ": interval not bracketed (" + e.what() + ")");
      }
    }
    if (!f.result.converged) f.code = kExitNotConverged;
  } catch (const std::exception& e) {
    std::ostringstream sink;
    f.code = report_error(sink, e);
    f.error = e.what();
  }
  return f;
}

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(a.config);
  std::vector<FitParam> profile;
  for (const auto& name : a.profile) {
    const FitParam p = param_from_name(name);
    if (!cfg.fit.free[index_of(p)]) throw std::invalid_argument("cannot profile frozen parameter " + name);
    profile.push_back(p);
  }
  const std::vector<fs::path> files = trace_inputs(a.trace);
  std::vector<FileFit> fits(files.size());
  const auto n = static_cast<std::ptrdiff_t>(files.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    fits[static_cast<std::size_t>(i)] = fit_file(files[static_cast<std::size_t>(i)], cfg, profile);
  }

  int code = kExitOk;
  for (const auto& f : fits) {
    if (f.code == kExitOk) continue;
    // The most specific failure wins; non-convergence ranks below errors.
    if (code == kExitOk || code == kExitNotConverged) code = f.code;
  }

  if (files.size() == 1) {
    const FileFit& f = fits.front();
    if (!f.error.empty()) {
      err << "error: " << f.error << '\n';
      return f.code;
    }
    out << report_text(f.result);
    for (const auto& w : f.warnings) err << "warning: " << w << '\n';
    if (!a.report.empty()) write_file_atomic(a.report, report_json(f.result, f.path.string()));
    if (!a.table.empty()) {
      write_file_atomic(a.table, plot_table(read_trace(f.path), f.result, cfg.fit));
    }
    if (!f.result.converged) err << "warning: fit did not converge: " << f.result.status << '\n';
    return code;
  }

  // Batch summary: one row per file.
  out << "file,converged,reduced_chi2";
  for (std::size_t k = 0; k < kFitParamCount; ++k) {
    const auto p = static_cast<FitParam>(k);
    if (cfg.fit.n_modes == 1 && (p == FitParam::kRateBB || p == FitParam::kGammaBB)) continue;
    out << ',' << display_name(p);
  }
  out << '\n';
  nlohmann::ordered_json batch = nlohmann::ordered_json::array();
  for (const auto& f : fits) {
    out << f.path.filename().string();
    if (!f.error.empty()) {
      out << ",error," << f.error << '\n';
      err << "error: " << f.path.string() << ": " << f.error << '\n';
      continue;
    }
    out << ',' << (f.result.converged ? "yes" : "no") << ',' << fmt("%.6g", f.result.reduced_chi2);
    for (std::size_t k = 0; k < kFitParamCount; ++k) {
      const auto p = static_cast<FitParam>(k);
      if (cfg.fit.n_modes == 1 && (p == FitParam::kRateBB || p == FitParam::kGammaBB)) continue;
      out << ',' << fmt("%.10g", to_display(p, f.result.params[k]));
    }
    out << '\n';
    for (const auto& w : f.warnings) err << "warning: " << f.path.string() << ": " << w << '\n';
    batch.push_back(nlohmann::ordered_json::parse(report_json(f.result, f.path.string())));
  }
  if (!a.report.empty()) write_file_atomic(a.report, batch.dump(2) + "\n");
  return code;
}

// ---------------------------------------------------------------------------

int cmd_quickrate(const std::string& input, std::ostream& out, std::ostream& err) {
  const std::vector<fs::path> files = trace_inputs(input);
  if (files.size() == 1) {
    const QuickRate q = quick_readout_rate(read_trace(files.front()));
    out << "readout_rate_estimate_hz = " << fmt("%.8g", q.separation_hz) << '\n'
        << "f_max_hz = " << fmt("%.10g", q.f_max_hz) << '\n'
        << "f_min_hz = " << fmt("%.10g", q.f_min_hz) << '\n'
        << "contrast = " << fmt("%.6g", q.contrast) << '\n';
    if (q.low_coupling) {
      err << "warning: low coupling (Gamma_S < gamma_S); the separation is dominated by the damping\n";
    }
    return kExitOk;
  }
  int code = kExitOk;
  out << "file,readout_rate_estimate_hz,f_max_hz,f_min_hz,contrast,low_coupling\n";
  for (const auto& path : files) {
    out << path.filename().string();
    try {
      const QuickRate q = quick_readout_rate(read_trace(path));
      out << ',' << fmt("%.8g", q.separation_hz) << ',' << fmt("%.10g", q.f_max_hz) << ','
          << fmt("%.10g", q.f_min_hz) << ',' << fmt("%.6g", q.contrast) << ',' << (q.low_coupling ? "yes" : "no")
          << '\n';
    } catch (const std::exception& e) {
      out << ",error,,,,\n";
      const int c = report_error(err, e);
      if (code == kExitOk) code = c;
    }
  }
  return code;
}

// ---------------------------------------------------------------------------

int cmd_weights(double detuning_ghz, double alpha_deg, std::ostream& out) {
  const PolarizabilityWeights w = polarizability_weights(hz_to_angular(detuning_ghz * 1e9));
  const double zeta = tensor_coupling(deg_to_rad(alpha_deg), w);
  out << "a0 = " << fmt("%.6g", w.a0) << '\n'
      << "a1 = " << fmt("%.6g", w.a1) << '\n'
      << "a2 = " << fmt("%.6g", w.a2) << '\n'
      << "zeta_S = " << fmt("%.6g", zeta == 0.0 ? 0.0 : zeta) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_oracle_check(const std::string& config, int points, std::ostream& out) {
  const RunConfig cfg = load_config(config);
  if (cfg.modes.empty()) throw ParseError(config + ": missing 'modes' section");
  for (const auto& m : cfg.modes) m.validate();
  const std::vector<double> full = cfg.make_grid();
  std::vector<double> grid;
  for (int i = 0; i < points; ++i) {
    grid.push_back(full[static_cast<std::size_t>(i) * (full.size() - 1) / static_cast<std::size_t>(points - 1)]);
  }
  const SweepTrace td = steady_state_sweep(cfg.modes, cfg.optics, grid);
  double worst_amp = 0.0, worst_phase = 0.0;
  out << "freq_hz,model_amplitude,oracle_amplitude,rel_amp_error,phase_error_rad\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ComplexResponse m = multimode_response(hz_to_angular(grid[i]), cfg.modes, cfg.optics);
    const double rel = std::abs(td.amplitude[i] - m.amplitude()) / std::max(m.amplitude(), 1e-300);
    const double dphi = std::abs(wrap_phase(td.phase[i] - m.phase()));
    worst_amp = std::max(worst_amp, rel);
    worst_phase = std::max(worst_phase, dphi);
    out << fmt("%.10g", grid[i]) << ',' << fmt("%.10g", m.amplitude()) << ',' << fmt("%.10g", td.amplitude[i]) << ','
        << fmt("%.3e", rel) << ',' << fmt("%.3e", dphi) << '\n';
  }
  const bool ok = worst_amp < 1e-4 && worst_phase < 1e-4;
  out << "max relative amplitude error " << fmt("%.3e", worst_amp) << ", max phase error " << fmt("%.3e", worst_phase)
      << " rad: " << (ok ? "agree" : "DISAGREE") << '\n';
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Model, simulate and fit coherently induced Faraday rotation sweeps", "cifar"};
  app.require_subcommand(1);

  SimulateArgs sim;
  std::uint64_t seed_value = 0;
  auto* simulate = app.add_subcommand("simulate", "Generate noisy sweeps and their average from a config");
  simulate->add_option("config", sim.config, "YAML configuration")->required();
  simulate->add_option("-o,--output", sim.output, "Output directory")->required();
  simulate->add_option("--scans", sim.scans, "Number of scans")->check(CLI::PositiveNumber);
  auto* seed_opt = simulate->add_option("--seed", seed_value, "Noise seed (default: config, then CIFAR_SEED)");
  simulate->add_flag("--wide", sim.wide, "Use the broadband +/-300 kHz grid");

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a trace (or every .csv in a directory)");
  fit_cmd->add_option("trace", fa.trace, "Trace file or directory")->required();
  fit_cmd->add_option("config", fa.config, "YAML fit specification")->required();
  fit_cmd->add_option("--profile", fa.profile, "Parameters to profile (Delta chi2 = 1)");
  fit_cmd->add_option("--report", fa.report, "JSON report path");
  fit_cmd->add_option("--table", fa.table, "Plot data table path (single trace)");

  std::string quick_input;
  auto* quick = app.add_subcommand("quickrate", "Readout rate from the max/min separation");
  quick->add_option("trace", quick_input, "Trace file or directory")->required();

  double detuning_ghz = 3.0, alpha_deg = 0.0;
  auto* weights = app.add_subcommand("weights", "Polarizability weights and tensor coupling");
  weights->add_option("--detuning-ghz", detuning_ghz, "Laser detuning (GHz)")->required();
  weights->add_option("--alpha-deg", alpha_deg, "Polarization angle (deg)");

  std::string oracle_config;
  int oracle_points = 9;
  auto* oracle = app.add_subcommand("oracle-check", "Compare the time-domain oracle with the model");
  oracle->add_option("config", oracle_config, "YAML configuration")->required();
  oracle->add_option("--points", oracle_points, "Number of grid points checked")->check(CLI::Range(2, 10001));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }

  try {
    if (*simulate) {
      if (seed_opt->count() > 0) sim.seed = seed_value;
      return cmd_simulate(sim, out);
    }
    if (*fit_cmd) return cmd_fit(fa, out, err);
    if (*quick) return cmd_quickrate(quick_input, out, err);
    if (*weights) return cmd_weights(detuning_ghz, alpha_deg, out);
    if (*oracle) return cmd_oracle_check(oracle_config, oracle_points, out);
  } catch (const std::exception& e) {
    return report_error(err, e);
  }
  return kExitFailure;
}

}  // namespace cifar
