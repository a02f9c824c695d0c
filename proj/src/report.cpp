#include "cifar/report.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "cifar/trace_io.hpp"

namespace cifar {

double to_display(FitParam p, double internal) {
  if (is_rate(p)) return angular_to_hz(internal);
  if (p == FitParam::kPhaseOffset) return rad_to_deg(internal);
  return internal;
}

std::string display_unit(FitParam p) {
  if (is_rate(p)) return "Hz";
  if (p == FitParam::kPhaseOffset) return "deg";
  return "";
}

std::string display_name(FitParam p) {
  std::string name(param_name(p));
  if (is_rate(p)) return name + "_hz";
  if (p == FitParam::kPhaseOffset) return name + "_deg";
  return name;
}

std::string report_json(const FitResult& result, const std::string& trace_name) {
  nlohmann::ordered_json doc;
  if (!trace_name.empty()) doc["trace"] = trace_name;
  doc["converged"] = result.converged;
  doc["status"] = result.status;
  doc["iterations"] = result.iterations;
  doc["n_modes"] = result.n_modes;
  doc["chi2"] = result.chi2;
  doc["dof"] = result.dof;
  doc["reduced_chi2"] = result.reduced_chi2;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < kFitParamCount; ++k) {
    const auto p = static_cast<FitParam>(k);
    if (result.n_modes == 1 && (p == FitParam::kRateBB || p == FitParam::kGammaBB)) continue;
    nlohmann::ordered_json entry;
    entry["value"] = to_display(p, result.params[k]);
    entry["unit"] = display_unit(p);
    entry["free"] = result.free[k];
    if (result.free[k]) entry["std_error"] = std::abs(to_display(p, result.std_errors[k]));
    if (auto it = result.intervals.find(p); it != result.intervals.end()) {
      entry["lo"] = to_display(p, it->second.lo);
      entry["best"] = to_display(p, result.params[k]);
      entry["hi"] = to_display(p, it->second.hi);
    }
    params[std::string(param_name(p))] = entry;
  }
  doc["parameters"] = params;
  return doc.dump(2) + "\n";
}

std::string report_text(const FitResult& result) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %16s %12s %16s %16s  %s\n", "parameter", "value", "std_err", "lo", "hi",
                "unit");
  out << line;
  for (std::size_t k = 0; k < kFitParamCount; ++k) {
    const auto p = static_cast<FitParam>(k);
    if (result.n_modes == 1 && (p == FitParam::kRateBB || p == FitParam::kGammaBB)) continue;
    const std::string unit = display_unit(p);
    std::string err = "fixed", lo = "-", hi = "-";
    if (result.free[k]) {
      std::snprintf(line, sizeof line, "%.4g", std::abs(to_display(p, result.std_errors[k])));
      err = line;
    }
    if (auto it = result.intervals.find(p); it != result.intervals.end()) {
      std::snprintf(line, sizeof line, "%.8g", to_display(p, it->second.lo));
      lo = line;
      std::snprintf(line, sizeof line, "%.8g", to_display(p, it->second.hi));
      hi = line;
    }
    std::snprintf(line, sizeof line, "%-14s %16.10g %12s %16s %16s  %s\n", std::string(param_name(p)).c_str(),
                  to_display(p, result.params[k]), err.c_str(), lo.c_str(), hi.c_str(), unit.c_str());
    out << line;
  }
  std::snprintf(line, sizeof line, "chi2 = %.6g  dof = %d  reduced chi2 = %.6g  iterations = %d  %s (%s)\n",
                result.chi2, result.dof, result.reduced_chi2, result.iterations,
                result.converged ? "converged" : "NOT CONVERGED", result.status.c_str());
  out << line;
  return out.str();
}

std::string plot_table(const SweepTrace& trace, const FitResult& result, const FitModelSpec& spec) {
  const std::vector<Complex> model = model_values(result.params, result.n_modes, trace);
  std::ostringstream out;
  out << "freq_hz,data_amplitude,data_phase_rad,model_amplitude,model_phase_rad,residual_amplitude,residual_phase\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double ma = std::abs(model[i]);
    const double mp = std::arg(model[i]);
    double ra = trace.amplitude[i] - ma;
    double rp = wrap_phase(trace.phase[i] - mp);
    if (spec.domain == ResidualDomain::kAmplitudePhase) {
      ra = trace.sigma_amp[i] > 0.0 ? ra / trace.sigma_amp[i] : 0.0;
      rp = trace.sigma_phase[i] > 0.0 ? rp / trace.sigma_phase[i] : 0.0;
    }
    out << format_double(trace.freqs_hz[i]) << ',' << format_double(trace.amplitude[i]) << ','
        << format_double(trace.phase[i]) << ',' << format_double(ma) << ',' << format_double(mp) << ','
        << format_double(ra) << ',' << format_double(rp) << '\n';
  }
  return out.str();
}

}  // namespace cifar
