#pragma once

// Fit reports in display units (Hz, degrees): a JSON document, a text table
// and a plot-ready data table.

#include <string>

#include "cifar/fit.hpp"
#include "cifar/trace.hpp"

namespace cifar {

/// Value of `p` in display units (rates in Hz, phase offset in degrees).
double to_display(FitParam p, double internal);
std::string display_unit(FitParam p);
/// Name used in reports, e.g. "Gamma_S_hz".
std::string display_name(FitParam p);

std::string report_json(const FitResult& result, const std::string& trace_name = {});
std::string report_text(const FitResult& result);

/// CSV columns: freq_hz, data and model amplitude/phase, and the weighted
/// amplitude and phase residuals.
std::string plot_table(const SweepTrace& trace, const FitResult& result, const FitModelSpec& spec);

}  // namespace cifar
