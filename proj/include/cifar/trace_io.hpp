#pragma once

// Trace files: comma-separated text with a fixed header row and '#'
// metadata lines. Angles are stored in degrees, frequencies in Hz.
//
//   # G=0.8
//   # theta_deg=45
//   freq_hz,amplitude,phase_rad,sigma_amp,sigma_phase
//   999000,1.02,0.013,0.001,0.001

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "cifar/trace.hpp"

namespace cifar {

inline constexpr std::string_view kTraceHeader = "freq_hz,amplitude,phase_rad,sigma_amp,sigma_phase";

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

/// Parses a trace document. Throws ParseError with the offending line for
/// malformed rows, missing columns or invalid metadata.
SweepTrace parse_trace(std::string_view text);
SweepTrace read_trace(const std::filesystem::path& path);

std::string format_trace(const SweepTrace& trace);
void write_trace(const std::filesystem::path& path, const SweepTrace& trace);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace cifar
