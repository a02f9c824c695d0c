#include "cifar/trace_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "cifar/errors.hpp"
#include "cifar/units.hpp"

namespace cifar {

namespace {

constexpr std::array<std::string_view, 5> kColumns = {"freq_hz", "amplitude", "phase_rad", "sigma_amp",
                                                      "sigma_phase"};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, std::string_view what, int line) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError("cannot parse " + std::string(what) + " value '" + std::string(field) + "'", line);
  }
  return value;
}

void parse_meta(std::string_view body, TraceMeta& meta, int line) {
  const auto eq = body.find('=');
  if (eq == std::string_view::npos) return;  // free-form comment
  const std::string_view key = trim(body.substr(0, eq));
  const std::string_view value = trim(body.substr(eq + 1));
  if (key == "G") {
    meta.drive_amplitude = parse_number<double>(value, key, line);
  } else if (key == "theta_deg") {
    meta.theta = deg_to_rad(parse_number<double>(value, key, line));
  } else if (key == "phi_deg") {
    meta.phi = deg_to_rad(parse_number<double>(value, key, line));
  } else if (key == "alpha_deg") {
    meta.alpha = deg_to_rad(parse_number<double>(value, key, line));
  } else if (key == "scans") {
    meta.scans = parse_number<int>(value, key, line);
    if (meta.scans < 1) throw ParseError("scans must be >= 1", line);
  } else if (key == "seed") {
    meta.seed = parse_number<std::uint64_t>(value, key, line);
  } else if (key == "sigma_floored") {
    meta.sigma_floored = parse_number<int>(value, key, line);
  } else {
    throw ParseError("unknown metadata key '" + std::string(key) + "'", line);
  }
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

SweepTrace parse_trace(std::string_view text) {
  SweepTrace trace;
  std::array<int, kColumns.size()> column_of{};
  bool have_header = false;
  std::size_t n_fields = 0;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      parse_meta(line.substr(1), trace.meta, line_no);
      continue;
    }
    const std::vector<std::string_view> fields = split(line, ',');
    if (!have_header) {
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        column_of[c] = -1;
        for (std::size_t f = 0; f < fields.size(); ++f) {
          if (fields[f] == kColumns[c]) column_of[c] = static_cast<int>(f);
        }
        if (column_of[c] < 0) throw ParseError("missing column '" + std::string(kColumns[c]) + "' in header", line_no);
      }
      n_fields = fields.size();
      have_header = true;
      continue;
    }
    if (fields.size() != n_fields) {
      throw ParseError("expected " + std::to_string(n_fields) + " fields, found " + std::to_string(fields.size()),
                       line_no);
    }
    std::array<double, kColumns.size()> v{};
    for (std::size_t c = 0; c < kColumns.size(); ++c) {
      v[c] = parse_number<double>(fields[static_cast<std::size_t>(column_of[c])], kColumns[c], line_no);
    }
    if (!trace.freqs_hz.empty() && !(v[0] > trace.freqs_hz.back())) {
      throw ParseError("frequencies must be strictly increasing", line_no);
    }
    trace.freqs_hz.push_back(v[0]);
    trace.amplitude.push_back(v[1]);
    trace.phase.push_back(v[2]);
    trace.sigma_amp.push_back(v[3]);
    trace.sigma_phase.push_back(v[4]);
  }
  if (!have_header) throw ParseError("missing header row '" + std::string(kTraceHeader) + "'");
  try {
    trace.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
  return trace;
}

SweepTrace read_trace(const std::filesystem::path& path) {
  try {
    return parse_trace(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string format_trace(const SweepTrace& trace) {
  std::ostringstream out;
  out << "# G=" << format_double(trace.meta.drive_amplitude) << '\n'
      << "# theta_deg=" << format_double(rad_to_deg(trace.meta.theta)) << '\n'
      << "# phi_deg=" << format_double(rad_to_deg(trace.meta.phi)) << '\n'
      << "# alpha_deg=" << format_double(rad_to_deg(trace.meta.alpha)) << '\n'
      << "# scans=" << trace.meta.scans << '\n'
      << "# seed=" << trace.meta.seed << '\n';
  if (trace.meta.sigma_floored > 0) out << "# sigma_floored=" << trace.meta.sigma_floored << '\n';
  out << kTraceHeader << '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << format_double(trace.freqs_hz[i]) << ',' << format_double(trace.amplitude[i]) << ','
        << format_double(trace.phase[i]) << ',' << format_double(trace.sigma_amp[i]) << ','
        << format_double(trace.sigma_phase[i]) << '\n';
  }
  return out.str();
}

void write_trace(const std::filesystem::path& path, const SweepTrace& trace) {
  write_file_atomic(path, format_trace(trace));
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("failed writing " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace cifar
