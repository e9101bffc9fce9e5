#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace purcellkit {

// Sampled intensity vs wavelength. When exposure > 0 the intensities are
// count rates and I * exposure is the photon count used for shot noise;
// exposure 0 means arbitrary units with no counting statistics attached.
struct Spectrum {
  std::vector<double> wavelength;  // nm, strictly ascending
  std::vector<double> intensity;
  std::string channel;
  double exposure = 0.0;
};

namespace detail {

struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = v - comp;
    const double s = sum + t;
    comp = (s - sum) - t;
    sum = s;
  }
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace detail

inline void validate(const Spectrum& s) {
  if (s.wavelength.size() != s.intensity.size())
    throw std::domain_error("spectrum: wavelength/intensity size mismatch");
  if (s.wavelength.size() < 2)
    throw std::domain_error("spectrum: needs at least two samples");
  for (std::size_t i = 0; i < s.wavelength.size(); ++i) {
    if (!std::isfinite(s.wavelength[i]) || !std::isfinite(s.intensity[i]))
      throw std::domain_error("spectrum: non-finite sample");
    if (i > 0 && !(s.wavelength[i] > s.wavelength[i - 1]))
      throw std::domain_error("spectrum: wavelengths must be strictly ascending");
  }
}

inline void write_spectrum_csv(const std::string& path, const Spectrum& s) {
  validate(s);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "# channel: " << (s.channel.empty() ? "unspecified" : s.channel) << "\n";
  out << "# exposure: " << detail::format_double(s.exposure) << "\n";
  out << "# units: wavelength nm, intensity arb\n";
  out << "wavelength_nm,intensity\n";
  for (std::size_t i = 0; i < s.wavelength.size(); ++i)
    out << detail::format_double(s.wavelength[i]) << ','
        << detail::format_double(s.intensity[i]) << '\n';
}

inline Spectrum read_spectrum_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open spectrum file: " + path);
  Spectrum s;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (line.back() == '\r') line.pop_back();
    if (line.front() == '#') {
      auto metadata = [&](const std::string& key) -> std::string {
        const std::string tag = "# " + key + ":";
        if (line.rfind(tag, 0) == 0) {
          std::string v = line.substr(tag.size());
          const auto b = v.find_first_not_of(' ');
          return b == std::string::npos ? std::string() : v.substr(b);
        }
        return {};
      };
      if (auto v = metadata("channel"); !v.empty()) s.channel = v;
      if (auto v = metadata("exposure"); !v.empty()) s.exposure = std::stod(v);
      continue;
    }
    if (!header_seen && line.find_first_not_of("-+.0123456789eE, \t") !=
                            std::string::npos) {
      header_seen = true;  // column header row
      continue;
    }
    std::istringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected two comma-separated columns");
    try {
      s.wavelength.push_back(std::stod(a));
      s.intensity.push_back(std::stod(b));
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": not a number");
    }
  }
  validate(s);
  return s;
}

// Linear interpolation onto an arbitrary grid inside the sampled range.
inline std::vector<double> resample_linear(const Spectrum& s,
                                           const std::vector<double>& grid) {
  validate(s);
  std::vector<double> out;
  out.reserve(grid.size());
  for (double x : grid) {
    if (x < s.wavelength.front() || x > s.wavelength.back())
      throw std::domain_error("resample_linear: grid point outside spectrum");
    auto it = std::upper_bound(s.wavelength.begin(), s.wavelength.end(), x);
    if (it == s.wavelength.begin()) {
      out.push_back(s.intensity.front());
      continue;
    }
    if (it == s.wavelength.end()) {
      out.push_back(s.intensity.back());
      continue;
    }
    const auto hi = static_cast<std::size_t>(it - s.wavelength.begin());
    const auto lo = hi - 1;
    const double t =
        (x - s.wavelength[lo]) / (s.wavelength[hi] - s.wavelength[lo]);
    out.push_back(s.intensity[lo] + t * (s.intensity[hi] - s.intensity[lo]));
  }
  return out;
}

// Overlapping range of two spectra sampled at the finer of the two steps.
inline std::vector<double> common_grid(const Spectrum& a, const Spectrum& b) {
  validate(a);
  validate(b);
  const double lo = std::max(a.wavelength.front(), b.wavelength.front());
  const double hi = std::min(a.wavelength.back(), b.wavelength.back());
  if (!(lo < hi))
    throw std::domain_error("common_grid: wavelength ranges do not overlap");
  auto mean_step = [](const Spectrum& s) {
    return (s.wavelength.back() - s.wavelength.front()) /
           static_cast<double>(s.wavelength.size() - 1);
  };
  const double step = std::min(mean_step(a), mean_step(b));
  auto n = static_cast<std::size_t>(std::floor((hi - lo) / step)) + 1;
  n = std::min<std::size_t>(n, 4'000'000);
  if (n < 2) n = 2;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return grid;
}

}  // namespace purcellkit
