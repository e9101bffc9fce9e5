#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "purcellkit/constants.hpp"

namespace purcellkit {

// Loss channels compose as 1/Q = 1/Q_i + 1/Q_c + 1/Q_sc. An absent
// q_scatter means that channel contributes no loss (1/Q_sc = 0), which is
// how a device without a flake on top is represented.
struct ResonatorSpec {
  double center_wavelength = 0.0;         // nm
  double group_index_times_length = 0.0;  // n_g * L, nm
  double q_intrinsic = 0.0;
  double q_coupling = 0.0;
  std::optional<double> q_scatter{};
  double mode_volume = 0.0;  // in (lambda/n)^3 units
  double cavity_index = 1.0;
  double reference_resonance = 0.0;  // nm, anchors the comb
};

struct ResonanceComb {
  std::vector<double> centers;  // nm, ascending
  double fsr = 0.0;             // nm
  double linewidth_fwhm = 0.0;  // nm
  double q_loaded = 0.0;
};

namespace detail {
inline void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw std::domain_error(std::string(what) + " must be positive");
}
}  // namespace detail

inline double loaded_q(double q_intrinsic, double q_coupling,
                       std::optional<double> q_scatter = std::nullopt) {
  detail::require_positive(q_intrinsic, "loaded_q: q_intrinsic");
  detail::require_positive(q_coupling, "loaded_q: q_coupling");
  double inv = 1.0 / q_intrinsic + 1.0 / q_coupling;
  if (q_scatter) {
    detail::require_positive(*q_scatter, "loaded_q: q_scatter");
    inv += 1.0 / *q_scatter;
  }
  return 1.0 / inv;
}

inline double loaded_q(const ResonatorSpec& spec) {
  return loaded_q(spec.q_intrinsic, spec.q_coupling, spec.q_scatter);
}

inline double fsr(double wavelength, double group_index_times_length) {
  detail::require_positive(wavelength, "fsr: wavelength");
  detail::require_positive(group_index_times_length, "fsr: n_g * L");
  return wavelength * wavelength / group_index_times_length;
}

// Comb lines anchored at reference_resonance, spaced by the FSR evaluated at
// the center wavelength. Only lines inside [window_lo, window_hi] are kept.
inline ResonanceComb resonance_comb(const ResonatorSpec& spec, double window_lo,
                                    double window_hi) {
  if (!(window_lo < window_hi))
    throw std::domain_error("resonance_comb: window_lo must be below window_hi");
  ResonanceComb comb;
  comb.fsr = fsr(spec.center_wavelength, spec.group_index_times_length);
  comb.q_loaded = loaded_q(spec);
  comb.linewidth_fwhm = spec.center_wavelength / comb.q_loaded;
  const double eps = 1e-9 * comb.fsr;
  auto k_lo = static_cast<std::int64_t>(
      std::ceil((window_lo - spec.reference_resonance - eps) / comb.fsr));
  auto k_hi = static_cast<std::int64_t>(
      std::floor((window_hi - spec.reference_resonance + eps) / comb.fsr));
  for (std::int64_t k = k_lo; k <= k_hi; ++k)
    comb.centers.push_back(spec.reference_resonance +
                           static_cast<double>(k) * comb.fsr);
  return comb;
}

// All-pass transmission as a sum of Lorentzian dips. The on-resonance dip
// depth 4 (Q/Qc)(1 - Q/Qc) reaches 1 at critical coupling Q = Qc/2.
inline std::vector<double> transmission(const ResonanceComb& comb,
                                        double q_coupling,
                                        const std::vector<double>& wavelengths) {
  detail::require_positive(q_coupling, "transmission: q_coupling");
  detail::require_positive(comb.q_loaded, "transmission: q_loaded");
  detail::require_positive(comb.linewidth_fwhm, "transmission: linewidth");
  const double x = comb.q_loaded / q_coupling;
  const double depth = std::clamp(4.0 * x * (1.0 - x), 0.0, 1.0);
  std::vector<double> out;
  out.reserve(wavelengths.size());
  for (double lam : wavelengths) {
    double dip = 0.0;
    for (double center : comb.centers) {
      const double u = 2.0 * (lam - center) / comb.linewidth_fwhm;
      dip += depth / (1.0 + u * u);
    }
    out.push_back(std::clamp(1.0 - dip, 0.0, 1.0));
  }
  return out;
}

// Comb is built from the sampled window itself so narrow scans see a single
// line and broad scans see every line they cover.
inline std::vector<double> transmission(const ResonatorSpec& spec,
                                        const std::vector<double>& wavelengths) {
  if (wavelengths.empty()) return {};
  auto [lo, hi] = std::minmax_element(wavelengths.begin(), wavelengths.end());
  return transmission(resonance_comb(spec, *lo, *hi), spec.q_coupling, wavelengths);
}

// Empirical flake-scattering law Q_sc = A / t^p. Zero thickness means no
// flake, i.e. the scattering channel is absent.
inline std::optional<double> q_scatter_model(double thickness, double amplitude,
                                             double exponent) {
  detail::require_positive(amplitude, "q_scatter_model: amplitude");
  detail::require_positive(exponent, "q_scatter_model: exponent");
  if (thickness < 0.0)
    throw std::domain_error("q_scatter_model: thickness must be non-negative");
  if (thickness == 0.0) return std::nullopt;
  return amplitude / std::pow(thickness, exponent);
}

}  // namespace purcellkit
