#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "purcellkit/constants.hpp"
#include "purcellkit/resonator.hpp"

namespace purcellkit {

struct EmitterSpec {
  double zpl_wavelength = 0.0;      // nm
  double zpl_fwhm = 0.0;            // nm
  double radiative_lifetime = 0.0;  // ns
  double quantum_efficiency = 1.0;  // (0, 1]
  double dipole_azimuth = 0.0;      // rad, in-plane angle to the mode field
  std::string label;
};

inline void validate(const EmitterSpec& e) {
  detail::require_positive(e.zpl_wavelength, "emitter: zpl_wavelength");
  detail::require_positive(e.zpl_fwhm, "emitter: zpl_fwhm");
  detail::require_positive(e.radiative_lifetime, "emitter: radiative_lifetime");
  if (!(e.quantum_efficiency > 0.0) || e.quantum_efficiency > 1.0)
    throw std::domain_error("emitter: quantum_efficiency must be in (0, 1]");
}

// Fourier-limited linewidth of a lifetime-broadened line,
// d_lambda = lambda^2 / (2 pi c tau).
inline double lifetime_limited_fwhm(double radiative_lifetime, double wavelength) {
  detail::require_positive(radiative_lifetime, "lifetime_limited_fwhm: lifetime");
  detail::require_positive(wavelength, "lifetime_limited_fwhm: wavelength");
  return wavelength * wavelength /
         (2.0 * std::numbers::pi * c_nm_per_ns * radiative_lifetime);
}

inline double emitter_q(const EmitterSpec& e) {
  validate(e);
  return e.zpl_wavelength / e.zpl_fwhm;
}

// Energy decay rates in rad/ns (equal to 1/ns numerically).
inline double radiative_rate(const EmitterSpec& e) {
  validate(e);
  return 1.0 / e.radiative_lifetime;
}

inline double nonradiative_rate(const EmitterSpec& e) {
  return radiative_rate(e) * (1.0 / e.quantum_efficiency - 1.0);
}

inline const std::vector<std::string>& emitter_preset_names() {
  static const std::vector<std::string> names = {
      "hbn_rt", "hbn_cryo", "wse2", "mote2_1100", "mote2_1500"};
  return names;
}

// Reference emitters. Linewidths follow the narrowest value each material
// supports: hbn_rt keeps its broad room-temperature ZPL, wse2 carries the
// 100 ueV homogeneous width, and the cryogenic entries are lifetime-limited.
inline EmitterSpec emitter_preset(std::string_view name) {
  EmitterSpec e;
  if (name == "hbn_rt") {
    e = {610.0, 7.2, 1.2, 0.87, 0.0, "hbn_rt"};
  } else if (name == "hbn_cryo") {
    e = {610.0, lifetime_limited_fwhm(1.2, 610.0), 1.2, 0.87, 0.0, "hbn_cryo"};
  } else if (name == "wse2") {
    constexpr double fwhm_ev = 100e-6;
    e = {750.0, 750.0 * 750.0 * fwhm_ev / hc_ev_nm, 4.0, 0.05, 0.0, "wse2"};
  } else if (name == "mote2_1100") {
    e = {1100.0, lifetime_limited_fwhm(22.2, 1100.0), 22.2, 0.07, 0.0, "mote2_1100"};
  } else if (name == "mote2_1500") {
    e = {1500.0, lifetime_limited_fwhm(1000.0, 1500.0), 1000.0, 0.86, 0.0,
         "mote2_1500"};
  } else {
    throw std::invalid_argument("unknown emitter preset: " + std::string(name));
  }
  return e;
}

// Unit-area Lorentzian ZPL lineshape, peak value 2/(pi * fwhm).
inline std::vector<double> zpl_spectrum(const EmitterSpec& e,
                                        const std::vector<double>& wavelengths) {
  validate(e);
  const double half = 0.5 * e.zpl_fwhm;
  const double norm = half / std::numbers::pi;
  std::vector<double> out;
  out.reserve(wavelengths.size());
  for (double lam : wavelengths) {
    const double d = lam - e.zpl_wavelength;
    out.push_back(norm / (d * d + half * half));
  }
  return out;
}

}  // namespace purcellkit
