#pragma once

#include <numbers>

// Unit conventions used throughout: wavelengths in nm, times in ns,
// rates in rad/ns. Quality factors, efficiencies and Purcell factors are
// dimensionless; mode volumes are given in (lambda/n)^3 units.

namespace purcellkit {

inline constexpr double c_nm_per_ns = 2.99792458e8;
inline constexpr double hc_ev_nm = 1239.8419843320026;

// 3/(4 pi^2), the prefactor of F = (3/4pi^2) (lambda/n)^3 Q/V
inline constexpr double purcell_prefactor =
    3.0 / (4.0 * std::numbers::pi * std::numbers::pi);

inline constexpr double deg_to_rad = std::numbers::pi / 180.0;

}  // namespace purcellkit
