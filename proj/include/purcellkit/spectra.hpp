#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "purcellkit/coupling.hpp"
#include "purcellkit/emitter.hpp"
#include "purcellkit/resonator.hpp"
#include "purcellkit/spectrum.hpp"

namespace purcellkit {

struct PathEff {
  double value = 1.0;
  double sigma = 0.0;
};

// Collection chain of the two detection paths: the free-space signal passes
// objective and top path, the waveguide signal passes bus extraction, chip
// facet and side path.
struct PathEfficiencies {
  PathEff eta_out;
  PathEff eta_facet;
  PathEff eta_side;
  PathEff eta_objective;
  PathEff eta_top;
};

inline void validate(const PathEfficiencies& e) {
  for (const auto* p :
       {&e.eta_out, &e.eta_facet, &e.eta_side, &e.eta_objective, &e.eta_top}) {
    if (!(p->value > 0.0) || p->value > 1.0)
      throw std::domain_error("path efficiency values must be in (0, 1]");
    if (p->sigma < 0.0)
      throw std::domain_error("path efficiency sigmas must be non-negative");
  }
}

// Forward model of the two detection channels. The ZPL envelope S(lambda) is
// split energy-conservingly: a fraction beta_s(lambda) = F(lambda)/(1+F(lambda))
// feeds the cavity and leaves via the waveguide (times eta_out), the rest
// radiates to free space. F(lambda) is the ratio-level Purcell factor times a
// unit-peak Lorentzian comb.
struct SpectralModel {
  EmitterSpec emitter;
  ResonanceComb comb;
  double f_spectral = 0.0;
  double eta_out = 0.0;
};

inline double comb_profile(const ResonanceComb& comb, double lam) {
  double sum = 0.0;
  for (double c : comb.centers) {
    const double u = 2.0 * (lam - c) / comb.linewidth_fwhm;
    sum += 1.0 / (1.0 + u * u);
  }
  return sum;
}

inline SpectralModel spectral_model(const CoupledSystem& sys, double window_lo,
                                    double window_hi) {
  validate(sys.emitter);
  SpectralModel m;
  m.emitter = sys.emitter;
  ResonatorSpec anchored = sys.resonator;
  anchored.reference_resonance = sys.emitter.zpl_wavelength - sys.detuning;
  m.comb = resonance_comb(anchored, window_lo, window_hi);
  m.f_spectral =
      purcell_good(m.comb.q_loaded, sys.resonator.mode_volume) * sys.overlap_factor;
  m.eta_out = eta_out(m.comb.q_loaded, sys.resonator.q_coupling, sys.directions);
  return m;
}

// Returns {free-space channel, waveguide channel}.
inline std::pair<Spectrum, Spectrum> synthesize_spectra(
    const SpectralModel& m, const std::vector<double>& grid) {
  if (m.f_spectral < 0.0)
    throw std::domain_error("synthesize_spectra: f_spectral must be non-negative");
  if (!(m.eta_out > 0.0) || m.eta_out > 1.0)
    throw std::domain_error("synthesize_spectra: eta_out must be in (0, 1]");
  if (m.comb.centers.empty())
    throw std::domain_error("synthesize_spectra: comb has no lines in window");
  Spectrum fs, wg;
  fs.wavelength = grid;
  wg.wavelength = grid;
  fs.channel = "free_space";
  wg.channel = "waveguide";
  const auto zpl = zpl_spectrum(m.emitter, grid);
  fs.intensity.reserve(grid.size());
  wg.intensity.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double f = m.f_spectral * comb_profile(m.comb, grid[i]);
    const double beta = f / (1.0 + f);
    fs.intensity.push_back(zpl[i] * (1.0 - beta));
    wg.intensity.push_back(zpl[i] * beta * m.eta_out);
  }
  validate(fs);
  validate(wg);
  return {std::move(fs), std::move(wg)};
}

struct SpectralPurcellResult {
  double f_s_peak = 0.0;
  double f_s_peak_sigma = 0.0;
  double beta_s_peak = 0.0;
  double beta_s_peak_sigma = 0.0;
  double beta_integrated = 0.0;
  double zpl_center = 0.0;   // nm
  double comb_line = 0.0;    // nm, line nearest the ZPL center
  double detuning = 0.0;     // nm, zpl_center - comb_line
  std::vector<double> grid;
  std::vector<double> f_s;     // NaN where excluded
  std::vector<double> beta_s;  // NaN where excluded
  std::size_t excluded = 0;
  std::vector<std::string> warnings;
};

namespace detail {

// Parabolic vertex through three uniformly spaced samples around index i.
struct Vertex {
  double x;
  double y;
};

inline Vertex refine_peak(const std::vector<double>& x,
                          const std::vector<double>& y, std::size_t i) {
  if (i == 0 || i + 1 >= x.size()) return {x[i], y[i]};
  const double denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
  if (!(denom < 0.0)) return {x[i], y[i]};
  const double delta = 0.5 * (y[i - 1] - y[i + 1]) / denom;
  const double h = 0.5 * (x[i + 1] - x[i - 1]);
  const double yv = y[i] - 0.25 * (y[i - 1] - y[i + 1]) * delta;
  return {x[i] + delta * h, yv};
}

}  // namespace detail

// Pointwise spectral Purcell factor from a top-collected free-space spectrum
// and a side-collected waveguide spectrum:
//   F_s(lambda) = (eta_ob eta_top)/(eta_out eta_facet eta_side) I_wg/I_fs.
// The simultaneous-scaling invariance of the ratio removes the source
// brightness; path-efficiency uncertainties and optional shot noise
// propagate to first order.
inline SpectralPurcellResult extract_spectral_purcell(
    const Spectrum& free_space, const Spectrum& waveguide,
    const PathEfficiencies& eff) {
  validate(eff);
  SpectralPurcellResult r;
  r.grid = common_grid(free_space, waveguide);
  const auto i_fs = resample_linear(free_space, r.grid);
  const auto i_wg = resample_linear(waveguide, r.grid);
  const double k = (eff.eta_objective.value * eff.eta_top.value) /
                   (eff.eta_out.value * eff.eta_facet.value * eff.eta_side.value);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  double max_fs = 0.0;
  for (double v : i_fs) max_fs = std::max(max_fs, v);
  if (!(max_fs > 0.0))
    throw std::domain_error(
        "extract_spectral_purcell: free-space channel is empty");
  const double floor = 1e-9 * max_fs;

  r.f_s.resize(r.grid.size(), nan);
  r.beta_s.resize(r.grid.size(), nan);
  std::vector<double> s_rec(r.grid.size(), nan);  // reconstructed ZPL envelope
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    if (!(i_fs[i] > floor)) {
      ++r.excluded;
      continue;
    }
    const double f = k * i_wg[i] / i_fs[i];
    r.f_s[i] = f;
    r.beta_s[i] = f / (1.0 + f);
    s_rec[i] = i_fs[i] * (1.0 + f);
  }
  if (r.excluded > 0)
    r.warnings.push_back("excluded " + std::to_string(r.excluded) +
                         " points with vanishing free-space intensity");

  // ZPL center: highest point of the reconstructed envelope
  std::size_t zpl_idx = 0;
  double zpl_best = -1.0;
  for (std::size_t i = 0; i < s_rec.size(); ++i) {
    if (std::isnan(s_rec[i])) continue;
    if (s_rec[i] > zpl_best) {
      zpl_best = s_rec[i];
      zpl_idx = i;
    }
  }
  r.zpl_center = detail::refine_peak(r.grid, s_rec, zpl_idx).x;

  // comb lines: local maxima of F_s
  double f_max = -1.0;
  for (double v : r.f_s)
    if (!std::isnan(v)) f_max = std::max(f_max, v);
  if (!(f_max > 0.0))
    throw std::domain_error(
        "extract_spectral_purcell: no usable waveguide signal");
  const double line_threshold = 0.25 * f_max;
  double best_dist = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i = 1; i + 1 < r.f_s.size(); ++i) {
    if (std::isnan(r.f_s[i - 1]) || std::isnan(r.f_s[i]) || std::isnan(r.f_s[i + 1]))
      continue;
    if (r.f_s[i] < line_threshold) continue;
    if (!(r.f_s[i] >= r.f_s[i - 1] && r.f_s[i] > r.f_s[i + 1])) continue;
    auto v = detail::refine_peak(r.grid, r.f_s, i);
    const double dist = std::abs(v.x - r.zpl_center);
    if (dist < best_dist) {
      best_dist = dist;
      r.comb_line = v.x;
      r.f_s_peak = v.y;
      found = true;
    }
  }
  if (!found) {
    // monotone or single-sided data: fall back to the global maximum
    for (std::size_t i = 0; i < r.f_s.size(); ++i) {
      if (!std::isnan(r.f_s[i]) && r.f_s[i] == f_max) {
        auto v = detail::refine_peak(r.grid, r.f_s, i);
        r.comb_line = v.x;
        r.f_s_peak = v.y;
        break;
      }
    }
    r.warnings.push_back("no interior comb line found; used global maximum");
  }
  r.detuning = r.zpl_center - r.comb_line;
  r.beta_s_peak = r.f_s_peak / (1.0 + r.f_s_peak);

  // spectrally weighted beta across the whole line
  detail::KahanSum num, den;
  for (std::size_t i = 0; i + 1 < r.grid.size(); ++i) {
    if (std::isnan(s_rec[i]) || std::isnan(s_rec[i + 1])) continue;
    const double h = r.grid[i + 1] - r.grid[i];
    num.add(0.5 * (r.beta_s[i] * s_rec[i] + r.beta_s[i + 1] * s_rec[i + 1]) * h);
    den.add(0.5 * (s_rec[i] + s_rec[i + 1]) * h);
  }
  if (!(den.sum > 0.0))
    throw std::domain_error("extract_spectral_purcell: empty integration range");
  r.beta_integrated = num.sum / den.sum;

  // first-order uncertainty: relative path-efficiency terms plus Poisson
  // shot noise where counts are available
  double rel2 = 0.0;
  for (const auto* p : {&eff.eta_out, &eff.eta_facet, &eff.eta_side,
                        &eff.eta_objective, &eff.eta_top}) {
    const double rel = p->sigma / p->value;
    rel2 += rel * rel;
  }
  auto shot = [&](const Spectrum& s, const std::vector<double>& resampled) {
    if (!(s.exposure > 0.0)) return 0.0;
    std::size_t i = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < r.grid.size(); ++j) {
      const double d = std::abs(r.grid[j] - r.comb_line);
      if (d < best) {
        best = d;
        i = j;
      }
    }
    const double counts = resampled[i] * s.exposure;
    return counts > 0.0 ? 1.0 / counts : 0.0;
  };
  rel2 += shot(waveguide, i_wg) + shot(free_space, i_fs);
  r.f_s_peak_sigma = r.f_s_peak * std::sqrt(rel2);
  const double dbeta = 1.0 / ((1.0 + r.f_s_peak) * (1.0 + r.f_s_peak));
  r.beta_s_peak_sigma = r.f_s_peak_sigma * dbeta;
  return r;
}

struct PurityResult {
  double g2_corrected = 0.0;
  bool clamped = false;
};

// Removes uncorrelated background from a measured g2(0) given the signal
// fraction rho: g2_corr = (g2 - (1 - rho^2)) / rho^2, clamped at zero.
inline PurityResult background_corrected_purity(double g2_zero, double rho) {
  if (!(rho > 0.0) || rho > 1.0)
    throw std::domain_error("background_corrected_purity: rho must be in (0, 1]");
  if (g2_zero < 0.0)
    throw std::domain_error("background_corrected_purity: g2 must be non-negative");
  const double corrected = (g2_zero - (1.0 - rho * rho)) / (rho * rho);
  if (corrected < 0.0) return {0.0, true};
  return {corrected, false};
}

}  // namespace purcellkit
