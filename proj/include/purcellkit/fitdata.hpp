#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "purcellkit/levmar.hpp"
#include "purcellkit/resonator.hpp"
#include "purcellkit/spectrum.hpp"

namespace purcellkit {

namespace detail {

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

// Rolling median, window clipped at the edges. Slow but robust; spectra are
// a few thousand points at most.
inline std::vector<double> rolling_median(const std::vector<double>& y,
                                          std::size_t window) {
  const std::size_t n = y.size();
  std::vector<double> out(n);
  std::vector<double> scratch;
  const std::size_t half = window / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i > half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    scratch.assign(y.begin() + static_cast<std::ptrdiff_t>(lo),
                   y.begin() + static_cast<std::ptrdiff_t>(hi));
    const auto mid = scratch.begin() + static_cast<std::ptrdiff_t>(scratch.size() / 2);
    std::nth_element(scratch.begin(), mid, scratch.end());
    out[i] = *mid;
  }
  return out;
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return nan();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace detail

struct CombLine {
  double center = 0.0;
  double fwhm = 0.0;
  double q = 0.0;
  double amplitude = 0.0;  // signed, negative for dips
  double center_sigma = 0.0;
  double fwhm_sigma = 0.0;
  bool converged = false;
};

struct CombFitOptions {
  double prominence_fraction = 0.25;  // of the strongest line
};

struct CombFit {
  std::vector<CombLine> lines;
  double fsr = detail::nan();
  double fsr_sigma = detail::nan();
  double q_loaded = detail::nan();  // median of the per-line values
  bool dips = false;
  double residual_rms = 0.0;
  std::vector<std::string> warnings;
};

// Locates comb lines against a rolling-median baseline, then fits each one
// as a Lorentzian on a local linear background. Works for transmission dips
// on a flat baseline and for emission lines riding a broad envelope.
inline CombFit fit_comb(const Spectrum& s, const CombFitOptions& opt = {}) {
  validate(s);
  if (opt.prominence_fraction <= 0.0 || opt.prominence_fraction >= 1.0)
    throw std::invalid_argument("fit_comb: prominence_fraction must be in (0, 1)");
  const auto& x = s.wavelength;
  const auto& y = s.intensity;
  const std::size_t n = y.size();

  CombFit fit;
  std::size_t window = std::clamp<std::size_t>(n / 6, 15, 1501);
  if (window % 2 == 0) ++window;
  const std::vector<double> base = detail::rolling_median(y, window);

  double up = 0.0, down = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    up = std::max(up, y[i] - base[i]);
    down = std::max(down, base[i] - y[i]);
  }
  fit.dips = down > up;
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) dev[i] = fit.dips ? base[i] - y[i] : y[i] - base[i];
  const double dmax = fit.dips ? down : up;

  std::vector<double> steps(n > 1 ? n - 1 : 0);
  for (std::size_t i = 0; i + 1 < n; ++i) steps[i] = std::abs(y[i + 1] - y[i]);
  const double noise = 1.4826 * detail::median_of(steps) / std::numbers::sqrt2;
  if (!(dmax > 0.0) || (noise > 0.0 && dmax < 5.0 * noise)) {
    fit.warnings.push_back("no lines found above the noise floor");
    return fit;
  }

  const double threshold = opt.prominence_fraction * dmax;
  std::vector<std::size_t> seeds;
  for (std::size_t i = 0; i < n;) {
    if (dev[i] <= threshold) {
      ++i;
      continue;
    }
    std::size_t j = i, peak = i;
    while (j < n && dev[j] > threshold) {
      if (dev[j] > dev[peak]) peak = j;
      ++j;
    }
    if (j - i >= 3) seeds.push_back(peak);
    i = j;
  }
  if (seeds.empty()) {
    fit.warnings.push_back("no lines found above the noise floor");
    return fit;
  }

  auto half_width = [&](std::size_t seed) {
    const double half = dev[seed] / 2.0;
    std::size_t l = seed, r = seed;
    while (l > 0 && dev[l] > half) --l;
    while (r + 1 < n && dev[r] > half) ++r;
    return std::max({x[r] - x[seed], x[seed] - x[l],
                     x[std::min(seed + 1, n - 1)] - x[seed]});
  };
  std::vector<double> hws;
  for (std::size_t seed : seeds) hws.push_back(half_width(seed));

  // Noise can split one line into adjacent runs; keep the stronger seed when
  // two sit within each other's width.
  for (std::size_t k = 1; k < seeds.size();) {
    if (x[seeds[k]] - x[seeds[k - 1]] < 0.75 * (hws[k - 1] + hws[k])) {
      const std::size_t drop = dev[seeds[k]] >= dev[seeds[k - 1]] ? k - 1 : k;
      seeds.erase(seeds.begin() + static_cast<std::ptrdiff_t>(drop));
      hws.erase(hws.begin() + static_cast<std::ptrdiff_t>(drop));
    } else {
      ++k;
    }
  }

  struct Window {
    std::size_t seed = 0, ilo = 0, ihi = 0;
    double c0 = 0.0;
    bool usable = false;
  };
  std::vector<Window> windows(seeds.size());
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const std::size_t seed = seeds[k];
    double wlo = x[seed] - 4.0 * hws[k];
    double whi = x[seed] + 4.0 * hws[k];
    if (k > 0) wlo = std::max(wlo, 0.5 * (x[seeds[k - 1]] + x[seed]));
    if (k + 1 < seeds.size()) whi = std::min(whi, 0.5 * (x[seed] + x[seeds[k + 1]]));
    Window& win = windows[k];
    win.seed = seed;
    win.c0 = x[seed];
    win.ilo = static_cast<std::size_t>(std::lower_bound(x.begin(), x.end(), wlo) -
                                       x.begin());
    win.ihi = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), whi) -
                                       x.begin());
    win.usable = win.ihi - win.ilo >= 8;
    if (!win.usable)
      fit.warnings.push_back("line near " + std::to_string(x[seed]) +
                             " nm skipped: too few points");
  }

  // Pass one fits every line against the local data; pass two subtracts the
  // other lines' fitted profiles first, which removes the tail bias that a
  // local background cannot absorb.
  const double sign = fit.dips ? -1.0 : 1.0;
  std::vector<Eigen::VectorXd> solutions(seeds.size());
  std::vector<LevMarOutcome> outcomes(seeds.size());
  double rss = 0.0;
  std::size_t npts = 0;
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      const Window& win = windows[k];
      if (!win.usable) continue;

      std::vector<double> yy(y.begin() + static_cast<std::ptrdiff_t>(win.ilo),
                             y.begin() + static_cast<std::ptrdiff_t>(win.ihi));
      if (pass > 0) {
        for (std::size_t j = 0; j < seeds.size(); ++j) {
          if (j == k || !windows[j].usable || solutions[j].size() == 0) continue;
          const double amp = solutions[j][3], c = solutions[j][4],
                       w = solutions[j][5];
          for (std::size_t i = 0; i < yy.size(); ++i) {
            const double u = 2.0 * (x[win.ilo + i] - c) / w;
            yy[i] -= amp / (1.0 + u * u);
          }
        }
      }

      Eigen::VectorXd p0(6);
      if (pass == 0 || solutions[k].size() == 0)
        p0 << base[win.seed], 0.0, 0.0, sign * dev[win.seed], win.c0,
            2.0 * hws[k];
      else
        p0 = solutions[k];

      // Quadratic local background soaks up envelope curvature inside the
      // window.
      auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& res,
                       Eigen::MatrixXd& jac) {
        const auto npt = static_cast<Eigen::Index>(yy.size());
        res.resize(npt);
        jac.resize(npt, 6);
        const double a = p[0], b = p[1], b2 = p[2], amp = p[3], c = p[4],
                     w = p[5];
        for (Eigen::Index i = 0; i < npt; ++i) {
          const double xi = x[win.ilo + static_cast<std::size_t>(i)];
          const double dx = xi - win.c0;
          const double u = 2.0 * (xi - c) / w;
          const double lor = 1.0 / (1.0 + u * u);
          res[i] = a + b * dx + b2 * dx * dx + amp * lor -
                   yy[static_cast<std::size_t>(i)];
          jac(i, 0) = 1.0;
          jac(i, 1) = dx;
          jac(i, 2) = dx * dx;
          jac(i, 3) = lor;
          jac(i, 4) = amp * lor * lor * 4.0 * u / w;
          jac(i, 5) = amp * lor * lor * 2.0 * u * u / w;
        }
      };

      outcomes[k] = levmar(model, p0);
      solutions[k] = outcomes[k].params;
      if (pass == 1) {
        rss += outcomes[k].cost;
        npts += yy.size();
      }
    }
  }

  for (std::size_t k = 0; k < seeds.size(); ++k) {
    if (!windows[k].usable) continue;
    const auto& out = outcomes[k];
    CombLine line;
    line.center = out.params[4];
    line.fwhm = std::abs(out.params[5]);
    line.q = line.center / line.fwhm;
    line.amplitude = out.params[3];
    line.center_sigma = out.sigmas[4];
    line.fwhm_sigma = out.sigmas[5];
    line.converged = out.converged;
    if (!out.converged)
      fit.warnings.push_back("line near " + std::to_string(windows[k].c0) +
                             " nm did not converge");
    fit.lines.push_back(line);
  }

  std::sort(fit.lines.begin(), fit.lines.end(),
            [](const CombLine& a, const CombLine& b) { return a.center < b.center; });
  fit.residual_rms = npts > 0 ? std::sqrt(rss / static_cast<double>(npts)) : 0.0;

  if (fit.lines.size() >= 2) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < fit.lines.size(); ++i)
      gaps.push_back(fit.lines[i].center - fit.lines[i - 1].center);
    double mean = 0.0;
    for (double g : gaps) mean += g;
    mean /= static_cast<double>(gaps.size());
    fit.fsr = mean;
    if (gaps.size() >= 2) {
      double var = 0.0;
      for (double g : gaps) var += (g - mean) * (g - mean);
      var /= static_cast<double>(gaps.size() - 1);
      fit.fsr_sigma = std::sqrt(var / static_cast<double>(gaps.size()));
    }
  } else {
    fit.warnings.push_back("fewer than two lines: free spectral range unavailable");
  }

  std::vector<double> qs;
  for (const auto& l : fit.lines) qs.push_back(l.q);
  fit.q_loaded = detail::median_of(qs);
  return fit;
}

struct G2Fit {
  double baseline = 0.0;
  double g0 = 0.0;
  double tau1 = 0.0;
  double baseline_sigma = 0.0;
  double g0_sigma = 0.0;
  double tau1_sigma = 0.0;
  double residual_rms = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

// Antibunching dip B (1 - (1 - g0) exp(-|tau|/tau1)).
inline G2Fit fit_g2(const std::vector<double>& tau,
                    const std::vector<double>& counts) {
  if (tau.size() != counts.size())
    throw std::invalid_argument("fit_g2: tau and counts differ in length");
  if (tau.size() < 5)
    throw std::invalid_argument("fit_g2: need at least five points");
  for (double v : counts)
    if (!std::isfinite(v)) throw std::invalid_argument("fit_g2: non-finite counts");

  G2Fit fit;
  double span = 0.0;
  for (double t : tau) span = std::max(span, std::abs(t));
  if (!(span > 0.0)) throw std::invalid_argument("fit_g2: zero delay span");

  const auto [mn, mx] = std::minmax_element(counts.begin(), counts.end());
  if (*mx - *mn <= 1e-12 * std::max(1.0, std::abs(*mx))) {
    double mean = 0.0;
    for (double v : counts) mean += v;
    fit.baseline = mean / static_cast<double>(counts.size());
    fit.g0 = 1.0;
    fit.tau1 = detail::nan();
    fit.converged = true;
    fit.warnings.push_back("flat correlation trace: no dip to fit");
    return fit;
  }

  double tail = 0.0;
  std::size_t ntail = 0;
  std::size_t imin = 0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (std::abs(tau[i]) >= 0.7 * span) {
      tail += counts[i];
      ++ntail;
    }
    if (std::abs(tau[i]) < std::abs(tau[imin])) imin = i;
  }
  const double b0 = ntail > 0
                        ? tail / static_cast<double>(ntail)
                        : *mx;
  const double g00 = std::clamp(counts[imin] / std::max(b0, 1e-300), 0.0, 2.0);
  double tau10 = span / 5.0;
  const double dev0 = std::abs(counts[imin] - b0);
  std::vector<std::size_t> order(tau.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(tau[a]) < std::abs(tau[b]);
  });
  if (dev0 > 0.0)
    for (std::size_t i : order)
      if (std::abs(counts[i] - b0) <= dev0 / std::numbers::e &&
          std::abs(tau[i]) > 0.0) {
        tau10 = std::abs(tau[i]);
        break;
      }

  Eigen::VectorXd p0(3);
  p0 << b0, g00, tau10;
  auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& res,
                   Eigen::MatrixXd& jac) {
    const auto npt = static_cast<Eigen::Index>(tau.size());
    res.resize(npt);
    jac.resize(npt, 3);
    const double b = p[0], g0 = p[1], t1 = p[2];
    for (Eigen::Index i = 0; i < npt; ++i) {
      const double at = std::abs(tau[static_cast<std::size_t>(i)]);
      const double e = std::exp(-at / t1);
      res[i] = b * (1.0 - (1.0 - g0) * e) - counts[static_cast<std::size_t>(i)];
      jac(i, 0) = 1.0 - (1.0 - g0) * e;
      jac(i, 1) = b * e;
      jac(i, 2) = -b * (1.0 - g0) * e * at / (t1 * t1);
    }
  };

  const auto out = levmar(model, p0);
  fit.baseline = out.params[0];
  fit.g0 = out.params[1];
  fit.tau1 = out.params[2];
  fit.baseline_sigma = out.sigmas[0];
  fit.g0_sigma = out.sigmas[1];
  fit.tau1_sigma = out.sigmas[2];
  fit.residual_rms = out.residual_rms;
  fit.iterations = out.iterations;
  fit.converged = out.converged;
  if (fit.g0 < 0.0 || fit.g0 > 1.5)
    fit.warnings.push_back("fitted zero-delay value is unphysical");
  if (span < 5.0 * fit.tau1)
    fit.warnings.push_back("delay window shorter than five recovery times");
  return fit;
}

struct ThicknessPoint {
  double thickness = 0.0;  // nm, zero means no flake
  double q_loaded = 0.0;
};

struct ThicknessFit {
  double amplitude = 0.0;  // Q_sc = amplitude / t^exponent
  double exponent = 0.0;
  double amplitude_sigma = 0.0;
  double exponent_sigma = 0.0;
  double residual_rms = 0.0;
  bool converged = false;
  std::vector<std::string> warnings;
};

// Fits the scattering-loss law through the loaded-Q composition, using the
// flake-free budget for the other two channels. Internally parameterized as
// (log amplitude, exponent) to keep the scale linear for the solver.
inline ThicknessFit fit_q_vs_thickness(const std::vector<ThicknessPoint>& pts,
                                       double q_intrinsic, double q_coupling) {
  detail::require_positive(q_intrinsic, "fit_q_vs_thickness: q_intrinsic");
  detail::require_positive(q_coupling, "fit_q_vs_thickness: q_coupling");
  std::vector<double> distinct;
  for (const auto& pt : pts) {
    if (pt.thickness < 0.0 || !(pt.q_loaded > 0.0))
      throw std::invalid_argument(
          "fit_q_vs_thickness: thickness must be >= 0 and q_loaded > 0");
    if (pt.thickness > 0.0) distinct.push_back(pt.thickness);
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3)
    throw std::invalid_argument(
        "fit_q_vs_thickness: need at least three distinct flake thicknesses");

  const double base_inv = 1.0 / q_intrinsic + 1.0 / q_coupling;

  ThicknessFit fit;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t m = 0;
  for (const auto& pt : pts) {
    if (pt.thickness <= 0.0) continue;
    const double inv_sc = 1.0 / pt.q_loaded - base_inv;
    if (inv_sc <= 0.0) continue;
    const double lx = std::log(pt.thickness);
    const double ly = -std::log(inv_sc);  // log q_sc
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  double log_a0 = std::log(1e5), p_exp0 = 2.0;
  const double det = static_cast<double>(m) * sxx - sx * sx;
  if (m >= 2 && std::abs(det) > 1e-12) {
    const double slope = (static_cast<double>(m) * sxy - sx * sy) / det;
    const double intercept = (sy - slope * sx) / static_cast<double>(m);
    log_a0 = intercept;
    p_exp0 = -slope;
  } else {
    fit.warnings.push_back("initialization fell back to defaults");
  }

  Eigen::VectorXd p0(2);
  p0 << log_a0, p_exp0;
  auto model = [&](const Eigen::VectorXd& p, Eigen::VectorXd& res,
                   Eigen::MatrixXd& jac) {
    const auto npt = static_cast<Eigen::Index>(pts.size());
    res.resize(npt);
    jac.resize(npt, 2);
    const double inv_a = std::exp(-p[0]);
    for (Eigen::Index i = 0; i < npt; ++i) {
      const auto& pt = pts[static_cast<std::size_t>(i)];
      if (pt.thickness > 0.0) {
        const double tp = std::pow(pt.thickness, p[1]);
        const double q = 1.0 / (base_inv + tp * inv_a);
        res[i] = q - pt.q_loaded;
        jac(i, 0) = q * q * tp * inv_a;
        jac(i, 1) = -q * q * tp * inv_a * std::log(pt.thickness);
      } else {
        res[i] = 1.0 / base_inv - pt.q_loaded;
        jac(i, 0) = 0.0;
        jac(i, 1) = 0.0;
      }
    }
  };

  const auto out = levmar(model, p0);
  fit.amplitude = std::exp(out.params[0]);
  fit.exponent = out.params[1];
  fit.amplitude_sigma = fit.amplitude * out.sigmas[0];
  fit.exponent_sigma = out.sigmas[1];
  fit.residual_rms = out.residual_rms;
  fit.converged = out.converged;
  return fit;
}

}  // namespace purcellkit
