#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "purcellkit/constants.hpp"
#include "purcellkit/emitter.hpp"
#include "purcellkit/resonator.hpp"

namespace purcellkit {

enum class Collection { one, both };

struct CoupledSystem {
  ResonatorSpec resonator;
  EmitterSpec emitter;
  double detuning = 0.0;        // nm, ZPL peak minus nearest comb line
  double overlap_factor = 1.0;  // [0, 1], spatial and polarization overlap
  Collection directions = Collection::both;
};

struct EfficiencyBreakdown {
  double q_loaded = 0.0;
  double purcell = 0.0;            // ideal-emitter Purcell factor of the mode
  double purcell_spectral = 0.0;   // overlap-weighted value a ratio measurement sees
  double purcell_effective = 0.0;  // rate enhancement incl. spectral mismatch
  double beta_channel = 0.0;       // cavity share of the total decay
  double beta_spectral = 0.0;      // beta at the comb line, from purcell_spectral
  double eta_out = 0.0;            // bus extraction Q/Qc, halved for one direction
  double eta_total = 0.0;          // beta_channel * eta_out
  double eta_spectral = 0.0;       // quantum_efficiency * beta_spectral * eta_out
  std::string regime;              // "good-emitter" or "bad-emitter"
};

// F = (3/4pi^2) Q / V with V in (lambda/n)^3 units.
inline double purcell_good(double q, double mode_volume) {
  detail::require_positive(q, "purcell_good: q");
  detail::require_positive(mode_volume, "purcell_good: mode_volume");
  return purcell_prefactor * q / mode_volume;
}

inline double beta_of(double f) {
  if (f < 0.0) throw std::domain_error("beta_of: f must be non-negative");
  return f / (1.0 + f);
}

// Smooth interpolation between the good-emitter limit (factor -> 1 when the
// emitter is much narrower than the cavity) and the bad-emitter limit
// (factor -> kappa/gamma = Q_e/Q when the emitter dominates the linewidth).
// The detuning penalty uses the combined cavity + emitter FWHM.
inline double purcell_effective(double f, double q_loaded, double q_emitter,
                                double overlap, double detuning,
                                double cavity_linewidth) {
  if (f < 0.0) throw std::domain_error("purcell_effective: f must be non-negative");
  detail::require_positive(q_loaded, "purcell_effective: q_loaded");
  detail::require_positive(q_emitter, "purcell_effective: q_emitter");
  detail::require_positive(cavity_linewidth, "purcell_effective: cavity_linewidth");
  if (overlap < 0.0 || overlap > 1.0)
    throw std::domain_error("purcell_effective: overlap must be in [0, 1]");
  const double spectral = q_emitter / (q_emitter + q_loaded);
  const double emitter_linewidth = cavity_linewidth * q_loaded / q_emitter;
  const double combined = cavity_linewidth + emitter_linewidth;
  const double u = 2.0 * detuning / combined;
  return f * overlap * spectral / (1.0 + u * u);
}

inline double eta_out(double q_loaded, double q_coupling, Collection directions) {
  detail::require_positive(q_loaded, "eta_out: q_loaded");
  detail::require_positive(q_coupling, "eta_out: q_coupling");
  if (q_loaded > q_coupling)
    throw std::domain_error("eta_out: q_loaded cannot exceed q_coupling");
  const double eta = q_loaded / q_coupling;
  return directions == Collection::one ? 0.5 * eta : eta;
}

// Full chain: loaded Q -> Purcell factor -> effective rate enhancement ->
// branching fraction beta_ch = F_eff G_r / ((1+F_eff) G_r + G_nr) ->
// eta = beta_ch * eta_out. The spectral companions describe what a
// cavity/free-space intensity ratio measures at the comb line; that ratio
// carries no kappa/(kappa+gamma) factor and no detuning penalty because the
// ZPL envelope cancels pointwise.
inline EfficiencyBreakdown total_efficiency(const CoupledSystem& sys) {
  validate(sys.emitter);
  if (sys.overlap_factor < 0.0 || sys.overlap_factor > 1.0)
    throw std::domain_error("total_efficiency: overlap_factor must be in [0, 1]");
  EfficiencyBreakdown b;
  b.q_loaded = loaded_q(sys.resonator);
  b.purcell = purcell_good(b.q_loaded, sys.resonator.mode_volume);
  const double qe = emitter_q(sys.emitter);
  const double cavity_linewidth = sys.emitter.zpl_wavelength / b.q_loaded;
  b.purcell_effective =
      purcell_effective(b.purcell, b.q_loaded, qe, sys.overlap_factor,
                        sys.detuning, cavity_linewidth);
  b.purcell_spectral = b.purcell * sys.overlap_factor;
  b.beta_spectral = beta_of(b.purcell_spectral);
  const double nr_ratio = 1.0 / sys.emitter.quantum_efficiency - 1.0;
  b.beta_channel = b.purcell_effective / (1.0 + b.purcell_effective + nr_ratio);
  b.eta_out = eta_out(b.q_loaded, sys.resonator.q_coupling, sys.directions);
  b.eta_total = b.beta_channel * b.eta_out;
  b.eta_spectral = sys.emitter.quantum_efficiency * b.beta_spectral * b.eta_out;
  b.regime = qe >= b.q_loaded ? "good-emitter" : "bad-emitter";
  return b;
}

struct OverlapStats {
  double mean = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;
};

// E[exp(-2 r^2/w^2)] * E[cos^2 theta] for per-axis N(0, sigma^2) transverse
// offsets and N(0, sigma_theta^2) polarization error.
inline double misalignment_overlap_closed_form(double position_sigma,
                                               double angle_sigma, double waist) {
  detail::require_positive(waist, "misalignment_overlap: waist");
  if (position_sigma < 0.0 || angle_sigma < 0.0)
    throw std::domain_error("misalignment_overlap: sigmas must be non-negative");
  const double radial =
      1.0 / (1.0 + 4.0 * position_sigma * position_sigma / (waist * waist));
  const double angular = 0.5 * (1.0 + std::exp(-2.0 * angle_sigma * angle_sigma));
  return radial * angular;
}

// Monte Carlo over placement and dipole-angle error; angle in radians.
inline OverlapStats misalignment_overlap(double position_sigma, double angle_sigma,
                                         double waist, std::size_t samples,
                                         std::uint64_t seed) {
  detail::require_positive(waist, "misalignment_overlap: waist");
  if (position_sigma < 0.0 || angle_sigma < 0.0)
    throw std::domain_error("misalignment_overlap: sigmas must be non-negative");
  if (samples == 0)
    throw std::domain_error("misalignment_overlap: samples must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> values(samples);
  double sum = 0.0, comp = 0.0;
  for (auto& v : values) {
    const double x = position_sigma * unit(rng);
    const double y = position_sigma * unit(rng);
    const double theta = angle_sigma * unit(rng);
    const double ct = std::cos(theta);
    v = std::exp(-2.0 * (x * x + y * y) / (waist * waist)) * ct * ct;
    const double t = v - comp;
    const double s = sum + t;
    comp = (s - sum) - t;
    sum = s;
  }
  std::sort(values.begin(), values.end());
  auto rank = [&](double p) {
    auto idx = static_cast<std::size_t>(
        std::clamp(std::ceil(p * static_cast<double>(samples)) - 1.0, 0.0,
                   static_cast<double>(samples - 1)));
    return values[idx];
  };
  return {sum / static_cast<double>(samples), rank(0.05), rank(0.95)};
}

}  // namespace purcellkit
