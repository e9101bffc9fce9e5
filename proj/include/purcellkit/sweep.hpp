#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "purcellkit/coupling.hpp"
#include "purcellkit/spectrum.hpp"

namespace purcellkit {

struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

struct SweepRow {
  std::vector<double> coords;
  EfficiencyBreakdown metrics;
  bool ok = false;
  std::string note;
};

struct SweepResult {
  std::vector<std::string> axis_names;
  std::vector<SweepRow> rows;
  std::size_t invalid = 0;
};

inline const std::vector<std::string>& sweep_axis_names() {
  static const std::vector<std::string> names = {
      "q_loaded", "q_intrinsic", "q_coupling", "mode_volume", "overlap",
      "detuning"};
  return names;
}

// q_loaded back-solves the coupling Q against the rest of the loss budget
// and fails when the request exceeds what intrinsic + scattering allow.
inline void apply_axis(CoupledSystem& sys, const std::string& name,
                       double value) {
  if (name == "q_loaded") {
    detail::require_positive(value, "apply_axis: q_loaded");
    double inv_rest = 1.0 / sys.resonator.q_intrinsic;
    if (sys.resonator.q_scatter) inv_rest += 1.0 / *sys.resonator.q_scatter;
    const double inv_c = 1.0 / value - inv_rest;
    if (inv_c <= 0.0)
      throw std::domain_error(
          "apply_axis: q_loaded exceeds the intrinsic + scattering budget");
    sys.resonator.q_coupling = 1.0 / inv_c;
  } else if (name == "q_intrinsic") {
    detail::require_positive(value, "apply_axis: q_intrinsic");
    sys.resonator.q_intrinsic = value;
  } else if (name == "q_coupling") {
    detail::require_positive(value, "apply_axis: q_coupling");
    sys.resonator.q_coupling = value;
  } else if (name == "mode_volume") {
    detail::require_positive(value, "apply_axis: mode_volume");
    sys.resonator.mode_volume = value;
  } else if (name == "overlap") {
    if (value < 0.0 || value > 1.0)
      throw std::domain_error("apply_axis: overlap must be in [0, 1]");
    sys.overlap_factor = value;
  } else if (name == "detuning") {
    if (!std::isfinite(value))
      throw std::domain_error("apply_axis: detuning must be finite");
    sys.detuning = value;
  } else {
    throw std::invalid_argument("apply_axis: unknown axis '" + name + "'");
  }
}

// Cartesian grid over the axes, last axis fastest. Points whose settings are
// inconsistent come back flagged instead of aborting the sweep.
inline SweepResult run_sweep(const CoupledSystem& base,
                             const std::vector<SweepAxis>& axes) {
  if (axes.empty()) throw std::invalid_argument("run_sweep: no axes");
  for (const auto& ax : axes) {
    if (ax.values.empty())
      throw std::invalid_argument("run_sweep: axis '" + ax.name +
                                  "' has no values");
    if (std::find(sweep_axis_names().begin(), sweep_axis_names().end(),
                  ax.name) == sweep_axis_names().end())
      throw std::invalid_argument("run_sweep: unknown axis '" + ax.name + "'");
  }

  SweepResult result;
  for (const auto& ax : axes) result.axis_names.push_back(ax.name);

  std::size_t total = 1;
  for (const auto& ax : axes) total *= ax.values.size();

  std::vector<std::size_t> idx(axes.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    SweepRow row;
    row.coords.resize(axes.size());
    for (std::size_t a = 0; a < axes.size(); ++a)
      row.coords[a] = axes[a].values[idx[a]];
    try {
      CoupledSystem sys = base;
      for (std::size_t a = 0; a < axes.size(); ++a)
        apply_axis(sys, axes[a].name, row.coords[a]);
      row.metrics = total_efficiency(sys);
      row.ok = true;
    } catch (const std::domain_error& e) {
      row.ok = false;
      row.note = e.what();
      ++result.invalid;
    }
    result.rows.push_back(std::move(row));
    for (std::size_t a = axes.size(); a-- > 0;) {
      if (++idx[a] < axes[a].values.size()) break;
      idx[a] = 0;
    }
  }
  return result;
}

inline void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_sweep_csv: cannot open " + path);
  for (const auto& name : sweep.axis_names) out << name << ',';
  out << "q_loaded,purcell,purcell_spectral,purcell_effective,beta_channel,"
         "beta_spectral,eta_out,eta_total,eta_spectral,regime,ok,note\n";
  for (const auto& row : sweep.rows) {
    for (double c : row.coords) out << detail::format_double(c) << ',';
    const auto& m = row.metrics;
    if (row.ok) {
      out << detail::format_double(m.q_loaded) << ','
          << detail::format_double(m.purcell) << ','
          << detail::format_double(m.purcell_spectral) << ','
          << detail::format_double(m.purcell_effective) << ','
          << detail::format_double(m.beta_channel) << ','
          << detail::format_double(m.beta_spectral) << ','
          << detail::format_double(m.eta_out) << ','
          << detail::format_double(m.eta_total) << ','
          << detail::format_double(m.eta_spectral) << ',' << m.regime;
    } else {
      out << ",,,,,,,,,";
    }
    std::string note = row.note;
    std::replace(note.begin(), note.end(), ',', ';');
    out << ',' << (row.ok ? "1" : "0") << ',' << note << '\n';
  }
  if (!out) throw std::runtime_error("write_sweep_csv: write failed");
}

struct QcOptimum {
  double q_coupling = 0.0;
  double eta = 0.0;
  EfficiencyBreakdown best;
  bool unimodal = true;
  int evaluations = 0;
  std::vector<std::string> warnings;
};

// Coupling-Q design point that maximizes the total efficiency. A log-spaced
// prescan checks the curve is single-peaked and brackets the maximum, then a
// golden-section refinement narrows it to 1e-4 relative.
inline QcOptimum optimize_q_coupling(const CoupledSystem& base, double qc_lo,
                                     double qc_hi) {
  detail::require_positive(qc_lo, "optimize_q_coupling: qc_lo");
  if (qc_hi <= qc_lo)
    throw std::invalid_argument("optimize_q_coupling: need qc_lo < qc_hi");

  QcOptimum opt;
  auto eval = [&](double qc) {
    CoupledSystem sys = base;
    sys.resonator.q_coupling = qc;
    ++opt.evaluations;
    return total_efficiency(sys);
  };

  const int n = 101;
  const double t_lo = std::log(qc_lo), t_hi = std::log(qc_hi);
  std::vector<double> ts(n), etas(n);
  for (int i = 0; i < n; ++i) {
    ts[i] = t_lo + (t_hi - t_lo) * static_cast<double>(i) /
                       static_cast<double>(n - 1);
    etas[i] = eval(std::exp(ts[i])).eta_total;
  }

  int best = 0;
  for (int i = 1; i < n; ++i)
    if (etas[i] > etas[best]) best = i;

  int transitions = 0, dir = 0;
  for (int i = 1; i < n; ++i) {
    const double d = etas[i] - etas[i - 1];
    const int s = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    if (s == 0) continue;
    if (dir != 0 && s != dir) ++transitions;
    dir = s;
  }
  opt.unimodal = transitions <= 1;
  if (!opt.unimodal)
    opt.warnings.push_back(
        "efficiency is not single-peaked over the scan; refined around the "
        "best prescan point");
  if (best == 0 || best == n - 1)
    opt.warnings.push_back("optimum sits at the edge of the coupling-Q range");

  double a = ts[std::max(0, best - 1)];
  double b = ts[std::min(n - 1, best + 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = eval(std::exp(x1)).eta_total;
  double f2 = eval(std::exp(x2)).eta_total;
  while (b - a > 1e-4) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = eval(std::exp(x2)).eta_total;
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = eval(std::exp(x1)).eta_total;
    }
  }
  const double t_best = f1 > f2 ? x1 : x2;
  opt.q_coupling = std::exp(t_best);
  opt.best = eval(opt.q_coupling);
  opt.eta = opt.best.eta_total;
  return opt;
}

struct PresetRank {
  std::string preset;
  EfficiencyBreakdown metrics;
};

// Deterministic ordering: efficiency descending, name as the tie-break.
inline std::vector<PresetRank> rank_presets(const CoupledSystem& base) {
  std::vector<PresetRank> ranks;
  for (const auto& name : emitter_preset_names()) {
    CoupledSystem sys = base;
    sys.emitter = emitter_preset(name);
    ranks.push_back({name, total_efficiency(sys)});
  }
  std::sort(ranks.begin(), ranks.end(),
            [](const PresetRank& a, const PresetRank& b) {
              if (a.metrics.eta_total != b.metrics.eta_total)
                return a.metrics.eta_total > b.metrics.eta_total;
              return a.preset < b.preset;
            });
  return ranks;
}

}  // namespace purcellkit
