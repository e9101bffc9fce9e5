#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "purcellkit/config.hpp"
#include "purcellkit/coupling.hpp"
#include "purcellkit/fitdata.hpp"
#include "purcellkit/lindblad.hpp"
#include "purcellkit/spectra.hpp"
#include "purcellkit/svg.hpp"
#include "purcellkit/sweep.hpp"

namespace purcellkit {

struct NonConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CliOptions {
  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool plot = false;
};

namespace cli_detail {

using nlohmann::json;

inline constexpr const char* kUnitsNote =
    "wavelengths and linewidths in nm, times in ns, rates in rad/ns";

inline json report_header(const char* kind) {
  json j;
  j["schema_version"] = 1;
  j["report"] = kind;
  j["units"] = kUnitsNote;
  return j;
}

inline std::string out_path(const CliOptions& opt, const std::string& name) {
  return (std::filesystem::path(opt.out_dir) / name).string();
}

inline void write_json_report(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("report write failed: " + path);
}

inline json breakdown_json(const EfficiencyBreakdown& b) {
  json j;
  j["q_loaded"] = b.q_loaded;
  j["purcell"] = b.purcell;
  j["purcell_spectral"] = b.purcell_spectral;
  j["purcell_effective"] = b.purcell_effective;
  j["beta_channel"] = b.beta_channel;
  j["beta_spectral"] = b.beta_spectral;
  j["eta_out"] = b.eta_out;
  j["eta_total"] = b.eta_total;
  j["eta_spectral"] = b.eta_spectral;
  j["regime"] = b.regime;
  return j;
}

inline std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Plain two-column numeric CSV; '#' comments and one header row allowed.
inline std::pair<std::vector<double>, std::vector<double>> read_xy_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file: " + path);
  std::vector<double> x, y;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen &&
        line.find_first_not_of("-+.0123456789eE, \t") != std::string::npos) {
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b))
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected two comma-separated columns");
    try {
      x.push_back(std::stod(a));
      y.push_back(std::stod(b));
    } catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": not a number");
    }
  }
  if (x.size() < 2) throw ConfigError(path + ": needs at least two data rows");
  return {std::move(x), std::move(y)};
}

inline bool spans_decades(const std::vector<double>& v) {
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (double x : v) {
    if (!(x > 0.0)) return false;
    if (!any) {
      lo = hi = x;
      any = true;
    } else {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  return any && hi / lo > 50.0;
}

}  // namespace cli_detail

inline int cmd_design(const RunConfig& cfg, const CliOptions& opt,
                      std::ostream& out) {
  using namespace cli_detail;
  const CoupledSystem sys = coupled_system_from(cfg, cfg.seed);
  const EfficiencyBreakdown b = total_efficiency(sys);
  const ResonanceComb comb =
      resonance_comb(sys.resonator, sys.emitter.zpl_wavelength - 1.0,
                     sys.emitter.zpl_wavelength + 1.0);

  json j = report_header("design");
  json system;
  system["q_loaded"] = b.q_loaded;
  system["fsr"] = comb.fsr;
  system["cavity_linewidth"] = comb.linewidth_fwhm;
  system["emitter"] = sys.emitter.label.empty() ? "custom" : sys.emitter.label;
  system["emitter_q"] = emitter_q(sys.emitter);
  system["zpl_wavelength"] = sys.emitter.zpl_wavelength;
  system["detuning"] = sys.detuning;
  system["overlap"] = sys.overlap_factor;
  system["directions"] = sys.directions == Collection::one ? "one" : "both";
  j["system"] = system;
  j["efficiency"] = breakdown_json(b);
  write_json_report(out_path(opt, "design_report.json"), j);

  out << "design summary (" << kUnitsNote << ")\n";
  const std::pair<const char*, double> rows[] = {
      {"q_loaded", b.q_loaded},
      {"purcell", b.purcell},
      {"purcell_effective", b.purcell_effective},
      {"beta_channel", b.beta_channel},
      {"beta_spectral", b.beta_spectral},
      {"eta_out", b.eta_out},
      {"eta_total", b.eta_total},
      {"eta_spectral", b.eta_spectral},
  };
  for (const auto& [name, value] : rows) {
    out << "  " << name;
    for (std::size_t i = std::string(name).size(); i < 20; ++i) out << ' ';
    out << short_num(value) << "\n";
  }
  out << "  regime              " << b.regime << "\n";
  out << "report: " << out_path(opt, "design_report.json") << "\n";
  return 0;
}

namespace cli_detail {

inline void write_preset_sweep_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, SweepResult>>& runs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write sweep csv: " + path);
  out << "preset,";
  for (const auto& name : runs.front().second.axis_names) out << name << ',';
  out << "q_loaded,purcell,purcell_spectral,purcell_effective,beta_channel,"
         "beta_spectral,eta_out,eta_total,eta_spectral,regime,ok,note\n";
  for (const auto& [preset, sweep] : runs) {
    for (const auto& row : sweep.rows) {
      out << preset << ',';
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
  }
  if (!out) throw std::runtime_error("sweep csv write failed: " + path);
}

}  // namespace cli_detail

inline int cmd_sweep(const RunConfig& cfg, const CliOptions& opt,
                     std::ostream& out) {
  using namespace cli_detail;
  if (!cfg.sweep.present) throw ConfigError("config: missing [sweep] section");
  const CoupledSystem base = coupled_system_from(cfg, cfg.seed);

  if (cfg.sweep.task == "optimize_q_coupling") {
    const QcOptimum best = optimize_q_coupling(base, cfg.sweep.q_coupling_min,
                                               cfg.sweep.q_coupling_max);
    json j = report_header("optimize_q_coupling");
    j["q_coupling"] = best.q_coupling;
    j["eta_total"] = best.eta;
    j["unimodal"] = best.unimodal;
    j["evaluations"] = best.evaluations;
    j["warnings"] = best.warnings;
    j["best"] = breakdown_json(best.best);
    write_json_report(out_path(opt, "optimize_report.json"), j);
    out << "optimal q_coupling " << short_num(best.q_coupling) << " gives eta_total "
        << short_num(best.eta) << " (q_loaded " << short_num(best.best.q_loaded)
        << ")\n";
    for (const auto& w : best.warnings) out << "warning: " << w << "\n";
    out << "report: " << out_path(opt, "optimize_report.json") << "\n";
    return 0;
  }

  if (cfg.sweep.task == "rank_presets") {
    const auto ranks = rank_presets(base);
    std::vector<std::pair<std::string, SweepResult>> runs;
    SweepResult table;
    table.axis_names = {};
    json order = json::array();
    for (const auto& r : ranks) {
      SweepRow row;
      row.metrics = r.metrics;
      row.ok = true;
      SweepResult one;
      one.rows = {row};
      runs.emplace_back(r.preset, one);
      order.push_back(r.preset);
    }
    write_preset_sweep_csv(out_path(opt, "preset_ranking.csv"), runs);
    json j = report_header("rank_presets");
    j["order"] = order;
    write_json_report(out_path(opt, "rank_report.json"), j);
    out << "preset ranking by eta_total:\n";
    for (const auto& r : ranks)
      out << "  " << r.preset << "  " << short_num(r.metrics.eta_total) << "\n";
    out << "table: " << out_path(opt, "preset_ranking.csv") << "\n";
    return 0;
  }

  std::vector<std::pair<std::string, SweepResult>> runs;
  std::size_t invalid = 0;
  if (cfg.sweep.presets.empty()) {
    runs.emplace_back(base.emitter.label.empty() ? "custom" : base.emitter.label,
                      run_sweep(base, cfg.sweep.axes));
  } else {
    for (const auto& name : cfg.sweep.presets) {
      CoupledSystem sys = base;
      sys.emitter = emitter_preset(name);
      runs.emplace_back(name, run_sweep(sys, cfg.sweep.axes));
    }
  }
  for (const auto& [name, sweep] : runs) invalid += sweep.invalid;

  const std::string csv = out_path(opt, "sweep.csv");
  write_preset_sweep_csv(csv, runs);
  std::size_t total_rows = 0;
  for (const auto& [name, sweep] : runs) total_rows += sweep.rows.size();
  out << "sweep wrote " << total_rows << " rows (" << invalid
      << " outside the loss budget) to " << csv << "\n";

  if (opt.plot) {
    std::vector<SvgSeries> series;
    for (const auto& [name, sweep] : runs) {
      SvgSeries s;
      s.label = name;
      for (const auto& row : sweep.rows) {
        if (!row.ok) continue;
        s.x.push_back(row.coords.front());
        s.y.push_back(row.metrics.eta_total);
      }
      if (!s.x.empty()) series.push_back(std::move(s));
    }
    if (!series.empty()) {
      SvgOptions so;
      so.title = "total efficiency sweep";
      so.x_label = cfg.sweep.axes.front().name;
      so.y_label = "eta_total";
      so.log_x = spans_decades(cfg.sweep.axes.front().values);
      const std::string svg = out_path(opt, "sweep.svg");
      write_svg_plot(svg, series, so);
      out << "plot: " << svg << "\n";
    }
  }
  return 0;
}

inline int cmd_calibrate(const RunConfig& cfg, const CliOptions& opt,
                         std::ostream& out) {
  using namespace cli_detail;
  if (!cfg.calibrate.present)
    throw ConfigError("config: missing [calibrate] section");
  Spectrum fs, wg;
  try {
    fs = read_spectrum_csv(resolve_config_path(cfg, cfg.calibrate.free_space_csv));
    wg = read_spectrum_csv(resolve_config_path(cfg, cfg.calibrate.waveguide_csv));
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const SpectralPurcellResult r =
      extract_spectral_purcell(fs, wg, cfg.path_efficiencies);

  json j = report_header("calibrate");
  j["f_s_peak"] = r.f_s_peak;
  j["f_s_peak_sigma"] = r.f_s_peak_sigma;
  j["beta_s_peak"] = r.beta_s_peak;
  j["beta_s_peak_sigma"] = r.beta_s_peak_sigma;
  j["beta_integrated"] = r.beta_integrated;
  j["zpl_center"] = r.zpl_center;
  j["comb_line"] = r.comb_line;
  j["detuning"] = r.detuning;
  j["grid_points"] = r.grid.size();
  j["excluded_points"] = r.excluded;
  j["warnings"] = r.warnings;
  write_json_report(out_path(opt, "calibrate_report.json"), j);

  out << "spectral Purcell at the comb line: F_s = " << short_num(r.f_s_peak)
      << " +/- " << short_num(r.f_s_peak_sigma) << "\n";
  out << "beta_s at the line " << short_num(r.beta_s_peak) << " +/- "
      << short_num(r.beta_s_peak_sigma) << ", band-integrated "
      << short_num(r.beta_integrated) << "\n";
  out << "ZPL center " << short_num(r.zpl_center) << " nm, nearest line "
      << short_num(r.comb_line) << " nm, detuning " << short_num(r.detuning)
      << " nm\n";
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
  out << "report: " << out_path(opt, "calibrate_report.json") << "\n";

  if (opt.plot) {
    SvgSeries s;
    s.label = "F_s";
    s.x = r.grid;
    s.y = r.f_s;
    SvgOptions so;
    so.title = "spectral Purcell factor";
    so.x_label = "wavelength (nm)";
    so.y_label = "F_s";
    const std::string svg = out_path(opt, "calibrate.svg");
    write_svg_plot(svg, {s}, so);
    out << "plot: " << svg << "\n";
  }
  return 0;
}

namespace cli_detail {

inline int fit_comb_cmd(const RunConfig& cfg, const CliOptions& opt,
                        std::ostream& out) {
  Spectrum s;
  try {
    s = read_spectrum_csv(resolve_config_path(cfg, cfg.fit.data_csv));
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  CombFitOptions co;
  co.prominence_fraction = cfg.fit.prominence_fraction;
  const CombFit fit = fit_comb(s, co);

  json j = report_header("fit_comb");
  json lines = json::array();
  std::size_t converged = 0;
  for (const auto& l : fit.lines) {
    json lj;
    lj["center"] = l.center;
    lj["fwhm"] = l.fwhm;
    lj["q"] = l.q;
    lj["amplitude"] = l.amplitude;
    lj["center_sigma"] = l.center_sigma;
    lj["fwhm_sigma"] = l.fwhm_sigma;
    lj["converged"] = l.converged;
    lines.push_back(lj);
    if (l.converged) ++converged;
  }
  j["lines"] = lines;
  j["fsr"] = fit.fsr;
  j["fsr_sigma"] = fit.fsr_sigma;
  j["q_loaded"] = fit.q_loaded;
  j["dips"] = fit.dips;
  j["residual_rms"] = fit.residual_rms;
  j["warnings"] = fit.warnings;
  write_json_report(out_path(opt, "fit_report.json"), j);

  out << "comb fit found " << fit.lines.size() << " lines";
  if (!fit.lines.empty()) {
    out << ", q_loaded " << short_num(fit.q_loaded);
    if (std::isfinite(fit.fsr)) out << ", fsr " << short_num(fit.fsr) << " nm";
  }
  out << "\n";
  for (const auto& w : fit.warnings) out << "warning: " << w << "\n";
  out << "report: " << out_path(opt, "fit_report.json") << "\n";

  if (opt.plot) {
    SvgSeries data;
    data.label = "data";
    data.x = s.wavelength;
    data.y = s.intensity;
    SvgOptions so;
    so.title = "resonance comb";
    so.x_label = "wavelength (nm)";
    so.y_label = "intensity";
    const std::string svg = out_path(opt, "fit_comb.svg");
    write_svg_plot(svg, {data}, so);
    out << "plot: " << svg << "\n";
  }
  if (!fit.lines.empty() && converged == 0)
    throw NonConvergenceError("comb fit: no line converged");
  return 0;
}

inline int fit_g2_cmd(const RunConfig& cfg, const CliOptions& opt,
                      std::ostream& out) {
  const auto [tau, counts] =
      read_xy_csv(resolve_config_path(cfg, cfg.fit.data_csv));
  const G2Fit fit = fit_g2(tau, counts);

  json j = report_header("fit_g2");
  j["baseline"] = fit.baseline;
  j["baseline_sigma"] = fit.baseline_sigma;
  j["g2_zero"] = fit.g0;
  j["g2_zero_sigma"] = fit.g0_sigma;
  j["tau1"] = fit.tau1;
  j["tau1_sigma"] = fit.tau1_sigma;
  j["iterations"] = fit.iterations;
  j["residual_rms"] = fit.residual_rms;
  j["warnings"] = fit.warnings;
  if (cfg.fit.background_rho) {
    const PurityResult corr =
        background_corrected_purity(fit.g0, *cfg.fit.background_rho);
    j["background_rho"] = *cfg.fit.background_rho;
    j["g2_zero_corrected"] = corr.g2_corrected;
    j["correction_clamped"] = corr.clamped;
  }
  write_json_report(out_path(opt, "fit_report.json"), j);

  out << "g2 fit: g2(0) = " << short_num(fit.g0) << " +/- "
      << short_num(fit.g0_sigma) << ", tau1 = " << short_num(fit.tau1)
      << " +/- " << short_num(fit.tau1_sigma) << " ns\n";
  if (j.contains("g2_zero_corrected"))
    out << "background-corrected g2(0) = " << short_num(j["g2_zero_corrected"])
        << " at rho " << short_num(*cfg.fit.background_rho) << "\n";
  for (const auto& w : fit.warnings) out << "warning: " << w << "\n";
  out << "report: " << out_path(opt, "fit_report.json") << "\n";

  if (opt.plot) {
    SvgSeries data;
    data.label = "data";
    data.x = tau;
    data.y = counts;
    SvgOptions so;
    so.title = "second-order correlation";
    so.x_label = "tau (ns)";
    so.y_label = "coincidences";
    const std::string svg = out_path(opt, "fit_g2.svg");
    write_svg_plot(svg, {data}, so);
    out << "plot: " << svg << "\n";
  }
  if (!fit.converged) throw NonConvergenceError("g2 fit did not converge");
  return 0;
}

inline int fit_thickness_cmd(const RunConfig& cfg, const CliOptions& opt,
                             std::ostream& out) {
  const auto [t, q] = read_xy_csv(resolve_config_path(cfg, cfg.fit.data_csv));
  std::vector<ThicknessPoint> pts;
  for (std::size_t i = 0; i < t.size(); ++i) pts.push_back({t[i], q[i]});
  ThicknessFit fit;
  try {
    fit = fit_q_vs_thickness(pts, cfg.fit.q_intrinsic, cfg.fit.q_coupling);
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }

  json j = report_header("fit_thickness");
  j["amplitude"] = fit.amplitude;
  j["amplitude_sigma"] = fit.amplitude_sigma;
  j["exponent"] = fit.exponent;
  j["exponent_sigma"] = fit.exponent_sigma;
  j["residual_rms"] = fit.residual_rms;
  j["q_intrinsic"] = cfg.fit.q_intrinsic;
  j["q_coupling"] = cfg.fit.q_coupling;
  j["warnings"] = fit.warnings;
  write_json_report(out_path(opt, "fit_report.json"), j);

  out << "scattering-Q model: Q_sc = " << short_num(fit.amplitude) << " / t^"
      << short_num(fit.exponent) << " (sigmas " << short_num(fit.amplitude_sigma)
      << ", " << short_num(fit.exponent_sigma) << ")\n";
  for (const auto& w : fit.warnings) out << "warning: " << w << "\n";
  out << "report: " << out_path(opt, "fit_report.json") << "\n";
  if (!fit.converged)
    throw NonConvergenceError("thickness fit did not converge");
  return 0;
}

}  // namespace cli_detail

inline int cmd_fit(const RunConfig& cfg, const CliOptions& opt,
                   std::ostream& out) {
  if (!cfg.fit.present) throw ConfigError("config: missing [fit] section");
  if (cfg.fit.kind == "comb") return cli_detail::fit_comb_cmd(cfg, opt, out);
  if (cfg.fit.kind == "g2") return cli_detail::fit_g2_cmd(cfg, opt, out);
  return cli_detail::fit_thickness_cmd(cfg, opt, out);
}

inline int cmd_verify(const RunConfig& cfg, const CliOptions& opt,
                      std::ostream& out) {
  using namespace cli_detail;
  json j = report_header("verify");
  json rows = json::array();
  double max_disc = 0.0;
  double max_trace = 0.0;
  double min_eig = 0.0;

  auto grid_point = [](double f, double dratio, double qe) {
    LindbladParams p;
    p.kappa_c = 0.6;
    p.kappa_i = 0.4;
    const double kappa = p.kappa_c + p.kappa_i;
    p.gamma_r = std::min(0.01, 0.016 / f) * kappa;
    p.gamma_nr = p.gamma_r * (1.0 / qe - 1.0);
    p.gamma_phi = dratio * kappa;
    p.g = 0.5 * std::sqrt(f * kappa * p.gamma_r);
    return p;
  };
  auto analytic_beta = [](const LindbladParams& p) {
    const double kappa = p.kappa_c + p.kappa_i;
    const double f = 4.0 * p.g * p.g / (kappa * p.gamma_r);
    const double gamma_h = p.gamma_r + p.gamma_nr + 2.0 * p.gamma_phi;
    const double f_eff =
        purcell_effective(f, 1.0 / kappa, 1.0 / gamma_h, 1.0, 0.0, 1.0);
    return f_eff / (1.0 + f_eff + p.gamma_nr / p.gamma_r);
  };
  auto drain_time = [](const LindbladParams& p) {
    const double kappa = p.kappa_c + p.kappa_i;
    const double gamma = p.gamma_r + p.gamma_nr;
    const double enhanced =
        4.0 * p.g * p.g / (kappa + gamma + 2.0 * p.gamma_phi);
    return 12.0 / (gamma + enhanced);
  };

  for (double f : cfg.verify.f_values) {
    for (double dratio : cfg.verify.dephasing_ratios) {
      for (double qe : cfg.verify.quantum_efficiencies) {
        const LindbladParams p = grid_point(f, dratio, qe);
        LindbladOptions lo;
        lo.t_final = drain_time(p);
        const LindbladResult res = evolve_single_excitation(p, lo);
        const double emitted = res.budget.bus + res.budget.cavity_loss +
                               res.budget.free_space + res.budget.nonradiative;
        const double beta_oracle =
            (res.budget.bus + res.budget.cavity_loss) / emitted;
        const double beta_ref = analytic_beta(p);
        const double disc = std::abs(beta_oracle - beta_ref) /
                            std::max({beta_ref, 1e-12});
        max_disc = std::max(max_disc, disc);
        max_trace = std::max(max_trace, res.trace_error_max);
        min_eig = std::min(min_eig, res.min_eigenvalue);
        json row;
        row["purcell"] = f;
        row["dephasing_ratio"] = dratio;
        row["quantum_efficiency"] = qe;
        row["beta_oracle"] = beta_oracle;
        row["beta_analytic"] = beta_ref;
        row["discrepancy"] = disc;
        row["budget_sum"] = total(res.budget);
        rows.push_back(row);
        out << "F=" << short_num(f) << " dephasing=" << short_num(dratio)
            << " qe=" << short_num(qe) << ": oracle " << short_num(beta_oracle)
            << " analytic " << short_num(beta_ref) << " ("
            << short_num(100.0 * disc) << "%)\n";
      }
    }
  }

  // Step-halving sensitivity on a mid-grid point.
  const LindbladParams mid = grid_point(
      cfg.verify.f_values[cfg.verify.f_values.size() / 2],
      cfg.verify.dephasing_ratios[cfg.verify.dephasing_ratios.size() / 2],
      cfg.verify
          .quantum_efficiencies[cfg.verify.quantum_efficiencies.size() / 2]);
  LindbladOptions lo;
  lo.t_final = drain_time(mid);
  const LindbladResult coarse = evolve_single_excitation(mid, lo);
  lo.dt = 0.5 * coarse.dt;
  const LindbladResult fine = evolve_single_excitation(mid, lo);
  const double dt_delta = std::max(
      {std::abs(coarse.budget.bus - fine.budget.bus),
       std::abs(coarse.budget.cavity_loss - fine.budget.cavity_loss),
       std::abs(coarse.budget.free_space - fine.budget.free_space),
       std::abs(coarse.budget.nonradiative - fine.budget.nonradiative)});

  json summary;
  summary["max_discrepancy"] = max_disc;
  summary["tolerance"] = cfg.verify.tolerance;
  summary["max_trace_error"] = max_trace;
  summary["min_eigenvalue"] = min_eig;
  summary["step_halving_budget_delta"] = dt_delta;
  j["rows"] = rows;
  j["summary"] = summary;

  json warnings = json::array();
  if (cfg.resonator && cfg.emitter) {
    const CoupledSystem sys = coupled_system_from(cfg, cfg.seed);
    const LindbladParams dev = params_from_system(sys);
    const double kappa = dev.kappa_c + dev.kappa_i;
    const double gamma_tot = dev.gamma_r + dev.gamma_nr + 2.0 * dev.gamma_phi;
    json device;
    device["g"] = dev.g;
    device["kappa"] = kappa;
    device["gamma_total"] = gamma_tot;
    if (dev.g > 0.1 * std::max(kappa, gamma_tot))
      warnings.push_back(
          "device sits outside the weak-coupling regime; the rate-equation "
          "map is unreliable here");
    j["device"] = device;
  }
  j["warnings"] = warnings;
  write_json_report(out_path(opt, "verify_report.json"), j);

  out << "max oracle-vs-analytic discrepancy "
      << short_num(100.0 * max_disc) << "% (tolerance "
      << short_num(100.0 * cfg.verify.tolerance)
      << "%), trace error " << short_num(max_trace)
      << ", step-halving budget shift " << short_num(dt_delta) << "\n";
  for (const auto& w : warnings) out << "warning: " << w.get<std::string>() << "\n";
  out << "report: " << out_path(opt, "verify_report.json") << "\n";
  if (max_disc > cfg.verify.tolerance)
    throw NonConvergenceError(
        "oracle and analytic branching ratios disagree beyond tolerance");
  return 0;
}

inline int cmd_synthesize(const RunConfig& cfg, const CliOptions& opt,
                          std::ostream& out) {
  using namespace cli_detail;
  if (!cfg.synthesize.present)
    throw ConfigError("config: missing [synthesize] section");
  const CoupledSystem sys = coupled_system_from(cfg, cfg.seed);
  const SpectralModel model = spectral_model(sys, cfg.synthesize.min_wavelength,
                                             cfg.synthesize.max_wavelength);
  std::vector<double> grid(cfg.synthesize.points);
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = cfg.synthesize.min_wavelength +
              (cfg.synthesize.max_wavelength - cfg.synthesize.min_wavelength) *
                  static_cast<double>(i) / static_cast<double>(grid.size() - 1);
  auto [fs, wg] = synthesize_spectra(model, grid);
  Spectrum tr;
  tr.wavelength = grid;
  tr.intensity = transmission(sys.resonator, grid);
  tr.channel = "transmission";

  if (cfg.synthesize.exposure > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    auto add_noise = [&](Spectrum& s) {
      s.exposure = cfg.synthesize.exposure;
      for (double& v : s.intensity) {
        std::poisson_distribution<long long> pois(v * s.exposure);
        v = static_cast<double>(pois(rng)) / s.exposure;
      }
    };
    add_noise(fs);
    add_noise(wg);
    add_noise(tr);
  }

  const std::string fs_path = out_path(opt, "free_space.csv");
  const std::string wg_path = out_path(opt, "waveguide.csv");
  const std::string tr_path = out_path(opt, "transmission.csv");
  write_spectrum_csv(fs_path, fs);
  write_spectrum_csv(wg_path, wg);
  write_spectrum_csv(tr_path, tr);

  json j = report_header("synthesize");
  j["f_spectral"] = model.f_spectral;
  j["eta_out"] = model.eta_out;
  j["comb_lines"] = model.comb.centers.size();
  j["window"] = {cfg.synthesize.min_wavelength, cfg.synthesize.max_wavelength};
  j["points"] = cfg.synthesize.points;
  j["exposure"] = cfg.synthesize.exposure;
  j["free_space_csv"] = "free_space.csv";
  j["waveguide_csv"] = "waveguide.csv";
  j["transmission_csv"] = "transmission.csv";
  write_json_report(out_path(opt, "synthesize_report.json"), j);

  out << "synthesized " << cfg.synthesize.points << " points over ["
      << short_num(cfg.synthesize.min_wavelength) << ", "
      << short_num(cfg.synthesize.max_wavelength) << "] nm with F_s "
      << short_num(model.f_spectral) << "\n";
  out << "channels: " << fs_path << ", " << wg_path << ", " << tr_path << "\n";

  if (opt.plot) {
    SvgSeries a, b;
    a.label = "free space";
    a.x = fs.wavelength;
    a.y = fs.intensity;
    b.label = "waveguide";
    b.x = wg.wavelength;
    b.y = wg.intensity;
    SvgOptions so;
    so.title = "synthesized emission spectra";
    so.x_label = "wavelength (nm)";
    so.y_label = "intensity";
    const std::string svg = out_path(opt, "synthesize.svg");
    write_svg_plot(svg, {a, b}, so);
    out << "plot: " << svg << "\n";
  }
  return 0;
}

inline int run_command(const CliOptions& opt, std::ostream& out,
                       std::ostream& err) {
  try {
    if (opt.config_path.empty()) throw ConfigError("no config file given");
    RunConfig cfg = load_run_config(opt.config_path);
    if (opt.seed) cfg.seed = *opt.seed;
    std::error_code ec;
    std::filesystem::create_directories(opt.out_dir, ec);
    if (ec)
      throw ConfigError("cannot create output directory: " + opt.out_dir);

    if (opt.command == "design") return cmd_design(cfg, opt, out);
    if (opt.command == "sweep") return cmd_sweep(cfg, opt, out);
    if (opt.command == "calibrate") return cmd_calibrate(cfg, opt, out);
    if (opt.command == "fit") return cmd_fit(cfg, opt, out);
    if (opt.command == "verify") return cmd_verify(cfg, opt, out);
    if (opt.command == "synthesize") return cmd_synthesize(cfg, opt, out);
    throw ConfigError("unknown command: " + opt.command);
  } catch (const NonConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace purcellkit
