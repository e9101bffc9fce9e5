#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "purcellkit/coupling.hpp"
#include "purcellkit/emitter.hpp"
#include "purcellkit/resonator.hpp"
#include "purcellkit/spectra.hpp"
#include "purcellkit/sweep.hpp"
#include "purcellkit/toml_lite.hpp"

namespace purcellkit {

struct MisalignmentConfig {
  bool present = false;
  double position_sigma = 0.0;  // nm
  double angle_sigma = 0.0;     // rad
  double waist = 0.0;           // nm
  std::size_t samples = 0;      // 0 selects the closed form
};

struct SweepConfig {
  bool present = false;
  std::string task = "grid";  // grid | optimize_q_coupling | rank_presets
  std::vector<std::string> presets;
  std::vector<SweepAxis> axes;
  double q_coupling_min = 0.0;
  double q_coupling_max = 0.0;
};

struct SynthesizeConfig {
  bool present = false;
  double min_wavelength = 0.0;
  double max_wavelength = 0.0;
  std::size_t points = 0;
  double exposure = 0.0;  // >0 adds Poisson counting noise from the run seed
};

struct CalibrateConfig {
  bool present = false;
  std::string free_space_csv;
  std::string waveguide_csv;
};

struct FitConfig {
  bool present = false;
  std::string kind;  // comb | g2 | thickness
  std::string data_csv;
  double prominence_fraction = 0.25;
  std::optional<double> background_rho;
  double q_intrinsic = 0.0;
  double q_coupling = 0.0;
};

struct VerifyConfig {
  std::vector<double> f_values = {0.1, 1.0, 10.0};
  std::vector<double> dephasing_ratios = {0.0, 1.0, 10.0};
  std::vector<double> quantum_efficiencies = {0.05, 0.5, 1.0};
  double tolerance = 0.02;
};

struct RunConfig {
  std::optional<ResonatorSpec> resonator;
  std::optional<EmitterSpec> emitter;
  double detuning = 0.0;
  double overlap = 1.0;
  Collection directions = Collection::both;
  MisalignmentConfig misalignment;
  PathEfficiencies path_efficiencies;
  SweepConfig sweep;
  SynthesizeConfig synthesize;
  CalibrateConfig calibrate;
  FitConfig fit;
  VerifyConfig verify;
  std::uint64_t seed = 0;
  std::string base_dir;  // directory of the config file, anchors relative paths
};

namespace cfg_detail {

using nlohmann::json;

inline ConfigError err(const std::string& where, const std::string& msg) {
  return ConfigError(where + ": " + msg);
}

inline void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw err(where, "expected a table");
}

inline void reject_unknown(const json& obj,
                           std::initializer_list<const char*> allowed,
                           const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw err(where, "unknown key '" + key + "'");
  }
}

inline double number(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw err(where, std::string("missing key '") + key + "'");
  const auto& v = obj.at(key);
  if (!v.is_number()) throw err(where, std::string("'") + key + "' must be a number");
  return v.get<double>();
}

inline double number_or(const json& obj, const char* key, double fallback,
                        const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return number(obj, key, where);
}

inline std::string string_at(const json& obj, const char* key,
                             const std::string& where) {
  if (!obj.contains(key)) throw err(where, std::string("missing key '") + key + "'");
  const auto& v = obj.at(key);
  if (!v.is_string()) throw err(where, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

inline std::string string_or(const json& obj, const char* key,
                             const std::string& fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return string_at(obj, key, where);
}

inline std::vector<double> number_list(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw err(where, "expected a non-empty array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw err(where, "expected numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline ResonatorSpec parse_resonator(const json& j) {
  const std::string where = "resonator";
  require_object(j, where);
  reject_unknown(j,
                 {"center_wavelength", "group_index_times_length", "q_intrinsic",
                  "q_coupling", "q_scatter", "mode_volume", "cavity_index",
                  "reference_resonance"},
                 where);
  ResonatorSpec r;
  r.center_wavelength = number(j, "center_wavelength", where);
  r.group_index_times_length = number(j, "group_index_times_length", where);
  r.q_intrinsic = number(j, "q_intrinsic", where);
  r.q_coupling = number(j, "q_coupling", where);
  if (j.contains("q_scatter")) r.q_scatter = number(j, "q_scatter", where);
  r.mode_volume = number(j, "mode_volume", where);
  r.cavity_index = number_or(j, "cavity_index", 1.0, where);
  r.reference_resonance =
      number_or(j, "reference_resonance", r.center_wavelength, where);
  try {
    loaded_q(r);
    fsr(r.center_wavelength, r.group_index_times_length);
    detail::require_positive(r.mode_volume, "mode_volume");
    detail::require_positive(r.cavity_index, "cavity_index");
    detail::require_positive(r.reference_resonance, "reference_resonance");
  } catch (const std::exception& e) {
    throw err(where, e.what());
  }
  return r;
}

inline EmitterSpec parse_emitter(const json& j) {
  const std::string where = "emitter";
  require_object(j, where);
  reject_unknown(j,
                 {"preset", "zpl_wavelength", "zpl_fwhm", "radiative_lifetime",
                  "quantum_efficiency", "dipole_azimuth", "label"},
                 where);
  EmitterSpec e;
  const bool has_preset = j.contains("preset");
  if (has_preset) {
    try {
      e = emitter_preset(string_at(j, "preset", where));
    } catch (const std::exception& ex) {
      throw err(where, ex.what());
    }
  }
  auto field = [&](const char* key, double& slot) {
    if (j.contains(key))
      slot = number(j, key, where);
    else if (!has_preset)
      throw err(where, std::string("missing key '") + key + "' (or use a preset)");
  };
  field("zpl_wavelength", e.zpl_wavelength);
  field("zpl_fwhm", e.zpl_fwhm);
  field("radiative_lifetime", e.radiative_lifetime);
  if (j.contains("quantum_efficiency"))
    e.quantum_efficiency = number(j, "quantum_efficiency", where);
  e.dipole_azimuth = number_or(j, "dipole_azimuth", e.dipole_azimuth, where);
  e.label = string_or(j, "label", e.label, where);
  try {
    validate(e);
  } catch (const std::exception& ex) {
    throw err(where, ex.what());
  }
  return e;
}

inline void parse_coupling(const json& j, RunConfig& cfg) {
  const std::string where = "coupling";
  require_object(j, where);
  reject_unknown(j, {"detuning", "overlap", "directions", "misalignment"}, where);
  cfg.detuning = number_or(j, "detuning", 0.0, where);
  cfg.overlap = number_or(j, "overlap", 1.0, where);
  if (!(cfg.overlap >= 0.0) || cfg.overlap > 1.0)
    throw err(where, "overlap must be in [0, 1]");
  if (!std::isfinite(cfg.detuning)) throw err(where, "detuning must be finite");
  const std::string dir = string_or(j, "directions", "both", where);
  if (dir == "one")
    cfg.directions = Collection::one;
  else if (dir == "both")
    cfg.directions = Collection::both;
  else
    throw err(where, "directions must be \"one\" or \"both\"");
  if (j.contains("misalignment")) {
    const auto& m = j.at("misalignment");
    const std::string mw = "coupling.misalignment";
    require_object(m, mw);
    reject_unknown(m, {"position_sigma", "angle_sigma_deg", "waist", "samples"},
                   mw);
    cfg.misalignment.present = true;
    cfg.misalignment.position_sigma = number(m, "position_sigma", mw);
    cfg.misalignment.angle_sigma =
        number_or(m, "angle_sigma_deg", 0.0, mw) * std::numbers::pi / 180.0;
    cfg.misalignment.waist = number(m, "waist", mw);
    const double samples = number_or(m, "samples", 0.0, mw);
    if (samples < 0.0 || samples != std::floor(samples))
      throw err(mw, "samples must be a non-negative integer");
    cfg.misalignment.samples = static_cast<std::size_t>(samples);
  }
}

inline PathEff parse_path_eff(const json& v, const std::string& where) {
  PathEff p;
  if (v.is_number()) {
    p.value = v.get<double>();
  } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    p.value = v[0].get<double>();
    p.sigma = v[1].get<double>();
  } else {
    throw err(where, "expected a number or [value, sigma]");
  }
  return p;
}

inline void parse_path_efficiencies(const json& j, RunConfig& cfg) {
  const std::string where = "path_efficiencies";
  require_object(j, where);
  reject_unknown(j, {"eta_out", "eta_facet", "eta_side", "eta_objective", "eta_top"},
                 where);
  auto grab = [&](const char* key, PathEff& slot) {
    if (j.contains(key)) slot = parse_path_eff(j.at(key), where + "." + key);
  };
  grab("eta_out", cfg.path_efficiencies.eta_out);
  grab("eta_facet", cfg.path_efficiencies.eta_facet);
  grab("eta_side", cfg.path_efficiencies.eta_side);
  grab("eta_objective", cfg.path_efficiencies.eta_objective);
  grab("eta_top", cfg.path_efficiencies.eta_top);
  try {
    validate(cfg.path_efficiencies);
  } catch (const std::exception& ex) {
    throw err(where, ex.what());
  }
}

inline SweepAxis parse_axis(const json& j, std::size_t index) {
  const std::string where = "sweep.axis[" + std::to_string(index) + "]";
  require_object(j, where);
  reject_unknown(j, {"name", "values", "min", "max", "points", "scale"}, where);
  SweepAxis axis;
  axis.name = string_at(j, "name", where);
  const bool explicit_values = j.contains("values");
  const bool range = j.contains("min") || j.contains("max") || j.contains("points");
  if (explicit_values == range)
    throw err(where, "give either 'values' or a min/max/points range");
  if (explicit_values) {
    axis.values = number_list(j.at("values"), where + ".values");
    return axis;
  }
  const double lo = number(j, "min", where);
  const double hi = number(j, "max", where);
  const double points = number(j, "points", where);
  if (!(points >= 1.0) || points != std::floor(points))
    throw err(where, "points must be a positive integer");
  const std::string scale = string_or(j, "scale", "linear", where);
  const auto n = static_cast<std::size_t>(points);
  if (n == 1) {
    axis.values = {lo};
    return axis;
  }
  if (scale == "linear") {
    for (std::size_t i = 0; i < n; ++i)
      axis.values.push_back(lo + (hi - lo) * static_cast<double>(i) /
                                     static_cast<double>(n - 1));
  } else if (scale == "log") {
    if (!(lo > 0.0) || !(hi > 0.0))
      throw err(where, "log scale needs positive bounds");
    const double llo = std::log(lo), lhi = std::log(hi);
    for (std::size_t i = 0; i < n; ++i)
      axis.values.push_back(std::exp(llo + (lhi - llo) * static_cast<double>(i) /
                                               static_cast<double>(n - 1)));
  } else {
    throw err(where, "scale must be \"linear\" or \"log\"");
  }
  return axis;
}

inline void parse_sweep(const json& j, RunConfig& cfg) {
  const std::string where = "sweep";
  require_object(j, where);
  reject_unknown(j, {"task", "presets", "axis", "optimize"}, where);
  cfg.sweep.present = true;
  cfg.sweep.task = string_or(j, "task", "grid", where);
  if (cfg.sweep.task != "grid" && cfg.sweep.task != "optimize_q_coupling" &&
      cfg.sweep.task != "rank_presets")
    throw err(where,
              "task must be \"grid\", \"optimize_q_coupling\" or \"rank_presets\"");
  if (j.contains("presets")) {
    const auto& p = j.at("presets");
    if (!p.is_array() || p.empty())
      throw err(where, "presets must be a non-empty array of names");
    for (const auto& e : p) {
      if (!e.is_string()) throw err(where, "presets must be strings");
      try {
        emitter_preset(e.get<std::string>());
      } catch (const std::exception& ex) {
        throw err(where, ex.what());
      }
      cfg.sweep.presets.push_back(e.get<std::string>());
    }
  }
  if (j.contains("axis")) {
    const auto& axes = j.at("axis");
    if (!axes.is_array()) throw err(where, "axis must be an array of tables");
    for (std::size_t i = 0; i < axes.size(); ++i)
      cfg.sweep.axes.push_back(parse_axis(axes[i], i));
  }
  if (j.contains("optimize")) {
    const auto& o = j.at("optimize");
    const std::string ow = "sweep.optimize";
    require_object(o, ow);
    reject_unknown(o, {"q_coupling_min", "q_coupling_max"}, ow);
    cfg.sweep.q_coupling_min = number(o, "q_coupling_min", ow);
    cfg.sweep.q_coupling_max = number(o, "q_coupling_max", ow);
    if (!(cfg.sweep.q_coupling_min > 0.0) ||
        !(cfg.sweep.q_coupling_max > cfg.sweep.q_coupling_min))
      throw err(ow, "need 0 < q_coupling_min < q_coupling_max");
  }
  if (cfg.sweep.task == "grid" && cfg.sweep.axes.empty())
    throw err(where, "grid task needs at least one [[sweep.axis]]");
  if (cfg.sweep.task == "optimize_q_coupling" && !(cfg.sweep.q_coupling_min > 0.0))
    throw err(where, "optimize_q_coupling task needs a [sweep.optimize] range");
}

inline void parse_synthesize(const json& j, RunConfig& cfg) {
  const std::string where = "synthesize";
  require_object(j, where);
  reject_unknown(j, {"min_wavelength", "max_wavelength", "points", "exposure"},
                 where);
  cfg.synthesize.present = true;
  cfg.synthesize.min_wavelength = number(j, "min_wavelength", where);
  cfg.synthesize.max_wavelength = number(j, "max_wavelength", where);
  if (!(cfg.synthesize.max_wavelength > cfg.synthesize.min_wavelength))
    throw err(where, "need min_wavelength < max_wavelength");
  const double points = number(j, "points", where);
  if (!(points >= 2.0) || points != std::floor(points))
    throw err(where, "points must be an integer >= 2");
  cfg.synthesize.points = static_cast<std::size_t>(points);
  cfg.synthesize.exposure = number_or(j, "exposure", 0.0, where);
  if (cfg.synthesize.exposure < 0.0)
    throw err(where, "exposure must be non-negative");
}

inline void parse_calibrate(const json& j, RunConfig& cfg) {
  const std::string where = "calibrate";
  require_object(j, where);
  reject_unknown(j, {"free_space_csv", "waveguide_csv"}, where);
  cfg.calibrate.present = true;
  cfg.calibrate.free_space_csv = string_at(j, "free_space_csv", where);
  cfg.calibrate.waveguide_csv = string_at(j, "waveguide_csv", where);
}

inline void parse_fit(const json& j, RunConfig& cfg) {
  const std::string where = "fit";
  require_object(j, where);
  reject_unknown(j,
                 {"kind", "data_csv", "prominence_fraction", "background_rho",
                  "q_intrinsic", "q_coupling"},
                 where);
  cfg.fit.present = true;
  cfg.fit.kind = string_at(j, "kind", where);
  if (cfg.fit.kind != "comb" && cfg.fit.kind != "g2" && cfg.fit.kind != "thickness")
    throw err(where, "kind must be \"comb\", \"g2\" or \"thickness\"");
  cfg.fit.data_csv = string_at(j, "data_csv", where);
  cfg.fit.prominence_fraction =
      number_or(j, "prominence_fraction", 0.25, where);
  if (!(cfg.fit.prominence_fraction > 0.0) || cfg.fit.prominence_fraction >= 1.0)
    throw err(where, "prominence_fraction must be in (0, 1)");
  if (j.contains("background_rho")) {
    cfg.fit.background_rho = number(j, "background_rho", where);
    if (!(*cfg.fit.background_rho > 0.0) || *cfg.fit.background_rho > 1.0)
      throw err(where, "background_rho must be in (0, 1]");
  }
  if (cfg.fit.kind == "thickness") {
    cfg.fit.q_intrinsic = number(j, "q_intrinsic", where);
    cfg.fit.q_coupling = number(j, "q_coupling", where);
    if (!(cfg.fit.q_intrinsic > 0.0) || !(cfg.fit.q_coupling > 0.0))
      throw err(where, "thickness fits need positive q_intrinsic and q_coupling");
  }
}

inline void parse_verify(const json& j, RunConfig& cfg) {
  const std::string where = "verify";
  require_object(j, where);
  reject_unknown(
      j, {"f_values", "dephasing_ratios", "quantum_efficiencies", "tolerance"},
      where);
  if (j.contains("f_values"))
    cfg.verify.f_values = number_list(j.at("f_values"), where + ".f_values");
  if (j.contains("dephasing_ratios"))
    cfg.verify.dephasing_ratios =
        number_list(j.at("dephasing_ratios"), where + ".dephasing_ratios");
  if (j.contains("quantum_efficiencies"))
    cfg.verify.quantum_efficiencies = number_list(
        j.at("quantum_efficiencies"), where + ".quantum_efficiencies");
  cfg.verify.tolerance = number_or(j, "tolerance", 0.02, where);
  if (!(cfg.verify.tolerance > 0.0))
    throw err(where, "tolerance must be positive");
  for (double f : cfg.verify.f_values)
    if (!(f > 0.0)) throw err(where, "f_values must be positive");
  for (double d : cfg.verify.dephasing_ratios)
    if (d < 0.0) throw err(where, "dephasing_ratios must be non-negative");
  for (double q : cfg.verify.quantum_efficiencies)
    if (!(q > 0.0) || q > 1.0)
      throw err(where, "quantum_efficiencies must be in (0, 1]");
}

}  // namespace cfg_detail

inline RunConfig parse_run_config(const nlohmann::json& doc,
                                  const std::string& base_dir = ".") {
  using namespace cfg_detail;
  if (!doc.is_object()) throw ConfigError("config root must be a table");
  reject_unknown(doc,
                 {"resonator", "emitter", "coupling", "path_efficiencies", "sweep",
                  "synthesize", "calibrate", "fit", "verify", "seed"},
                 "config");
  RunConfig cfg;
  cfg.base_dir = base_dir;
  if (doc.contains("resonator")) cfg.resonator = parse_resonator(doc.at("resonator"));
  if (doc.contains("emitter")) cfg.emitter = parse_emitter(doc.at("emitter"));
  if (doc.contains("coupling")) parse_coupling(doc.at("coupling"), cfg);
  if (doc.contains("path_efficiencies"))
    parse_path_efficiencies(doc.at("path_efficiencies"), cfg);
  if (doc.contains("sweep")) parse_sweep(doc.at("sweep"), cfg);
  if (doc.contains("synthesize")) parse_synthesize(doc.at("synthesize"), cfg);
  if (doc.contains("calibrate")) parse_calibrate(doc.at("calibrate"), cfg);
  if (doc.contains("fit")) parse_fit(doc.at("fit"), cfg);
  if (doc.contains("verify")) parse_verify(doc.at("verify"), cfg);
  if (doc.contains("seed")) {
    const auto& s = doc.at("seed");
    if (!s.is_number_integer() || s.get<long long>() < 0)
      throw ConfigError("config: seed must be a non-negative integer");
    cfg.seed = static_cast<std::uint64_t>(s.get<long long>());
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  nlohmann::json doc;
  if (ext == ".json") {
    try {
      doc = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
  } else if (ext == ".toml") {
    doc = parse_toml_lite(text);
  } else {
    throw ConfigError("config file must end in .toml or .json: " + path);
  }
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return parse_run_config(doc, dir.empty() ? "." : dir);
}

// Relative data paths in a config resolve against the config file location.
inline std::string resolve_config_path(const RunConfig& cfg,
                                       const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(cfg.base_dir) / p).string();
}

// The effective overlap is the configured spatial/polarization factor times
// the placement-statistics factor when a misalignment block is present.
inline double effective_overlap(const RunConfig& cfg, std::uint64_t seed) {
  if (!cfg.misalignment.present) return cfg.overlap;
  const auto& m = cfg.misalignment;
  const double factor =
      m.samples == 0
          ? misalignment_overlap_closed_form(m.position_sigma, m.angle_sigma,
                                             m.waist)
          : misalignment_overlap(m.position_sigma, m.angle_sigma, m.waist,
                                 m.samples, seed)
                .mean;
  return cfg.overlap * factor;
}

inline CoupledSystem coupled_system_from(const RunConfig& cfg,
                                         std::uint64_t seed) {
  if (!cfg.resonator) throw ConfigError("config: missing [resonator] section");
  if (!cfg.emitter) throw ConfigError("config: missing [emitter] section");
  CoupledSystem sys;
  sys.resonator = *cfg.resonator;
  sys.emitter = *cfg.emitter;
  sys.detuning = cfg.detuning;
  sys.overlap_factor = effective_overlap(cfg, seed);
  sys.directions = cfg.directions;
  return sys;
}

}  // namespace purcellkit
