#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "purcellkit/config.hpp"
#include "purcellkit/toml_lite.hpp"

using namespace purcellkit;
using nlohmann::json;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << text;
  return path.string();
}

constexpr const char* kFullToml = R"(
# full document exercising every section
seed = 42

[resonator]
center_wavelength = 610.0
group_index_times_length = 177190.476
q_intrinsic = 3560.0
q_coupling = 9700.0
q_scatter = 3605.11
mode_volume = 30.0
cavity_index = 2.0

[emitter]
preset = "hbn_rt"

[coupling]
detuning = 0.35
overlap = 0.44
directions = "one"

[coupling.misalignment]
position_sigma = 100.0
angle_sigma_deg = 5.0
waist = 450.0

[path_efficiencies]
eta_out = [0.078, 0.004]
eta_facet = 0.8

[sweep]
task = "grid"
presets = ["hbn_cryo", "wse2"]

[[sweep.axis]]
name = "q_loaded"
scale = "log"
min = 1e3
max = 1e6
points = 7

[[sweep.axis]]
name = "overlap"
values = [0.1, 0.5, 1.0]

[synthesize]
min_wavelength = 604.0
max_wavelength = 616.0
points = 1201
exposure = 2000.0

[calibrate]
free_space_csv = "data/free_space.csv"
waveguide_csv = "data/waveguide.csv"

[fit]
kind = "g2"
data_csv = "data/g2.csv"
background_rho = 0.9753

[verify]
f_values = [0.5, 2.0]
tolerance = 0.05
)";

}  // namespace

TEST_CASE("toml subset parses tables, arrays and scalars", "[config]") {
  const auto doc = parse_toml_lite(R"(
# comment
title = "ring study"   # trailing comment
count = 3
ratio = 0.5
big = 1e7
on = true
off = false
list = [1, 2, 3]
names = ["a", "b"]
top.nested = 1

[table]
x = 2.5
sub.y = "deep"

[table.child]
z = -3

[[runs]]
tag = "first"

[[runs]]
tag = "second"
)");
  CHECK(doc.at("title") == "ring study");
  CHECK(doc.at("count") == 3);
  CHECK(doc.at("ratio") == 0.5);
  CHECK(doc.at("big") == 1e7);
  CHECK(doc.at("on") == true);
  CHECK(doc.at("off") == false);
  CHECK(doc.at("list") == json({1, 2, 3}));
  CHECK(doc.at("names") == json({"a", "b"}));
  CHECK(doc.at("top").at("nested") == 1);
  CHECK(doc.at("table").at("x") == 2.5);
  CHECK(doc.at("table").at("sub").at("y") == "deep");
  CHECK(doc.at("table").at("child").at("z") == -3);
  REQUIRE(doc.at("runs").size() == 2);
  CHECK(doc.at("runs")[0].at("tag") == "first");
  CHECK(doc.at("runs")[1].at("tag") == "second");
}

TEST_CASE("toml subset strings support escapes and embedded symbols",
          "[config]") {
  const auto doc = parse_toml_lite(
      "a = \"with # hash and = sign\"\n"
      "b = \"tab\\tquote\\\" done\"\n");
  CHECK(doc.at("a") == "with # hash and = sign");
  CHECK(doc.at("b") == "tab\tquote\" done");
}

TEST_CASE("toml subset rejects unsupported constructs", "[config]") {
  CHECK_THROWS_AS(parse_toml_lite("x = {a = 1}"), ConfigError);
  CHECK_THROWS_AS(parse_toml_lite("x = 1\nx = 2"), ConfigError);
  CHECK_THROWS_AS(parse_toml_lite("x = [1, \"a\"]"), ConfigError);
  CHECK_THROWS_AS(parse_toml_lite("x = \"unterminated"), ConfigError);
  CHECK_THROWS_AS(parse_toml_lite("just a line"), ConfigError);
  CHECK_THROWS_AS(parse_toml_lite("x = 2026-08-14"), ConfigError);
  CHECK_THROWS_AS(parse_toml_lite("x = \"bad \\q escape\""), ConfigError);
  CHECK_THROWS_AS(parse_toml_lite("[table\nx = 1"), ConfigError);
  CHECK_THROWS_AS(parse_toml_lite("bad key = 1"), ConfigError);
  CHECK_THROWS_AS(parse_toml_lite("x = 1\n[x]\ny = 2"), ConfigError);
}

TEST_CASE("run config parses every section", "[config]") {
  const auto cfg = parse_run_config(parse_toml_lite(kFullToml), "/data");

  REQUIRE(cfg.resonator.has_value());
  CHECK(cfg.resonator->center_wavelength == 610.0);
  CHECK(cfg.resonator->q_scatter.has_value());
  CHECK(cfg.resonator->cavity_index == 2.0);
  REQUIRE(cfg.emitter.has_value());
  CHECK(cfg.emitter->label == "hbn_rt");
  CHECK(cfg.emitter->zpl_fwhm == 7.2);

  CHECK(cfg.detuning == 0.35);
  CHECK(cfg.overlap == 0.44);
  CHECK(cfg.directions == Collection::one);
  CHECK(cfg.misalignment.present);
  CHECK_THAT(cfg.misalignment.angle_sigma,
             Catch::Matchers::WithinRel(5.0 * std::numbers::pi / 180.0, 1e-12));
  CHECK(cfg.misalignment.samples == 0);

  CHECK(cfg.path_efficiencies.eta_out.value == 0.078);
  CHECK(cfg.path_efficiencies.eta_out.sigma == 0.004);
  CHECK(cfg.path_efficiencies.eta_facet.value == 0.8);
  CHECK(cfg.path_efficiencies.eta_facet.sigma == 0.0);
  CHECK(cfg.path_efficiencies.eta_side.value == 1.0);

  REQUIRE(cfg.sweep.present);
  CHECK(cfg.sweep.task == "grid");
  CHECK(cfg.sweep.presets == std::vector<std::string>{"hbn_cryo", "wse2"});
  REQUIRE(cfg.sweep.axes.size() == 2);
  CHECK(cfg.sweep.axes[0].name == "q_loaded");
  REQUIRE(cfg.sweep.axes[0].values.size() == 7);
  CHECK_THAT(cfg.sweep.axes[0].values.front(),
             Catch::Matchers::WithinRel(1e3, 1e-12));
  CHECK_THAT(cfg.sweep.axes[0].values.back(),
             Catch::Matchers::WithinRel(1e6, 1e-12));
  CHECK_THAT(cfg.sweep.axes[0].values[1] / cfg.sweep.axes[0].values[0],
             Catch::Matchers::WithinRel(std::pow(10.0, 0.5), 1e-9));
  CHECK(cfg.sweep.axes[1].values == std::vector<double>{0.1, 0.5, 1.0});

  CHECK(cfg.synthesize.present);
  CHECK(cfg.synthesize.points == 1201);
  CHECK(cfg.synthesize.exposure == 2000.0);
  CHECK(cfg.calibrate.present);
  CHECK(cfg.fit.present);
  CHECK(cfg.fit.kind == "g2");
  REQUIRE(cfg.fit.background_rho.has_value());
  CHECK(*cfg.fit.background_rho == 0.9753);

  CHECK(cfg.verify.f_values == std::vector<double>{0.5, 2.0});
  CHECK(cfg.verify.dephasing_ratios == std::vector<double>{0.0, 1.0, 10.0});
  CHECK(cfg.verify.tolerance == 0.05);
  CHECK(cfg.seed == 42);
  CHECK(cfg.base_dir == "/data");
  CHECK(resolve_config_path(cfg, "x.csv") ==
        (std::filesystem::path("/data") / "x.csv").string());
  CHECK(resolve_config_path(cfg, "/abs/x.csv") == "/abs/x.csv");
}

TEST_CASE("json and toml configs produce the same run config", "[config]") {
  const json doc = {
      {"seed", 7},
      {"resonator",
       {{"center_wavelength", 610.0},
        {"group_index_times_length", 177190.476},
        {"q_intrinsic", 3560.0},
        {"q_coupling", 9700.0},
        {"mode_volume", 30.0}}},
      {"emitter", {{"preset", "wse2"}}},
      {"coupling", {{"overlap", 0.5}, {"directions", "both"}}},
  };
  const auto from_json = parse_run_config(doc, ".");
  const auto from_toml = parse_run_config(parse_toml_lite(R"(
seed = 7
[resonator]
center_wavelength = 610.0
group_index_times_length = 177190.476
q_intrinsic = 3560.0
q_coupling = 9700.0
mode_volume = 30.0
[emitter]
preset = "wse2"
[coupling]
overlap = 0.5
directions = "both"
)"),
                                          ".");
  CHECK(from_json.seed == from_toml.seed);
  CHECK(from_json.resonator->q_coupling == from_toml.resonator->q_coupling);
  CHECK(from_json.emitter->zpl_wavelength == from_toml.emitter->zpl_wavelength);
  CHECK(from_json.overlap == from_toml.overlap);
  CHECK(from_json.directions == from_toml.directions);
}

TEST_CASE("unknown keys are rejected at every level", "[config]") {
  auto patched = [&](const std::string& extra_line,
                     const std::string& after_header) {
    std::string text(kFullToml);
    const auto pos = text.find(after_header);
    REQUIRE(pos != std::string::npos);
    text.insert(pos + after_header.size(), "\n" + extra_line);
    return text;
  };
  CHECK_THROWS_AS(parse_run_config(parse_toml_lite("typo = 1")), ConfigError);
  for (const auto& [line, header] :
       std::vector<std::pair<std::string, std::string>>{
           {"typo = 1", "[resonator]"},
           {"typo = 1", "[emitter]"},
           {"typo = 1", "[coupling]"},
           {"typo = 1", "[coupling.misalignment]"},
           {"typo = 1", "[path_efficiencies]"},
           {"typo = 1", "[sweep]"},
           {"typo = 1", "[[sweep.axis]]"},
           {"typo = 1", "[synthesize]"},
           {"typo = 1", "[calibrate]"},
           {"typo = 1", "[fit]"},
           {"typo = 1", "[verify]"},
       }) {
    CAPTURE(header);
    CHECK_THROWS_AS(parse_run_config(parse_toml_lite(patched(line, header))),
                    ConfigError);
  }
}

TEST_CASE("config validation catches bad values", "[config]") {
  auto cfg_with = [](const std::string& body) {
    return parse_run_config(parse_toml_lite(body));
  };
  CHECK_THROWS_AS(cfg_with("[resonator]\ncenter_wavelength = 610.0"),
                  ConfigError);
  CHECK_THROWS_AS(cfg_with("[emitter]\npreset = \"nope\""), ConfigError);
  CHECK_THROWS_AS(cfg_with("[emitter]\nzpl_wavelength = 610.0"), ConfigError);
  CHECK_THROWS_AS(cfg_with("[coupling]\noverlap = 1.5"), ConfigError);
  CHECK_THROWS_AS(cfg_with("[coupling]\ndirections = \"sideways\""),
                  ConfigError);
  CHECK_THROWS_AS(cfg_with("[path_efficiencies]\neta_out = [0.5, 0.1, 0.2]"),
                  ConfigError);
  CHECK_THROWS_AS(cfg_with("[path_efficiencies]\neta_out = 1.5"), ConfigError);
  CHECK_THROWS_AS(cfg_with("[sweep]\ntask = \"grid\""), ConfigError);
  CHECK_THROWS_AS(cfg_with("[sweep]\ntask = \"walk\""), ConfigError);
  CHECK_THROWS_AS(
      cfg_with("[sweep]\ntask = \"optimize_q_coupling\"\n[sweep.optimize]\n"
               "q_coupling_min = 10.0\nq_coupling_max = 5.0"),
      ConfigError);
  CHECK_THROWS_AS(
      cfg_with("[[sweep.axis]]\nname = \"overlap\"\nvalues = [0.5]\nmin = 0.1\n"
               "max = 1.0\npoints = 3"),
      ConfigError);
  CHECK_THROWS_AS(
      cfg_with("[[sweep.axis]]\nname = \"overlap\"\nmin = -1.0\nmax = 1.0\n"
               "points = 3\nscale = \"log\""),
      ConfigError);
  CHECK_THROWS_AS(cfg_with("[synthesize]\nmin_wavelength = 616.0\n"
                           "max_wavelength = 604.0\npoints = 100"),
                  ConfigError);
  CHECK_THROWS_AS(cfg_with("[fit]\nkind = \"comb\""), ConfigError);
  CHECK_THROWS_AS(cfg_with("[fit]\nkind = \"mystery\"\ndata_csv = \"x.csv\""),
                  ConfigError);
  CHECK_THROWS_AS(
      cfg_with("[fit]\nkind = \"thickness\"\ndata_csv = \"x.csv\""),
      ConfigError);
  CHECK_THROWS_AS(
      cfg_with("[fit]\nkind = \"g2\"\ndata_csv = \"x.csv\"\nbackground_rho = 1.2"),
      ConfigError);
  CHECK_THROWS_AS(cfg_with("[verify]\ntolerance = -0.1"), ConfigError);
  CHECK_THROWS_AS(cfg_with("seed = -3"), ConfigError);
  CHECK_THROWS_AS(cfg_with("seed = 1.5"), ConfigError);
}

TEST_CASE("load_run_config dispatches on extension", "[config]") {
  const auto toml_path = write_temp("purcellkit_cfg_test.toml",
                                    "[emitter]\npreset = \"hbn_rt\"\n");
  const auto json_path = write_temp("purcellkit_cfg_test.json",
                                    R"({"emitter": {"preset": "hbn_rt"}})");
  const auto bad_path = write_temp("purcellkit_cfg_test.txt", "x = 1\n");

  CHECK(load_run_config(toml_path).emitter->label == "hbn_rt");
  CHECK(load_run_config(json_path).emitter->label == "hbn_rt");
  CHECK_THROWS_AS(load_run_config(bad_path), ConfigError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/cfg.toml"), ConfigError);

  const auto broken = write_temp("purcellkit_cfg_bad.json", "{not json");
  CHECK_THROWS_AS(load_run_config(broken), ConfigError);

  std::filesystem::remove(toml_path);
  std::filesystem::remove(json_path);
  std::filesystem::remove(bad_path);
  std::filesystem::remove(broken);
}

TEST_CASE("effective overlap folds in placement statistics", "[config]") {
  RunConfig cfg;
  cfg.overlap = 0.44;
  CHECK(effective_overlap(cfg, 1) == 0.44);

  cfg.misalignment.present = true;
  cfg.misalignment.position_sigma = 100.0;
  cfg.misalignment.angle_sigma = 5.0 * std::numbers::pi / 180.0;
  cfg.misalignment.waist = 450.0;
  const double closed = misalignment_overlap_closed_form(
      100.0, 5.0 * std::numbers::pi / 180.0, 450.0);
  CHECK_THAT(effective_overlap(cfg, 1),
             Catch::Matchers::WithinRel(0.44 * closed, 1e-12));

  cfg.misalignment.samples = 20000;
  const double mc = effective_overlap(cfg, 123);
  CHECK_THAT(mc, Catch::Matchers::WithinRel(0.44 * closed, 0.02));
  CHECK(effective_overlap(cfg, 123) == mc);  // same seed, same draw

  CHECK_THROWS_AS(coupled_system_from(RunConfig{}, 0), ConfigError);
}
