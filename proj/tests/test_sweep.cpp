#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "purcellkit/sweep.hpp"
#include "test_support.hpp"

using namespace purcellkit;

namespace {

ResonatorSpec open_ring(double q_intrinsic) {
  ResonatorSpec r;
  r.center_wavelength = 610.0;
  r.group_index_times_length = 610.0 * 610.0 / 2.1;
  r.q_intrinsic = q_intrinsic;
  r.q_coupling = 1e4;
  r.mode_volume = 30.0;
  r.reference_resonance = 610.0;
  return r;
}

CoupledSystem ideal_system(const std::string& preset, double q_intrinsic) {
  CoupledSystem sys;
  sys.resonator = open_ring(q_intrinsic);
  sys.emitter = emitter_preset(preset);
  sys.overlap_factor = 1.0;
  sys.directions = Collection::both;
  return sys;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) *
                                       static_cast<double>(i) /
                                       static_cast<double>(n - 1));
  return v;
}

const SweepRow& row_at(const SweepResult& sweep, double coord) {
  const SweepRow* found = nullptr;
  double dist = 1e300;
  for (const auto& row : sweep.rows) {
    const double d = std::abs(row.coords[0] - coord);
    if (d < dist) {
      dist = d;
      found = &row;
    }
  }
  REQUIRE(found != nullptr);
  return *found;
}

}  // namespace

TEST_CASE("loaded-Q axis back-solves the coupling budget", "[sweep]") {
  CoupledSystem sys = ideal_system("hbn_rt", 3560.0);
  sys.resonator.q_scatter = 3605.11;

  SweepAxis axis;
  axis.name = "q_loaded";
  axis.values = {1000.0, 1512.0, 1700.0, 2500.0};
  const auto sweep = run_sweep(sys, {axis});
  REQUIRE(sweep.rows.size() == 4);

  // 1/3560 + 1/3605.11 caps the loaded Q near 1791
  CHECK(sweep.invalid == 1);
  CHECK_FALSE(sweep.rows[3].ok);
  CHECK_FALSE(sweep.rows[3].note.empty());
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(sweep.rows[i].ok);
    CHECK_THAT(sweep.rows[i].metrics.q_loaded,
               Catch::Matchers::WithinRel(axis.values[i], 1e-9));
  }
  CHECK_THAT(row_at(sweep, 1512.0).metrics.eta_out,
             Catch::Matchers::WithinAbs(1512.0 / 9700.0, 1e-4));
}

TEST_CASE("efficiency versus loaded Q has the documented shape", "[sweep]") {
  const CoupledSystem sys = ideal_system("hbn_cryo", 1e7);

  SweepAxis axis;
  axis.name = "q_loaded";
  axis.values = log_grid(1e3, 3e6, 121);
  axis.values.push_back(1e4);
  std::sort(axis.values.begin(), axis.values.end());

  const auto sweep = run_sweep(sys, {axis});
  REQUIRE(sweep.invalid == 0);

  CHECK_THAT(row_at(sweep, 1e4).metrics.eta_total,
             Catch::Matchers::WithinAbs(0.955, 0.02));

  std::size_t best = 0;
  for (std::size_t i = 0; i < sweep.rows.size(); ++i)
    if (sweep.rows[i].metrics.eta_total > sweep.rows[best].metrics.eta_total)
      best = i;
  const double q_best = sweep.rows[best].coords[0];
  const double q_emitter = emitter_q(emitter_preset("hbn_cryo"));
  CHECK(q_best >= 1e4);
  CHECK(q_best <= q_emitter);
  CHECK(sweep.rows.back().metrics.eta_total <
        sweep.rows[best].metrics.eta_total);
}

TEST_CASE("a dim broad emitter needs high Q before saturating", "[sweep]") {
  const CoupledSystem sys = ideal_system("wse2", 1e7);

  SweepAxis axis;
  axis.name = "q_loaded";
  axis.values = log_grid(1e3, 1e6, 61);
  axis.values.push_back(1e4);
  axis.values.push_back(1e5);
  std::sort(axis.values.begin(), axis.values.end());

  const auto sweep = run_sweep(sys, {axis});
  double eta_max = 0.0;
  for (const auto& row : sweep.rows)
    eta_max = std::max(eta_max, row.metrics.eta_total);

  CHECK(row_at(sweep, 1e4).metrics.eta_total <= 0.75 * eta_max);
  CHECK(row_at(sweep, 1e5).metrics.eta_total >= 0.9 * eta_max);
}

TEST_CASE("two-axis sweeps enumerate the grid with the last axis fastest",
          "[sweep]") {
  CoupledSystem sys = ideal_system("hbn_rt", 3560.0);

  SweepAxis q_axis{"q_loaded", {800.0, 1200.0}};
  SweepAxis ov_axis{"overlap", {0.2, 0.5, 0.9}};
  const auto sweep = run_sweep(sys, {q_axis, ov_axis});
  REQUIRE(sweep.rows.size() == 6);
  CHECK(sweep.axis_names ==
        std::vector<std::string>{"q_loaded", "overlap"});
  CHECK(sweep.rows[0].coords == std::vector<double>{800.0, 0.2});
  CHECK(sweep.rows[1].coords == std::vector<double>{800.0, 0.5});
  CHECK(sweep.rows[3].coords == std::vector<double>{1200.0, 0.2});

  for (std::size_t k = 0; k < 6; k += 3) {
    CHECK(sweep.rows[k].metrics.eta_total <
          sweep.rows[k + 1].metrics.eta_total);
    CHECK(sweep.rows[k + 1].metrics.eta_total <
          sweep.rows[k + 2].metrics.eta_total);
  }

  SECTION("axis validation") {
    CHECK_THROWS_AS(run_sweep(sys, {}), std::invalid_argument);
    CHECK_THROWS_AS(run_sweep(sys, {SweepAxis{"q_loaded", {}}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(run_sweep(sys, {SweepAxis{"bogus", {1.0}}}),
                    std::invalid_argument);
  }
}

TEST_CASE("sweep rows serialize to csv", "[sweep]") {
  CoupledSystem sys = ideal_system("hbn_rt", 3560.0);
  SweepAxis axis{"q_loaded", {1000.0, 4000.0}};
  const auto sweep = run_sweep(sys, {axis});

  const std::string path = "sweep_test_out.csv";
  write_sweep_csv(path, sweep);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string header, line1, line2;
  std::getline(in, header);
  std::getline(in, line1);
  std::getline(in, line2);
  std::remove(path.c_str());

  CHECK(header.find("q_loaded,q_loaded,purcell,") == 0);
  CHECK(header.find("eta_total") != std::string::npos);
  CHECK(line1.find("1000,") == 0);
  CHECK(line1.find(",bad-emitter,1,") != std::string::npos);
  CHECK(line2.find("4000,") == 0);
  CHECK(line2.find(",0,") != std::string::npos);
  CHECK(std::count(line2.begin(), line2.end(), ',') ==
        std::count(header.begin(), header.end(), ','));
}

TEST_CASE("preset ranking at a mid-range loaded Q", "[sweep]") {
  CoupledSystem sys = ideal_system("hbn_rt", 1e7);
  apply_axis(sys, "q_loaded", 1e4);

  const auto ranks = rank_presets(sys);
  REQUIRE(ranks.size() == emitter_preset_names().size());
  std::vector<std::string> order;
  for (const auto& r : ranks) order.push_back(r.preset);
  CHECK(order == std::vector<std::string>{"hbn_cryo", "mote2_1500",
                                          "mote2_1100", "wse2", "hbn_rt"});
  for (std::size_t i = 1; i < ranks.size(); ++i)
    CHECK(ranks[i - 1].metrics.eta_total > ranks[i].metrics.eta_total);
  CHECK_THAT(ranks[0].metrics.eta_total,
             Catch::Matchers::WithinAbs(0.9555, 0.005));
}

TEST_CASE("coupling-Q optimization finds the efficiency peak", "[sweep]") {
  const CoupledSystem sys = ideal_system("hbn_cryo", 1e6);

  const auto opt = optimize_q_coupling(sys, 1e3, 1e8);
  CHECK(opt.unimodal);
  CHECK(opt.eta > 0.8);
  CHECK(opt.evaluations >= 101);
  CHECK_THAT(opt.eta, Catch::Matchers::WithinRel(opt.best.eta_total, 1e-12));

  SECTION("optimum is stable against the scan range") {
    const auto opt2 = optimize_q_coupling(sys, 2e3, 5e7);
    CHECK_THAT(opt2.q_coupling,
               Catch::Matchers::WithinRel(opt.q_coupling, 1e-3));
  }

  SECTION("matches a dense scan") {
    const auto grid = log_grid(1e3, 1e8, 3001);
    double best_eta = -1.0, best_qc = 0.0;
    for (double qc : grid) {
      CoupledSystem probe = sys;
      probe.resonator.q_coupling = qc;
      const double eta = total_efficiency(probe).eta_total;
      if (eta > best_eta) {
        best_eta = eta;
        best_qc = qc;
      }
    }
    const double log_step = std::log(1e8 / 1e3) / 3000.0;
    CHECK(std::abs(std::log(opt.q_coupling / best_qc)) <= log_step);
    CHECK(opt.eta >= best_eta - 1e-9);
  }

  SECTION("ceiling improves with the intrinsic Q") {
    const auto lo = optimize_q_coupling(ideal_system("hbn_cryo", 1e4), 1e3, 1e8);
    const auto mid = optimize_q_coupling(ideal_system("hbn_cryo", 1e5), 1e3, 1e8);
    CHECK(lo.eta < mid.eta);
    CHECK(mid.eta < opt.eta);
  }

  SECTION("range validation") {
    CHECK_THROWS_AS(optimize_q_coupling(sys, 0.0, 1e6), std::domain_error);
    CHECK_THROWS_AS(optimize_q_coupling(sys, 1e6, 1e5), std::invalid_argument);
  }
}

TEST_CASE("coupling-Q optimization beats random probes",
          "[sweep][property]") {
  testsupport::Rng rng(0x09f7e11u);
  const auto presets = emitter_preset_names();
  for (int i = 0; i < 1000; ++i) {
    CoupledSystem sys;
    const double qi = rng.log_uniform(2e3, 1e7);
    sys.resonator = open_ring(qi);
    sys.emitter = emitter_preset(presets[static_cast<std::size_t>(i) %
                                         presets.size()]);
    sys.overlap_factor = rng.uniform(0.05, 1.0);
    sys.directions = Collection::both;

    const double lo = qi * 1e-2, hi = qi * 1e3;
    CAPTURE(i, qi, sys.overlap_factor, sys.emitter.label);
    const auto opt = optimize_q_coupling(sys, lo, hi);
    REQUIRE(opt.eta == opt.best.eta_total);
    REQUIRE(opt.q_coupling >= lo);
    REQUIRE(opt.q_coupling <= hi);
    if (!opt.unimodal) continue;
    for (int k = 0; k < 10; ++k) {
      CoupledSystem probe = sys;
      probe.resonator.q_coupling = rng.log_uniform(lo, hi);
      REQUIRE(opt.eta >=
              total_efficiency(probe).eta_total - 1e-6 * std::abs(opt.eta));
    }
  }
}
