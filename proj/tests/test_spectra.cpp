#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "purcellkit/spectra.hpp"
#include "test_support.hpp"

using namespace purcellkit;
using testsupport::Rng;
using testsupport::linspace;

namespace {

CoupledSystem device_with_f(double f_spectral, double detuning,
                            Collection dirs = Collection::one) {
  CoupledSystem sys;
  sys.resonator.center_wavelength = 610.0;
  sys.resonator.group_index_times_length = 610.0 * 610.0 / 2.1;
  sys.resonator.q_intrinsic = 3560.0;
  sys.resonator.q_coupling = 9700.0;
  sys.resonator.q_scatter = 1.0 / (1.0 / 1512.0 - 1.0 / 3560.0 - 1.0 / 9700.0);
  sys.resonator.mode_volume = 30.0;
  sys.emitter = emitter_preset("hbn_rt");
  sys.detuning = detuning;
  sys.directions = dirs;
  // overlap chosen so purcell_good * overlap hits the requested ratio level
  sys.overlap_factor = f_spectral / purcell_good(1512.0, 30.0);
  return sys;
}

double fwhm_around(const std::vector<double>& x, const std::vector<double>& y,
                   double center, double halfspan) {
  std::size_t peak = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i] - center) > halfspan) continue;
    if (y[i] > best) {
      best = y[i];
      peak = i;
    }
  }
  const double half = best / 2.0;
  auto cross = [&](int dir) {
    std::size_t i = peak;
    while (true) {
      const std::size_t j = dir > 0 ? i + 1 : i - 1;
      if (j >= x.size()) return x[i];
      if (y[j] <= half) {
        const double t = (y[i] - half) / (y[i] - y[j]);
        return x[i] + t * (x[j] - x[i]);
      }
      i = j;
      if (i == 0) return x[0];
    }
  };
  return cross(+1) - cross(-1);
}

}  // namespace

TEST_CASE("spectrum CSV round-trip", "[spectra]") {
  auto sys = device_with_f(0.86, 0.0);
  auto model = spectral_model(sys, 606.0, 614.0);
  auto [fs, wg] = synthesize_spectra(model, linspace(606.0, 614.0, 801));
  wg.exposure = 2.5;

  auto tmp = std::filesystem::temp_directory_path() / "pk_spectrum_rt.csv";
  write_spectrum_csv(tmp.string(), wg);
  auto back = read_spectrum_csv(tmp.string());
  REQUIRE(back.wavelength.size() == wg.wavelength.size());
  CHECK(back.channel == "waveguide");
  CHECK(back.exposure == 2.5);
  for (std::size_t i = 0; i < wg.wavelength.size(); ++i) {
    REQUIRE(back.wavelength[i] == Catch::Approx(wg.wavelength[i]).epsilon(1e-10));
    REQUIRE(back.intensity[i] ==
            Catch::Approx(wg.intensity[i]).margin(1e-15).epsilon(1e-10));
  }
  std::filesystem::remove(tmp);

  SECTION("malformed rows are rejected") {
    auto bad = std::filesystem::temp_directory_path() / "pk_bad.csv";
    {
      std::ofstream out(bad);
      out << "wavelength_nm,intensity\n610.0,1.0\nnot,a number\n";
    }
    CHECK_THROWS_AS(read_spectrum_csv(bad.string()), std::runtime_error);
    std::filesystem::remove(bad);
  }
}

TEST_CASE("synthesis conserves the ZPL envelope", "[spectra]") {
  auto sys = device_with_f(0.86, 0.0);
  auto grid = linspace(604.0, 616.0, 2401);
  auto model = spectral_model(sys, 604.0, 616.0);
  auto [fs, wg] = synthesize_spectra(model, grid);
  auto zpl = zpl_spectrum(sys.emitter, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    REQUIRE(fs.intensity[i] + wg.intensity[i] / model.eta_out ==
            Catch::Approx(zpl[i]).epsilon(1e-12));
    REQUIRE(fs.intensity[i] >= 0.0);
    REQUIRE(wg.intensity[i] >= 0.0);
  }
}

TEST_CASE("waveguide channel is cavity-filtered", "[spectra]") {
  auto grid = linspace(604.0, 616.0, 9601);

  SECTION("weak enhancement: isolated line width matches the cavity") {
    auto sys = device_with_f(0.1, 0.0);
    auto model = spectral_model(sys, 609.0, 611.0);
    REQUIRE(model.comb.centers.size() == 1);
    auto narrow_grid = linspace(609.0, 611.0, 4001);
    auto [fs, wg] = synthesize_spectra(model, narrow_grid);
    const double width = fwhm_around(narrow_grid, wg.intensity, 610.0, 1.0);
    const double cavity = 610.0 / model.comb.q_loaded;
    CHECK(std::abs(width - cavity) / cavity < 0.05);
  }

  SECTION("device-level enhancement: much narrower than the bare ZPL") {
    auto sys = device_with_f(0.86, 0.0);
    auto model = spectral_model(sys, 604.0, 616.0);
    auto [fs, wg] = synthesize_spectra(model, grid);
    const double width = fwhm_around(grid, wg.intensity, 610.0, 1.0);
    CHECK(width * 5.0 < 7.2);
  }
}

TEST_CASE("extraction inverts synthesis", "[spectra]") {
  const double fsr_nm = 2.1;
  for (double f : {0.1, 1.0, 10.0}) {
    for (double det : {0.0, 0.35, fsr_nm / 2.0}) {
      CAPTURE(f, det);
      auto sys = device_with_f(f, det);
      auto model = spectral_model(sys, 604.0, 616.0);
      auto grid = linspace(604.0, 616.0, 2401);
      auto [fs, wg] = synthesize_spectra(model, grid);

      PathEfficiencies eff;
      eff.eta_out.value = model.eta_out;
      auto res = extract_spectral_purcell(fs, wg, eff);

      // ground truth at the comb line nearest the ZPL center
      double line = 0.0, best = 1e9;
      for (double c : model.comb.centers) {
        if (std::abs(c - 610.0) < best) {
          best = std::abs(c - 610.0);
          line = c;
        }
      }
      const double truth = model.f_spectral * comb_profile(model.comb, line);

      REQUIRE(std::abs(res.f_s_peak - truth) / truth < 0.02);
      REQUIRE(std::abs(std::abs(res.detuning) - det) < 0.02);
      REQUIRE(res.beta_s_peak ==
              Catch::Approx(res.f_s_peak / (1.0 + res.f_s_peak)).epsilon(1e-12));
      REQUIRE(std::abs(res.zpl_center - 610.0) < 0.05);
      REQUIRE(res.beta_integrated > 0.0);
      REQUIRE(res.beta_integrated <= res.beta_s_peak * 1.02);
    }
  }
}

TEST_CASE("nonideal collection paths cancel in the ratio", "[spectra]") {
  auto sys = device_with_f(0.86, 0.35);
  auto model = spectral_model(sys, 606.0, 614.0);
  auto grid = linspace(606.0, 614.0, 1601);
  auto [fs, wg] = synthesize_spectra(model, grid);

  PathEfficiencies unit;
  unit.eta_out.value = model.eta_out;
  auto ref = extract_spectral_purcell(fs, wg, unit);

  PathEfficiencies eff;
  eff.eta_out.value = model.eta_out;
  eff.eta_facet.value = 0.5;
  eff.eta_side.value = 0.8;
  eff.eta_objective.value = 0.9;
  eff.eta_top.value = 0.7;
  Spectrum fs_m = fs, wg_m = wg;
  for (auto& v : fs_m.intensity) v *= eff.eta_objective.value * eff.eta_top.value;
  for (auto& v : wg_m.intensity) v *= eff.eta_facet.value * eff.eta_side.value;

  auto res = extract_spectral_purcell(fs_m, wg_m, eff);
  CHECK(res.f_s_peak == Catch::Approx(ref.f_s_peak).epsilon(1e-10));
  CHECK(res.beta_integrated == Catch::Approx(ref.beta_integrated).epsilon(1e-10));
}

TEST_CASE("ratio is invariant under common scaling", "[spectra][property]") {
  Rng rng(401);
  for (int i = 0; i < 1000; ++i) {
    const double f = rng.log_uniform(0.05, 20.0);
    const double scale = rng.log_uniform(1e-3, 1e3);
    CAPTURE(f, scale);
    auto sys = device_with_f(f, 0.0);
    auto model = spectral_model(sys, 608.0, 612.0);
    auto grid = linspace(608.0, 612.0, 301);
    auto [fs, wg] = synthesize_spectra(model, grid);

    PathEfficiencies eff;
    eff.eta_out.value = model.eta_out;
    auto ref = extract_spectral_purcell(fs, wg, eff);

    for (auto& v : fs.intensity) v *= scale;
    for (auto& v : wg.intensity) v *= scale;
    auto scaled = extract_spectral_purcell(fs, wg, eff);
    REQUIRE(testsupport::close_rel(scaled.f_s_peak, ref.f_s_peak, 1e-11));
    REQUIRE(testsupport::close_rel(scaled.beta_integrated, ref.beta_integrated,
                                   1e-11));
  }
}

TEST_CASE("uncertainty grows with every path term", "[spectra][property]") {
  auto sys = device_with_f(0.86, 0.0);
  auto model = spectral_model(sys, 606.0, 614.0);
  auto grid = linspace(606.0, 614.0, 801);
  auto [fs, wg] = synthesize_spectra(model, grid);

  PathEfficiencies base;
  base.eta_out.value = model.eta_out;
  auto clean = extract_spectral_purcell(fs, wg, base);
  REQUIRE(clean.f_s_peak_sigma == 0.0);
  REQUIRE(clean.beta_s_peak_sigma == 0.0);

  Rng rng(402);
  for (int i = 0; i < 1000; ++i) {
    PathEfficiencies eff = base;
    eff.eta_out.sigma = rng.uniform(0.0, 0.05);
    eff.eta_facet.sigma = rng.uniform(0.0, 0.05);
    eff.eta_side.sigma = rng.uniform(0.0, 0.05);
    eff.eta_objective.sigma = rng.uniform(0.0, 0.05);
    eff.eta_top.sigma = rng.uniform(0.0, 0.05);
    auto a = extract_spectral_purcell(fs, wg, eff);
    PathEfficiencies more = eff;
    more.eta_top.sigma += 0.01;
    auto b = extract_spectral_purcell(fs, wg, more);
    CAPTURE(eff.eta_top.sigma);
    REQUIRE(b.f_s_peak_sigma > a.f_s_peak_sigma);
    REQUIRE(a.f_s_peak_sigma >= 0.0);
    REQUIRE(a.beta_s_peak_sigma <= a.f_s_peak_sigma);
  }

  SECTION("shot noise enters through exposures") {
    Spectrum fs_c = fs, wg_c = wg;
    fs_c.exposure = 1e4;
    wg_c.exposure = 1e4;
    auto shot = extract_spectral_purcell(fs_c, wg_c, base);
    REQUIRE(shot.f_s_peak_sigma > 0.0);
    fs_c.exposure = 4e4;
    wg_c.exposure = 4e4;
    auto brighter = extract_spectral_purcell(fs_c, wg_c, base);
    REQUIRE(brighter.f_s_peak_sigma < shot.f_s_peak_sigma);
  }
}

TEST_CASE("extraction failure modes", "[spectra]") {
  auto sys = device_with_f(0.86, 0.0);
  auto model = spectral_model(sys, 606.0, 614.0);
  auto [fs, wg] = synthesize_spectra(model, linspace(606.0, 614.0, 801));

  SECTION("non-overlapping ranges") {
    Spectrum shifted = wg;
    for (auto& w : shifted.wavelength) w += 100.0;
    PathEfficiencies eff;
    CHECK_THROWS_AS(extract_spectral_purcell(fs, shifted, eff),
                    std::domain_error);
  }

  SECTION("dead free-space pixels are excluded with a warning") {
    Spectrum holey = fs;
    for (std::size_t i = 0; i < holey.wavelength.size(); ++i)
      if (holey.wavelength[i] > 612.5) holey.intensity[i] = 0.0;
    PathEfficiencies eff;
    eff.eta_out.value = model.eta_out;
    auto res = extract_spectral_purcell(holey, wg, eff);
    CHECK(res.excluded > 0);
    REQUIRE_FALSE(res.warnings.empty());
    CHECK(std::isfinite(res.f_s_peak));
    CHECK(res.f_s_peak == Catch::Approx(0.86).epsilon(0.05));
  }

  SECTION("invalid path efficiencies") {
    PathEfficiencies eff;
    eff.eta_facet.value = 0.0;
    CHECK_THROWS_AS(extract_spectral_purcell(fs, wg, eff), std::domain_error);
    eff.eta_facet.value = 1.5;
    CHECK_THROWS_AS(extract_spectral_purcell(fs, wg, eff), std::domain_error);
    eff.eta_facet.value = 1.0;
    eff.eta_top.sigma = -0.1;
    CHECK_THROWS_AS(extract_spectral_purcell(fs, wg, eff), std::domain_error);
  }
}

TEST_CASE("integrated beta equals a direct quadrature", "[spectra]") {
  auto sys = device_with_f(0.86, 0.0);
  auto model = spectral_model(sys, 604.0, 616.0);
  auto grid = linspace(604.0, 616.0, 4801);
  auto [fs, wg] = synthesize_spectra(model, grid);
  PathEfficiencies eff;
  eff.eta_out.value = model.eta_out;
  auto res = extract_spectral_purcell(fs, wg, eff);

  // independent evaluation straight from the model, finer grid
  auto fine = linspace(604.0, 616.0, 48001);
  auto zpl = zpl_spectrum(sys.emitter, fine);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i + 1 < fine.size(); ++i) {
    auto beta_at = [&](std::size_t j) {
      const double fv = model.f_spectral * comb_profile(model.comb, fine[j]);
      return fv / (1.0 + fv);
    };
    const double h = fine[i + 1] - fine[i];
    num += 0.5 * (beta_at(i) * zpl[i] + beta_at(i + 1) * zpl[i + 1]) * h;
    den += 0.5 * (zpl[i] + zpl[i + 1]) * h;
  }
  CHECK(res.beta_integrated == Catch::Approx(num / den).epsilon(2e-3));
}

TEST_CASE("background-corrected purity", "[spectra]") {
  auto r = background_corrected_purity(0.22, 0.9753);
  CHECK(r.g2_corrected == Catch::Approx(0.18).margin(1e-3));
  CHECK_FALSE(r.clamped);

  auto clamped = background_corrected_purity(0.1, 0.5);
  CHECK(clamped.g2_corrected == 0.0);
  CHECK(clamped.clamped);

  auto ideal = background_corrected_purity(0.0, 1.0);
  CHECK(ideal.g2_corrected == 0.0);
  CHECK_FALSE(ideal.clamped);

  CHECK_THROWS_AS(background_corrected_purity(0.22, 0.0), std::domain_error);
  CHECK_THROWS_AS(background_corrected_purity(0.22, 1.1), std::domain_error);
  CHECK_THROWS_AS(background_corrected_purity(-0.1, 0.9), std::domain_error);
}

TEST_CASE("purity correction properties", "[spectra][property]") {
  Rng rng(403);
  for (int i = 0; i < 1000; ++i) {
    const double rho = rng.uniform(0.3, 1.0);
    const double g2_true = rng.uniform(0.0, 1.0);
    CAPTURE(rho, g2_true);
    // forward-contaminate then correct
    const double g2_meas = g2_true * rho * rho + (1.0 - rho * rho);
    auto r = background_corrected_purity(g2_meas, rho);
    REQUIRE(r.g2_corrected == Catch::Approx(g2_true).margin(1e-12));
    // correction never raises the value above the measurement for g2 < 1
    if (g2_meas < 1.0) REQUIRE(r.g2_corrected <= g2_meas + 1e-12);
  }
}
