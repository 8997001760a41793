// Measurement-reduction pipelines: power-law / RRR / attenuation fits, the
// braid decomposition, heater-sweep reduction, and the CSV/sidecar loaders.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cryolink/errors.hpp"
#include "cryolink/fitting.hpp"
#include "cryolink/geometry.hpp"
#include "cryolink/loads.hpp"
#include "cryolink/materials.hpp"
#include "cryolink/solver.hpp"
#include "doctest.h"

namespace {

using namespace cryolink;
namespace fs = std::filesystem;

// Scratch directory recreated empty for each test case that writes files.
struct ScratchDir {
  fs::path path;
  ScratchDir() : path(fs::temp_directory_path() / "cryolink-fitting-tests") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = path / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    out.close();
    return p.string();
  }
};

std::vector<XYPoint> power_law_samples(double a, double b) {
  std::vector<XYPoint> points;
  for (double x : {0.5, 1.0, 2.0, 4.0, 6.0, 8.0, 12.0, 16.0}) {
    points.push_back({x, a * std::pow(x, b)});
  }
  return points;
}

}  // namespace

TEST_SUITE("fitting") {

TEST_CASE("power-law fit recovers exact data") {
  const FitResult fit = fit_power_law(power_law_samples(2.37, 1.81));
  REQUIRE(fit.parameters.count("a") == 1);
  REQUIRE(fit.parameters.count("b") == 1);
  CHECK(fit.parameters.at("a").value == doctest::Approx(2.37).epsilon(1e-9));
  CHECK(fit.parameters.at("b").value == doctest::Approx(1.81).epsilon(1e-9));
  CHECK(fit.parameters.at("b").unit == "1");
  CHECK(fit.residual < 1e-12);
  CHECK(fit.dof == 6);
  REQUIRE(fit.point_residuals.size() == 8);
  for (double r : fit.point_residuals) CHECK(std::abs(r) < 1e-7);
}

TEST_CASE("power-law refinement never does worse than the log-space estimate") {
  // Multiplicative perturbations make the log-log estimate biased in linear
  // space; the refinement pass must only ever lower the linear-space error.
  std::vector<XYPoint> points = power_law_samples(2.0, 1.5);
  for (std::size_t i = 0; i < points.size(); ++i) {
    points[i].y *= (i % 2 == 0) ? 1.05 : 0.95;
  }
  double mean_lx = 0.0, mean_ly = 0.0;
  for (const XYPoint& p : points) {
    mean_lx += std::log(p.x);
    mean_ly += std::log(p.y);
  }
  mean_lx /= static_cast<double>(points.size());
  mean_ly /= static_cast<double>(points.size());
  double var = 0.0, cov = 0.0;
  for (const XYPoint& p : points) {
    var += (std::log(p.x) - mean_lx) * (std::log(p.x) - mean_lx);
    cov += (std::log(p.x) - mean_lx) * (std::log(p.y) - mean_ly);
  }
  const double b_log = cov / var;
  const double a_log = std::exp(mean_ly - b_log * mean_lx);
  double sse_log = 0.0;
  for (const XYPoint& p : points) {
    const double r = p.y - a_log * std::pow(p.x, b_log);
    sse_log += r * r;
  }

  const FitResult fit = fit_power_law(points);
  CHECK(fit.residual <= sse_log * (1.0 + 1e-12));
  CHECK(fit.residual == doctest::Approx(fit.point_residuals[0] * fit.point_residuals[0] +
                                        fit.point_residuals[1] * fit.point_residuals[1] +
                                        fit.point_residuals[2] * fit.point_residuals[2] +
                                        fit.point_residuals[3] * fit.point_residuals[3] +
                                        fit.point_residuals[4] * fit.point_residuals[4] +
                                        fit.point_residuals[5] * fit.point_residuals[5] +
                                        fit.point_residuals[6] * fit.point_residuals[6] +
                                        fit.point_residuals[7] * fit.point_residuals[7])
                            .epsilon(1e-12));
}

TEST_CASE("power-law fit input validation") {
  CHECK_THROWS_AS((void)fit_power_law({{1.0, 2.0}, {2.0, 3.0}}), validation_error);
  CHECK_THROWS_AS((void)fit_power_law({{1.0, 2.0}, {2.0, 3.0}, {-3.0, 4.0}}), validation_error);
  CHECK_THROWS_AS((void)fit_power_law({{1.0, 2.0}, {2.0, 0.0}, {3.0, 4.0}}), validation_error);
  CHECK_THROWS_AS((void)fit_power_law({{2.0, 1.0}, {2.0, 2.0}, {2.0, 3.0}}), validation_error);
}

TEST_CASE("heater-sweep reduction applies the midpoint formula verbatim") {
  HeaterSweep sweep;
  sweep.sensor_positions_m = {0.0, 0.2, 0.5};
  sweep.cross_section_m2 = 4e-4;
  sweep.background_power_w = 0.05;
  sweep.heater_powers_w = {1.0, 2.0};
  sweep.temperatures_k = {{10.0, 12.0, 15.0}, {11.0, 14.5, 19.5}};

  const std::vector<ConductivityPoint> points = shield_conductivity_points(sweep);
  REQUIRE(points.size() == 4);
  // Row 1, pair (0,1): rho = dx (Q + Q_bg) / (A dT) = 0.2 * 1.05 / (4e-4 * 2).
  CHECK(points[0].temperature_k == 11.0);
  CHECK(points[0].conductivity_w_per_k_m == doctest::Approx(262.5).epsilon(1e-12));
  CHECK(points[1].temperature_k == 13.5);
  CHECK(points[1].conductivity_w_per_k_m == doctest::Approx(0.3 * 1.05 / (4e-4 * 3.0)).epsilon(1e-12));
  CHECK(points[2].temperature_k == 12.75);
  CHECK(points[2].conductivity_w_per_k_m == doctest::Approx(0.2 * 2.05 / (4e-4 * 3.5)).epsilon(1e-12));
  CHECK(points[3].temperature_k == 17.0);
  CHECK(points[3].conductivity_w_per_k_m == doctest::Approx(0.3 * 2.05 / (4e-4 * 5.0)).epsilon(1e-12));
}

TEST_CASE("heater-sweep reduction warns when the gradient is too steep") {
  HeaterSweep sweep;
  sweep.sensor_positions_m = {0.0, 0.1};
  sweep.cross_section_m2 = 1e-4;
  sweep.heater_powers_w = {0.5};
  sweep.temperatures_k = {{1.0, 1.3}};  // dT/T_mid = 0.3/1.15 > 0.2

  std::vector<std::string> warnings;
  const std::vector<ConductivityPoint> points =
      shield_conductivity_points(sweep, 1e-3, &warnings);
  CHECK(points.size() == 1);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("dT/T") != std::string::npos);

  // Without a warning collector the reduction still succeeds.
  CHECK(shield_conductivity_points(sweep).size() == 1);
}

TEST_CASE("heater-sweep reduction input validation") {
  HeaterSweep sweep;
  sweep.sensor_positions_m = {0.0, 0.1, 0.2};
  sweep.cross_section_m2 = 1e-4;
  sweep.heater_powers_w = {0.5};
  sweep.temperatures_k = {{10.0, 11.0, 12.0}};

  {
    HeaterSweep bad = sweep;
    bad.sensor_positions_m = {0.0};
    CHECK_THROWS_AS((void)shield_conductivity_points(bad), validation_error);
  }
  {
    HeaterSweep bad = sweep;
    bad.sensor_positions_m = {0.0, 0.2, 0.1};
    CHECK_THROWS_AS((void)shield_conductivity_points(bad), validation_error);
  }
  {
    HeaterSweep bad = sweep;
    bad.cross_section_m2 = 0.0;
    CHECK_THROWS_AS((void)shield_conductivity_points(bad), validation_error);
  }
  {
    HeaterSweep bad = sweep;
    bad.temperatures_k = {{10.0, 11.0}};
    CHECK_THROWS_AS((void)shield_conductivity_points(bad), validation_error);
  }
  {
    HeaterSweep bad = sweep;
    bad.temperatures_k.clear();
    CHECK_THROWS_AS((void)shield_conductivity_points(bad), validation_error);
  }
  CHECK_THROWS_AS((void)shield_conductivity_points(sweep, 0.0), validation_error);
  // A pair whose dT sits below the noise floor cannot be divided through.
  {
    HeaterSweep bad = sweep;
    bad.temperatures_k = {{10.0, 10.0005, 12.0}};
    CHECK_THROWS_WITH_AS((void)shield_conductivity_points(bad),
                         doctest::Contains("noise floor"), validation_error);
  }
}

TEST_CASE("RRR fit recovers the generating purity from exact samples") {
  const ConductivityModel model = ConductivityModel::nist_rrr_copper(230.0);
  std::vector<ConductivityPoint> points;
  for (double t : {4.2, 6.0, 10.0, 15.0, 25.0, 40.0, 80.0, 150.0, 290.0}) {
    points.push_back({t, model.conductivity(t)});
  }
  const FitResult fit = fit_rrr(points);
  REQUIRE(fit.parameters.count("rrr") == 1);
  CHECK(fit.parameters.at("rrr").value == doctest::Approx(230.0).epsilon(5e-5));
  CHECK(fit.dof == static_cast<int>(points.size()) - 1);
  REQUIRE(fit.point_residuals.size() == points.size());
  for (double r : fit.point_residuals) CHECK(std::abs(r) < 1e-3);
}

TEST_CASE("RRR fit input validation") {
  const ConductivityModel model = ConductivityModel::nist_rrr_copper(100.0);
  CHECK_THROWS_AS((void)fit_rrr({{4.2, model.conductivity(4.2)}, {10.0, model.conductivity(10.0)}}),
                  validation_error);
  CHECK_THROWS_AS((void)fit_rrr({{4.2, 100.0}, {10.0, 120.0}, {350.0, 130.0}}), std::domain_error);
  CHECK_THROWS_AS((void)fit_rrr({{4.2, 100.0}, {10.0, -1.0}, {20.0, 130.0}}), validation_error);
}

TEST_CASE("braid decomposition isolates an exact contact term") {
  // Bulk R = 0.5 T; total adds a 4 T^-2 contact.  Both are pure power laws,
  // so the log-log interpolation and the subsequent fit are exact.
  std::vector<ResistancePoint> bulk;
  for (int i = 0; i < 25; ++i) {
    const double t = 1.0 + 19.0 * i / 24.0;
    bulk.push_back({t, 0.5 * t});
  }
  std::vector<ResistancePoint> total;
  for (int i = 0; i < 12; ++i) {
    const double t = 1.1 + 8.8 * i / 11.0;
    total.push_back({t, 0.5 * t + 4.0 / (t * t)});
  }

  const BraidDecomposition decomposition = braid_decomposition(total, bulk);
  REQUIRE(decomposition.contact_points.size() == 12);
  for (const ResistancePoint& p : decomposition.contact_points) {
    const double expected = 4.0 / (p.temperature_k * p.temperature_k);
    CHECK(p.resistance_k_per_w == doctest::Approx(expected).epsilon(1e-9));
  }
  CHECK(decomposition.contact_fit.parameters.at("a").value == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(decomposition.contact_fit.parameters.at("b").value == doctest::Approx(-2.0).epsilon(1e-6));
}

TEST_CASE("braid decomposition drops borderline points and rejects real conflicts") {
  std::vector<ResistancePoint> bulk;
  for (int i = 0; i < 16; ++i) {
    const double t = 1.0 + 29.0 * i / 15.0;
    bulk.push_back({t, 0.5 * t});
  }

  // Three clean contact points plus two that fall at/below bulk within the
  // 5% default tolerance: the latter are noise and silently dropped.
  std::vector<ResistancePoint> total = {
      {2.0, 0.5 * 2.0 + 1.0},  {4.0, 0.5 * 4.0 * 0.99}, {6.0, 0.5 * 6.0 + 0.40},
      {8.0, 0.5 * 8.0 * 0.999}, {10.0, 0.5 * 10.0 + 0.16},
  };
  const BraidDecomposition decomposition = braid_decomposition(total, bulk);
  CHECK(decomposition.contact_points.size() == 3);

  // A total measurement far below bulk cannot be explained by noise.
  std::vector<ResistancePoint> conflicting = total;
  conflicting[1].resistance_k_per_w = 0.5 * 4.0 * 0.5;
  CHECK_THROWS_WITH_AS((void)braid_decomposition(conflicting, bulk),
                       doctest::Contains("negative beyond the noise tolerance"),
                       validation_error);
}

TEST_CASE("braid decomposition input validation") {
  const std::vector<ResistancePoint> bulk = {{1.0, 0.5}, {10.0, 5.0}};
  const std::vector<ResistancePoint> total = {{2.0, 3.0}, {4.0, 3.5}, {6.0, 4.0}, {8.0, 4.6}};
  CHECK_THROWS_AS((void)braid_decomposition(total, {{1.0, 0.5}}), validation_error);
  CHECK_THROWS_AS((void)braid_decomposition({{2.0, 3.0}}, bulk), validation_error);
  CHECK_THROWS_AS((void)braid_decomposition(total, bulk, -0.1), validation_error);
  CHECK_THROWS_AS((void)braid_decomposition(total, {{1.0, 0.5}, {1.0, 0.6}}), validation_error);
  CHECK_THROWS_AS((void)braid_decomposition(total, {{1.0, -0.5}, {10.0, 5.0}}), validation_error);
  // Disjoint temperature support.
  CHECK_THROWS_WITH_AS((void)braid_decomposition(total, {{20.0, 1.0}, {30.0, 2.0}}),
                       doctest::Contains("overlapping"), validation_error);
  // Overlap trims the usable points below the fit minimum.
  CHECK_THROWS_WITH_AS((void)braid_decomposition(total, {{1.0, 0.5}, {4.5, 2.2}}),
                       doctest::Contains("degenerate"), validation_error);
}

TEST_CASE("post conductivity from a load fit reproduces the load curve") {
  const double a = 3e-4;
  const double b = 2.2;
  const double length = 0.1;
  const double area = 2e-6;
  const ConductivityModel model = post_conductivity_from_fit(a, b, length, area);

  // rho(T) = a b T^(b-1) l / A ...
  const double expected_rho = a * b * std::pow(7.0, b - 1.0) * length / area;
  CHECK(model.conductivity(7.0) == doctest::Approx(expected_rho).epsilon(1e-12));
  // ... so (A/l) * integral rho over [t1, t2] equals P(t2) - P(t1).
  const double recovered = area / length * model.integral(2.0, 9.0);
  const double expected = a * (std::pow(9.0, b) - std::pow(2.0, b));
  CHECK(recovered == doctest::Approx(expected).epsilon(1e-9));

  CHECK_THROWS_AS((void)post_conductivity_from_fit(0.0, b, length, area), std::domain_error);
  CHECK_THROWS_AS((void)post_conductivity_from_fit(a, -1.0, length, area), std::domain_error);
  CHECK_THROWS_AS((void)post_conductivity_from_fit(a, b, 0.0, area), std::domain_error);
  CHECK_THROWS_AS((void)post_conductivity_from_fit(a, b, length, 0.0), std::domain_error);
}

TEST_CASE("attenuation fit recovers the value that generated the profile") {
  LinkAssembly assembly = standard_assembly(5.0);
  LinkAssembly truth = assembly;
  truth.stages[3].mli_attenuation_override = 0.0035;
  const auto hot = [&](double) { return assembly.vacuum_can.temperature_k; };
  const StageProfile profile = solve_stage(truth, 4, hot);

  std::vector<ProfilePoint> measured;
  double next_x = 0.3;
  for (const ProfileSample& sample : profile.samples) {
    if (sample.kind != SampleKind::interior) continue;
    if (sample.position_m < next_x || sample.position_m > 4.7) continue;
    measured.push_back({sample.position_m, sample.temperature_k});
    next_x = sample.position_m + 0.45;
  }
  REQUIRE(measured.size() >= 6);

  const FitResult fit =
      fit_mli_lambda(measured, assembly, {0.002, 0.003, 0.004, 0.005});
  CHECK(fit.parameters.at("lambda").value == doctest::Approx(0.0035).epsilon(0.03));
  CHECK(std::abs(fit.parameters.at("lambda").value - 0.0035) < 1e-4);
  CHECK(fit.dof == static_cast<int>(measured.size()) - 1);
  CHECK(fit.point_residuals.size() == measured.size());
}

TEST_CASE("attenuation fit refuses an unbracketed minimum") {
  LinkAssembly assembly = standard_assembly(5.0);
  LinkAssembly truth = assembly;
  truth.stages[3].mli_attenuation_override = 0.002;
  const auto hot = [&](double) { return assembly.vacuum_can.temperature_k; };
  const StageProfile profile = solve_stage(truth, 4, hot);
  std::vector<ProfilePoint> measured;
  for (const ProfileSample& sample : profile.samples) {
    if (sample.kind == SampleKind::interior && sample.position_m > 0.5 &&
        sample.position_m < 4.5) {
      measured.push_back({sample.position_m, sample.temperature_k});
    }
  }
  CHECK_THROWS_WITH_AS(
      (void)fit_mli_lambda(measured, assembly, {0.003, 0.004, 0.005}),
      doctest::Contains("grid boundary"), convergence_error);
}

TEST_CASE("attenuation fit propagates per-candidate solver failures") {
  const LinkAssembly assembly = standard_assembly(10.0);
  const std::vector<ProfilePoint> measured = {{3.0, 100.0}, {5.0, 110.0}, {7.0, 100.0}};
  // 0.3 lets ~80 W/m through: far beyond what the node stages can reject.
  CHECK_THROWS_AS((void)fit_mli_lambda(measured, assembly, {0.3, 0.5, 0.8}), infeasible_error);
}

TEST_CASE("attenuation fit input validation") {
  const LinkAssembly assembly = standard_assembly(5.0);
  const std::vector<ProfilePoint> measured = {{1.0, 80.0}, {2.5, 90.0}, {4.0, 80.0}};
  CHECK_THROWS_AS((void)fit_mli_lambda({}, assembly, {0.002, 0.003, 0.004}), validation_error);
  CHECK_THROWS_AS((void)fit_mli_lambda(measured, assembly, {0.002, 0.003}), validation_error);
  CHECK_THROWS_AS((void)fit_mli_lambda(measured, assembly, {0.0, 0.003, 0.004}),
                  validation_error);
  CHECK_THROWS_AS((void)fit_mli_lambda(measured, assembly, {0.002, 0.004, 0.003}),
                  validation_error);
  CHECK_THROWS_AS((void)fit_mli_lambda({{7.0, 80.0}}, assembly, {0.002, 0.003, 0.004}),
                  validation_error);
}

TEST_CASE("strip radiative loss follows the Stefan-Boltzmann exchange") {
  const double expected =
      kStefanBoltzmann * 0.3 * 0.02 * (std::pow(60.0, 4) - std::pow(293.0, 4));
  CHECK(strip_radiative_loss_w(0.02, 0.3, 60.0, 293.0) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(strip_radiative_loss_w(0.02, 0.3, 60.0, 293.0) < 0.0);  // strip colder: net gain
  CHECK(strip_radiative_loss_w(0.02, 0.3, 293.0, 60.0) > 0.0);
  CHECK(strip_radiative_loss_w(0.0, 0.3, 60.0, 293.0) == 0.0);
  CHECK_THROWS_AS((void)strip_radiative_loss_w(-1.0, 0.3, 60.0, 293.0), std::domain_error);
  CHECK_THROWS_AS((void)strip_radiative_loss_w(0.02, 0.0, 60.0, 293.0), std::domain_error);
  CHECK_THROWS_AS((void)strip_radiative_loss_w(0.02, 1.5, 60.0, 293.0), std::domain_error);
  CHECK_THROWS_AS((void)strip_radiative_loss_w(0.02, 0.3, -1.0, 293.0), std::domain_error);
}

TEST_CASE("fit results serialize with stable shape") {
  const FitResult fit = fit_power_law(power_law_samples(2.0, 1.5));
  const std::string text = serialize_fit_result(fit);
  CHECK(text.rfind("{\n  \"parameters\"", 0) == 0);
  CHECK(text.back() == '\n');

  const nlohmann::json doc = nlohmann::json::parse(text);
  CHECK(doc.at("parameters").at("a").at("value").get<double>() ==
        doctest::Approx(2.0).epsilon(1e-9));
  CHECK(doc.at("parameters").at("b").at("unit").get<std::string>() == "1");
  CHECK(doc.at("residual").get<double>() == fit.residual);
  CHECK(doc.at("dof").get<int>() == fit.dof);
  CHECK(doc.at("point_residuals").size() == fit.point_residuals.size());
}

TEST_CASE("xy loader reads, trims, and validates") {
  const ScratchDir dir;
  const std::string good = dir.file("points.csv", "x,y\n 1.5 , 2.5 \n2,4\n3.5,9\n");
  const std::vector<XYPoint> points = load_xy_points(good);
  REQUIRE(points.size() == 3);
  CHECK(points[0].x == 1.5);
  CHECK(points[0].y == 2.5);
  CHECK(points[2].y == 9.0);

  CHECK_THROWS_AS((void)load_xy_points(dir.path / "missing.csv"), io_error);
  CHECK_THROWS_WITH_AS((void)load_xy_points(dir.file("empty.csv", "")),
                       doctest::Contains("no header row"), validation_error);
  CHECK_THROWS_WITH_AS((void)load_xy_points(dir.file("headeronly.csv", "x,y\n")),
                       doctest::Contains("no data rows"), validation_error);
  CHECK_THROWS_WITH_AS((void)load_xy_points(dir.file("badheader.csv", "a,b\n1,2\n")),
                       doctest::Contains("expected header 'x,y'"), validation_error);
  CHECK_THROWS_WITH_AS((void)load_xy_points(dir.file("badnum.csv", "x,y\n1,2\n3,oops\n")),
                       doctest::Contains(":3: not a finite number"), validation_error);
  CHECK_THROWS_WITH_AS((void)load_xy_points(dir.file("short.csv", "x,y\n1,2\n3,\n")),
                       doctest::Contains("empty numeric field"), validation_error);
  CHECK_THROWS_WITH_AS((void)load_xy_points(dir.file("wide.csv", "x,y\n1,2,3\n")),
                       doctest::Contains("expected 2 fields"), validation_error);
}

TEST_CASE("resistance and profile loaders check their headers") {
  const ScratchDir dir;
  const std::vector<ResistancePoint> resistances =
      load_resistance_points(dir.file("r.csv", "T_K,R_K_per_W\n4.2,0.5\n10,0.2\n"));
  REQUIRE(resistances.size() == 2);
  CHECK(resistances[1].temperature_k == 10.0);
  CHECK(resistances[1].resistance_k_per_w == 0.2);

  const std::vector<ProfilePoint> profile =
      load_profile_points(dir.file("p.csv", "x_m,T_K\n0,60\n2.5,75.5\n"));
  REQUIRE(profile.size() == 2);
  CHECK(profile[1].position_m == 2.5);
  CHECK(profile[1].temperature_k == 75.5);

  CHECK_THROWS_AS((void)load_resistance_points(dir.file("r2.csv", "x,y\n1,2\n")),
                  validation_error);
  CHECK_THROWS_AS((void)load_profile_points(dir.file("p2.csv", "T_K,R_K_per_W\n1,2\n")),
                  validation_error);
}

TEST_CASE("heater-sweep loader assembles sweep, sidecar units, and positions") {
  const ScratchDir dir;
  const std::string csv = dir.file(
      "sweep.csv", "Q_W,T_a_K,T_b_K,T_c_K\r\n0,10,11,12\r\n0.5,11,13,15\r\n1.0,12,15,18\r\n");

  SUBCASE("uniform spacing with scaled units") {
    const std::string sidecar = dir.file("sweep.json", R"({
      "kind": "dipstick",
      "cross_section": {"mm2": 64.0},
      "sensor_spacing": {"m": 0.235},
      "background_power": {"mW": 2.0}
    })");
    const HeaterSweep sweep = load_heater_sweep(csv, sidecar);
    REQUIRE(sweep.sensor_positions_m.size() == 3);
    CHECK(sweep.sensor_positions_m[0] == 0.0);
    CHECK(sweep.sensor_positions_m[1] == doctest::Approx(0.235).epsilon(1e-12));
    CHECK(sweep.sensor_positions_m[2] == doctest::Approx(0.470).epsilon(1e-12));
    CHECK(sweep.cross_section_m2 == doctest::Approx(6.4e-5).epsilon(1e-12));
    CHECK(sweep.background_power_w == doctest::Approx(2e-3).epsilon(1e-12));
    REQUIRE(sweep.heater_powers_w.size() == 3);
    CHECK(sweep.heater_powers_w[1] == 0.5);
    REQUIRE(sweep.temperatures_k.size() == 3);
    CHECK(sweep.temperatures_k[2][2] == 18.0);
  }

  SUBCASE("explicit positions; background defaults to zero") {
    const std::string sidecar = dir.file("sweep.json", R"({
      "kind": "heater_sweep",
      "cross_section": {"cm2": 4.0},
      "sensor_positions": {"cm": [0, 40, 95]}
    })");
    const HeaterSweep sweep = load_heater_sweep(csv, sidecar);
    CHECK(sweep.cross_section_m2 == doctest::Approx(4e-4).epsilon(1e-12));
    CHECK(sweep.background_power_w == 0.0);
    REQUIRE(sweep.sensor_positions_m.size() == 3);
    CHECK(sweep.sensor_positions_m[1] == doctest::Approx(0.40).epsilon(1e-12));
    CHECK(sweep.sensor_positions_m[2] == doctest::Approx(0.95).epsilon(1e-12));
  }
}

TEST_CASE("heater-sweep loader rejects malformed inputs") {
  const ScratchDir dir;
  const std::string csv =
      dir.file("sweep.csv", "Q_W,T_a_K,T_b_K\n0,10,11\n0.5,11,13\n");
  const std::string sidecar = dir.file("sweep.json", R"({
    "kind": "heater_sweep",
    "cross_section": {"mm2": 64.0},
    "sensor_spacing": {"m": 0.235}
  })");

  CHECK_THROWS_AS((void)load_heater_sweep(dir.path / "nope.csv", sidecar), io_error);
  CHECK_THROWS_AS((void)load_heater_sweep(csv, dir.path / "nope.json"), io_error);
  CHECK_THROWS_WITH_AS((void)load_heater_sweep(csv, dir.file("bad.json", "{not json")),
                       doctest::Contains("bad.json"), validation_error);
  CHECK_THROWS_WITH_AS(
      (void)load_heater_sweep(csv, dir.file("kind.json",
                                            R"({"kind": "other", "cross_section": {"mm2": 1},
                                                "sensor_spacing": {"m": 0.1}})")),
      doctest::Contains("kind"), validation_error);
  // Exactly one of spacing / positions.
  CHECK_THROWS_AS(
      (void)load_heater_sweep(
          csv, dir.file("both.json",
                        R"({"kind": "dipstick", "cross_section": {"mm2": 1},
                            "sensor_spacing": {"m": 0.1},
                            "sensor_positions": {"m": [0, 0.1]}})")),
      validation_error);
  CHECK_THROWS_AS(
      (void)load_heater_sweep(
          csv, dir.file("neither.json", R"({"kind": "dipstick", "cross_section": {"mm2": 1}})")),
      validation_error);
  // Position count must match the CSV sensor columns.
  CHECK_THROWS_AS(
      (void)load_heater_sweep(
          csv, dir.file("count.json",
                        R"({"kind": "dipstick", "cross_section": {"mm2": 1},
                            "sensor_positions": {"m": [0, 0.1, 0.2]}})")),
      validation_error);
  // Unit families are closed.
  CHECK_THROWS_WITH_AS(
      (void)load_heater_sweep(
          csv, dir.file("unit.json",
                        R"({"kind": "dipstick", "cross_section": {"in2": 1},
                            "sensor_spacing": {"m": 0.1}})")),
      doctest::Contains("unsupported unit"), validation_error);

  CHECK_THROWS_WITH_AS(
      (void)load_heater_sweep(dir.file("col.csv", "P_W,T_a_K,T_b_K\n0,10,11\n"), sidecar),
      doctest::Contains("Q_W"), validation_error);
  CHECK_THROWS_WITH_AS(
      (void)load_heater_sweep(dir.file("one.csv", "Q_W,T_a_K\n0,10\n"), sidecar),
      doctest::Contains("at least two"), validation_error);
  CHECK_THROWS_WITH_AS(
      (void)load_heater_sweep(dir.file("name.csv", "Q_W,T_a_K,temp\n0,10,11\n"), sidecar),
      doctest::Contains("T_<sensor>_K"), validation_error);
  CHECK_THROWS_WITH_AS(
      (void)load_heater_sweep(dir.file("order.csv", "Q_W,T_a_K,T_b_K\n0.5,10,11\n0.2,11,13\n"),
                              sidecar),
      doctest::Contains("strictly increasing"), validation_error);
  CHECK_THROWS_AS(
      (void)load_heater_sweep(dir.file("negq.csv", "Q_W,T_a_K,T_b_K\n-0.5,10,11\n"), sidecar),
      validation_error);
  CHECK_THROWS_AS(
      (void)load_heater_sweep(dir.file("negt.csv", "Q_W,T_a_K,T_b_K\n0,10,-11\n"), sidecar),
      validation_error);
  CHECK_THROWS_WITH_AS(
      (void)load_heater_sweep(dir.file("width.csv", "Q_W,T_a_K,T_b_K\n0,10\n"), sidecar),
      doctest::Contains("expected 3 fields"), validation_error);
}

}  // TEST_SUITE
