// Radiative gap attenuation, flux evaluation, and per-stage line-load
// assembly.  Reference numbers were computed independently from the gray-gap
// formula lambda = 1/(1/eps_i + F/eps_o) and sigma*lambda*(Th^4 - Ts^4).

#include <cmath>
#include <stdexcept>

#include "cryolink/geometry.hpp"
#include "cryolink/loads.hpp"
#include "doctest.h"

using cryolink::LinkAssembly;

namespace {

double rel_diff(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace

TEST_SUITE("loads") {

TEST_CASE("gap attenuation matches the gray-surface formula") {
  CHECK(rel_diff(cryolink::attenuation_lambda(0.025, 0.025, 155.0 / 205.0),
                 1.423611111111e-02) < 1e-11);
  CHECK(rel_diff(cryolink::attenuation_lambda(0.025, 0.05, 205.0 / 265.0),
                 1.802721088435e-02) < 1e-11);
  CHECK(cryolink::attenuation_lambda(0.03, 0.03, 0.5) == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(cryolink::attenuation_lambda(1.0, 1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));

  CHECK_THROWS_AS(cryolink::attenuation_lambda(0.0, 0.5, 0.5), std::domain_error);
  CHECK_THROWS_AS(cryolink::attenuation_lambda(0.5, 1.2, 0.5), std::domain_error);
  CHECK_THROWS_AS(cryolink::attenuation_lambda(0.5, 0.5, 0.0), std::domain_error);
  CHECK_THROWS_AS(cryolink::attenuation_lambda(0.5, 0.5, 1.1), std::domain_error);
}

TEST_CASE("radiative flux reproduces the reference values") {
  // The bare and insulated vessel-gap fluxes onto a 50 K surface.
  CHECK(rel_diff(cryolink::radiative_flux(293.0, 0.02, true, 50.0), 8.3511015377) < 1e-9);
  CHECK(rel_diff(cryolink::radiative_flux(293.0, 0.004, true, 50.0), 1.6702203075) < 1e-9);
  // Blackbody limit without re-emission.
  CHECK(rel_diff(cryolink::radiative_flux(300.0, 1.0), 4.5930032794e+02) < 1e-9);
  // Re-emission ignored when include_self is off.
  CHECK(cryolink::radiative_flux(293.0, 0.02, false, 50.0) ==
        doctest::Approx(cryolink::radiative_flux(293.0, 0.02)).epsilon(1e-15));

  CHECK_THROWS_AS(cryolink::radiative_flux(293.0, -0.1), std::domain_error);
  CHECK_THROWS_AS(cryolink::radiative_flux(293.0, 1.5), std::domain_error);
  CHECK_THROWS_AS(cryolink::radiative_flux(400.0, 0.02), std::domain_error);
  CHECK_THROWS_AS(cryolink::radiative_flux(293.0, 0.02, true, 293.0), std::domain_error);
  CHECK_THROWS_AS(cryolink::radiative_flux(293.0, 0.02, true, -1.0), std::domain_error);
}

TEST_CASE("post heat load follows the fitted power law") {
  const cryolink::PostLoadCurve curve{2e-6, 4.0, 2.2};
  CHECK(cryolink::post_heat_load(curve, 4.0) == doctest::Approx(2e-6).epsilon(1e-15));
  CHECK(cryolink::post_heat_load(curve, 10.0) ==
        doctest::Approx(2e-6 * std::pow(2.5, 2.2)).epsilon(1e-12));
  // The catalog base-stage posts: P(1 K) = p0 exactly.
  CHECK(cryolink::post_heat_load(cryolink::default_post_load(1), 1.0) ==
        doctest::Approx(10e-9).epsilon(1e-15));
}

TEST_CASE("line load combines the radiative density with the gap attenuation") {
  const LinkAssembly a = cryolink::standard_assembly(10.0);
  const double t_hot = 55.0;
  const auto field = cryolink::build_line_load(a, 3, [t_hot](double) { return t_hot; });
  CHECK(field.stage_index == 3);

  // Stage 3 carries no attenuation override: the density must equal
  // sigma * lambda(eps3, eps4, C3/C4) * Th^4 * C3 at every position.
  const auto& spec = a.stage(3);
  const double lambda = cryolink::attenuation_lambda(
      spec.emissivity, a.stage(4).emissivity, spec.circumference_m / a.stage(4).circumference_m);
  const double want = cryolink::kStefanBoltzmann * lambda * std::pow(t_hot, 4.0) *
                      spec.circumference_m;
  for (double x : {0.1, 3.7, 9.9}) {
    CHECK(rel_diff(field.density_w_per_m(x), want) < 1e-12);
  }

  // Two post sets per link module, each delta = count * P(T_hot at the post).
  REQUIRE(field.post_deltas.size() == 4);
  const double per_post = cryolink::post_heat_load(spec.post_load, t_hot);
  for (const auto& delta : field.post_deltas) {
    CHECK(delta.power_w == doctest::Approx(3.0 * per_post).epsilon(1e-12));
  }
  CHECK(field.post_deltas.front().position_m == doctest::Approx(3.125));
  CHECK(field.post_deltas.back().position_m == doctest::Approx(6.875));
}

TEST_CASE("attenuation overrides replace the emissivity-derived value") {
  LinkAssembly a = cryolink::standard_assembly(10.0);
  a.stage(3).mli_attenuation_override = 0.007;
  const auto field = cryolink::build_line_load(a, 3, [](double) { return 55.0; });
  const double want = cryolink::kStefanBoltzmann * 0.007 * std::pow(55.0, 4.0) *
                      a.stage(3).circumference_m;
  CHECK(rel_diff(field.density_w_per_m(5.0), want) < 1e-12);

  // The base stage's zero override kills its radiative load entirely; only
  // the post deltas remain.
  const auto base = cryolink::build_line_load(a, 1, [](double) { return 1.3; });
  CHECK(base.density_w_per_m(2.0) == 0.0);
  CHECK(base.post_deltas.size() == 4);
  const double per_post =
      cryolink::post_heat_load(a.stage(1).post_load, 1.3);
  CHECK(base.post_deltas.front().power_w == doctest::Approx(3.0 * per_post).epsilon(1e-12));
}

TEST_CASE("extra surface flux adds on top of the radiative density") {
  LinkAssembly a = cryolink::standard_assembly(10.0);
  a.stage(3).extra_flux_w_per_m2 = 0.25;
  const auto with_extra = cryolink::build_line_load(a, 3, [](double) { return 55.0; });
  a.stage(3).extra_flux_w_per_m2 = 0.0;
  const auto without = cryolink::build_line_load(a, 3, [](double) { return 55.0; });
  const double delta = with_extra.density_w_per_m(4.0) - without.density_w_per_m(4.0);
  CHECK(delta == doctest::Approx(0.25 * a.stage(3).circumference_m).epsilon(1e-12));
}

TEST_CASE("the insulated outer stage folds its posts into the attenuation") {
  const LinkAssembly a = cryolink::standard_assembly(10.0);
  const double can = a.vacuum_can.temperature_k;
  const auto field = cryolink::build_line_load(a, 4, [can](double) { return can; });
  CHECK(field.post_deltas.empty());
  const double want = cryolink::kStefanBoltzmann * 0.004 * std::pow(can, 4.0) *
                      a.stage(4).circumference_m;
  CHECK(rel_diff(field.density_w_per_m(5.0), want) < 1e-12);
}

TEST_CASE("self-coupled stages subtract their own re-emission, clamped at zero") {
  const LinkAssembly a = cryolink::standard_assembly(10.0);
  const double can = a.vacuum_can.temperature_k;
  const auto hot = [can](double) { return can; };

  const auto coupled =
      cryolink::build_line_load(a, 4, hot, [](double) { return 60.0; });
  const double want = cryolink::kStefanBoltzmann * 0.004 *
                      (std::pow(can, 4.0) - std::pow(60.0, 4.0)) *
                      a.stage(4).circumference_m;
  CHECK(rel_diff(coupled.density_w_per_m(5.0), want) < 1e-12);

  // Hotter-than-enclosure iterates clamp to zero instead of going negative.
  const auto clamped =
      cryolink::build_line_load(a, 4, hot, [can](double) { return can + 1.0; });
  CHECK(clamped.density_w_per_m(5.0) == 0.0);

  // Stages without the coupling flag ignore the self profile.
  const auto uncoupled =
      cryolink::build_line_load(a, 3, [](double) { return 55.0; }, [](double) { return 54.0; });
  const auto reference = cryolink::build_line_load(a, 3, [](double) { return 55.0; });
  CHECK(uncoupled.density_w_per_m(5.0) ==
        doctest::Approx(reference.density_w_per_m(5.0)).epsilon(1e-15));
}

TEST_CASE("stage bounds are validated") {
  const LinkAssembly a = cryolink::standard_assembly(10.0);
  CHECK_THROWS_AS(cryolink::build_line_load(a, 0, [](double) { return 50.0; }),
                  std::invalid_argument);
  CHECK_THROWS_AS(cryolink::build_line_load(a, 5, [](double) { return 50.0; }),
                  std::invalid_argument);
}

}  // TEST_SUITE
