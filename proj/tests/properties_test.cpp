// Runs the randomized physics-invariant battery at reduced counts; the
// acceptance runner repeats it at full strength.

#include "doctest.h"
#include "support/properties.hpp"

namespace {

using testsupport::CheckOutcome;

void expect_pass(const CheckOutcome& outcome) {
  INFO(outcome.detail);
  CHECK(outcome.pass);
}

}  // namespace

TEST_SUITE("properties") {

TEST_CASE("energy balance on random assemblies") {
  expect_pass(testsupport::check_energy_balance(10, 1e-4));
}

TEST_CASE("mirror symmetry of symmetric builds") {
  expect_pass(testsupport::check_mirror_symmetry(6));
}

TEST_CASE("profile shape between sinks") {
  expect_pass(testsupport::check_profile_shape(6));
}

TEST_CASE("stage ordering") {
  expect_pass(testsupport::check_stage_ordering(6));
}

TEST_CASE("agreement with an independent finite-difference solve") {
  expect_pass(testsupport::check_fd_agreement(4, 1e-3));
}

TEST_CASE("cooling relief and growth with length") {
  expect_pass(testsupport::check_cooling_relief_and_length_growth());
}

TEST_CASE("fit roundtrips on forward-generated data") {
  expect_pass(testsupport::check_fit_roundtrips());
}

TEST_CASE("curve identities") {
  expect_pass(testsupport::check_curve_identities());
}

}  // TEST_SUITE
