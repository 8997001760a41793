#pragma once

// Physics invariants of the solver, exercised on seeded random instances.
// Each check returns a pass flag plus a human-readable account of the first
// failures, so the same battery can drive both the unit suites and the
// acceptance runner.

#include <string>

namespace testsupport {

struct CheckOutcome {
  bool pass = true;
  std::string detail;  // empty on success, first failures otherwise
};

// Heat extracted by all sinks of every stage equals the integrated line load
// plus post deltas plus intrinsic plate loads, within rel_tol.
CheckOutcome check_energy_balance(int assembly_count, double rel_tol);

// Symmetric builds (no cooling unit, or one central unit) produce profiles
// with T(x) == T(L - x) on every stage.
CheckOutcome check_mirror_symmetry(int assembly_count);

// Between consecutive sinks each stage profile forms a single arch: exactly
// one flow divide, temperature rising toward it and falling past it, heat
// flow non-decreasing, and the piece minima at the sink flanges.
CheckOutcome check_profile_shape(int assembly_count);

// Each stage runs strictly colder than the next-hotter stage everywhere.
CheckOutcome check_stage_ordering(int assembly_count);

// Interior temperatures and boundary heat flows of single-stage solves agree
// with an independent finite-difference discretization within rel_tol.
CheckOutcome check_fd_agreement(int instance_count, double rel_tol);

// Adding a central cooling unit never raises the stage-3 or stage-4 maxima,
// and maximum temperatures grow with assembly length.
CheckOutcome check_cooling_relief_and_length_growth();

// Parameter-recovery roundtrips: power-law fit, RRR fit, braid bulk/contact
// decomposition, post conductivity conversion, and the solver-in-the-loop
// attenuation fit, each on noise-free forward-generated data.
CheckOutcome check_fit_roundtrips();

// Exact curve identities: conductivity-integral additivity over split
// intervals and cooling-curve inversion roundtrips, both to 1e-9 relative;
// contact-jump residuals to solver tolerance.
CheckOutcome check_curve_identities();

}  // namespace testsupport
