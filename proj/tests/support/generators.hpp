#pragma once

// Seeded random instance generators for property tests.  All draws go
// through the supplied engine, so a fixed seed reproduces the exact
// instance; parameter ranges are chosen to keep every instance solvable.

#include <random>

#include "cryolink/geometry.hpp"

namespace testsupport {

// A catalog-built assembly with randomized build knobs: length, optional
// cooling-unit spacing, post counts, module lengths, can temperature.
cryolink::LinkAssembly random_standard_assembly(std::mt19937& rng);

// A single-stage conduction problem against a constant hot-side temperature:
// two nodes joined by plain link modules (no braids, no other joints), a
// power-law shield material and a fixed radiative attenuation, so the stage-1
// solve is directly comparable with a finite-difference oracle.
struct SingleStageInstance {
  cryolink::LinkAssembly assembly;
  double t_hot_k = 0.0;
};

SingleStageInstance random_single_stage_instance(std::mt19937& rng);

}  // namespace testsupport
