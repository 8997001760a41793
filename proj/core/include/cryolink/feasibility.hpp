#pragma once

// Feasibility checks and length studies for standard link assemblies.
//
// A solved link is operable when
//   (i)   every node's 4 K sink plate sits at or below 5.2 K (helium
//         condensation), evaluated at node plates only — condensation
//         happens at the nodes, not at intermediate cooling units;
//   (ii)  every node's still plate stays strictly below 1.2 K; and
//   (iii) the base-stage temperature profile stays strictly below 50 mK
//         everywhere along the link.
// The sweep and maximum-length helpers build standard assemblies of varying
// length, solve them, and classify each length against these criteria; a
// length whose solve fails outright (the configuration cannot reject its
// heat at all) is recorded with the failure reason instead of a report.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cryolink/geometry.hpp"
#include "cryolink/solver.hpp"

namespace cryolink {

inline constexpr double kFourKelvinPlateLimitK = 5.2;  // inclusive
inline constexpr double kStillPlateLimitK = 1.2;       // strict
inline constexpr double kBaseProfileLimitK = 0.050;    // strict

struct CriterionResult {
  std::string name;               // "node-4k-plate", "still-plate", "base-profile"
  double threshold_k = 0.0;
  bool inclusive = false;         // pass when observed == threshold?
  double observed_extreme_k = 0.0;
  double location_m = 0.0;
  bool pass = false;
};

struct CriteriaReport {
  std::array<CriterionResult, 3> criteria{};

  bool all_ok() const {
    for (const CriterionResult& c : criteria) {
      if (!c.pass) return false;
    }
    return true;
  }
  // Name of the first failing criterion, or an empty string.
  std::string first_failure() const {
    for (const CriterionResult& c : criteria) {
      if (!c.pass) return c.name;
    }
    return {};
  }
};

CriteriaReport check_criteria(const AssemblySolution& solution);

struct StageExtremes {
  double coldest_k = 0.0;
  double hottest_k = 0.0;
};

struct LengthResult {
  double length_m = 0.0;
  std::optional<AssemblySolution> solution;        // present when the solve completed
  std::array<StageExtremes, kNumStages> extremes{};  // meaningful only when solved
  CriteriaReport criteria;                         // meaningful only when solved
  std::string error;                               // failure reason otherwise

  bool solved() const { return solution.has_value(); }
  bool feasible() const { return solved() && criteria.all_ok(); }
};

struct FirstViolation {
  double length_m = 0.0;
  std::string criterion;  // criterion name, or "error" when the solve failed
};

struct LengthSweepResult {
  std::vector<LengthResult> entries;                // in input (ascending) order
  std::optional<FirstViolation> first_violation;    // earliest non-feasible length
};

// Solves a standard assembly at each requested length (strictly increasing).
// jobs > 1 distributes the lengths over worker threads; results keep the
// input order either way, and per-length solver failures are recorded in the
// corresponding entry rather than aborting the sweep.
LengthSweepResult sweep_lengths(const std::vector<double>& lengths_m,
                                std::optional<double> cu_spacing_m = std::nullopt,
                                const StandardOptions& options = {},
                                const SolverSettings& settings = {}, int jobs = 1);

// Largest feasible standard-assembly length within [lo_m, hi_m], located by
// bisection to tolerance_m (default: one braid spacing).  The lower bracket
// end must be feasible and the upper end infeasible; otherwise the answer
// lies outside the bracket and infeasible_error is thrown.
double max_feasible_length(double lo_m, double hi_m,
                           std::optional<double> cu_spacing_m = std::nullopt,
                           const StandardOptions& options = {},
                           const SolverSettings& settings = {}, double tolerance_m = 0.5);

// Attenuation of a microwave channel of the given length.
double channel_loss_db(double length_m, double db_per_km);

}  // namespace cryolink
