#pragma once

// Steady-state temperature solver for link assemblies.
//
// Within one stage, steady conduction along the shield obeys
//
//   A * rho(T(x)) * dT/dx = Q(x)
//
// where Q(x) is the heat flowing toward the nearest downstream sink,
// accumulated from the distributed radiative density and the discrete post
// deltas.  Between two sinks the load splits at a flow divide: the point
// where the temperature profiles integrated up from both sinks meet.  The
// solver finds each divide by bisection, balances the sink plate
// temperatures (which depend on the extracted power through the cooling
// curves) with relaxation sweeps across the segments, and resolves contact
// jumps T_hot - T_cold = R(T_mid) * Q at braid and cooling-unit joints by
// safeguarded bisection.
//
// Stages couple only downward: the radiative and post loads on stage n are
// evaluated on the solved profile of stage n+1 (the vacuum can for the
// outermost stage).  A stage with radiative_self_coupling (its own
// temperature matters for the net flux) is iterated with a relaxed
// fixed-point loop on its own profile.

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cryolink/geometry.hpp"
#include "cryolink/loads.hpp"

namespace cryolink {

struct SolverSettings {
  // Adaptive step control of the conduction integrator.
  double ode_rel_tol = 1e-6;
  double ode_abs_tol_k = 1e-6;
  // Contact-jump bisection terminates when the bracket width drops below
  // jump_rel_tol * T.
  double jump_rel_tol = 1e-9;
  // Flow-divide bisection resolution along the axis.
  double divide_tol_m = 1e-4;
  // Sink-share relaxation sweeps per stage.
  int max_relaxation_sweeps = 64;
  // Self-coupled fixed-point loop.
  double picard_relaxation = 0.5;
  double picard_tol_k = 1e-2;
  int max_picard_iterations = 100;
  double picard_initial_guess_k = 60.0;
  // Maximum sample spacing in exported profiles.
  double record_max_step_m = 0.05;
};

// Applies "name=value" overrides (as parsed from a config or command line).
// Unknown names throw validation_error listing the accepted keys.
void apply_settings(SolverSettings& settings, const std::map<std::string, double>& overrides);

enum class SampleKind { interior, jump_minus, jump_plus, sink };
const char* to_string(SampleKind kind);

// One exported profile point.  heat_flow_w is the conductive flow in the +x
// direction (negative where heat moves toward a sink on the left); for sink
// samples it is the total power extracted at the plate.
struct ProfileSample {
  double position_m = 0.0;
  double temperature_k = 0.0;
  double heat_flow_w = 0.0;
  SampleKind kind = SampleKind::interior;
};

struct SinkRecord {
  double position_m = 0.0;
  ModuleKind source = ModuleKind::node;
  std::size_t module_index = 0;
  double extracted_power_w = 0.0;      // conducted shares plus intrinsic load
  double plate_temperature_k = 0.0;
};

struct StageProfile {
  int stage_index = 0;
  std::vector<ProfileSample> samples;        // ordered by position
  std::vector<SinkRecord> sinks;             // ordered by position
  std::vector<double> divide_positions_m;    // interior flow divides
  int relaxation_sweeps = 0;
  int picard_iterations = 0;
  double picard_residual_k = 0.0;

  double max_temperature_k() const;
  double min_temperature_k() const;
  // Piecewise-linear interpolation (right-continuous across jumps); clamps
  // to the profile ends.
  double temperature_at(double position_m) const;
};

struct ConvergenceReport {
  int picard_iterations = 0;
  double picard_residual_k = 0.0;
  std::array<int, kNumStages> relaxation_sweeps{};
};

struct AssemblySolution {
  std::array<StageProfile, kNumStages> stages{};  // [stage_index - 1]
  ConvergenceReport convergence;

  const StageProfile& stage(int stage_index) const;
};

// Hot-side temperature at which a contact carrying heat_flow_w sits against
// a cold side at t_minus_k:  t_plus - t_minus = R((t_plus+t_minus)/2) * Q.
// Monotone in Q; solved by expanding-bracket bisection.  Throws
// infeasible_error if no solution exists within the temperature domain.
double contact_jump(const ResistanceCurve& resistance, double heat_flow_w, double t_minus_k,
                    const SolverSettings& settings = {});

struct SegmentSample {
  double position_m = 0.0;
  double temperature_k = 0.0;
  double heat_flow_w = 0.0;
};

// Integrates the conduction equation across [x_a, x_b] given the state at
// the starting end.  With direction = +1 integration runs from x_a
// (T = t_start_k, accumulated flow Q = q_start_w) toward x_b, with
//
//   Q(x) = q_start - int_{x_a}^{x} w dx' - sum of post deltas in (x_a, x],
//   dT/dx = Q(x) / (A * rho(T));
//
// with direction = -1 it runs from x_b toward x_a with the mirrored
// accumulation.  Samples are returned ordered by increasing position.
std::vector<SegmentSample> integrate_segment(double cross_section_m2,
                                             const ConductivityModel& material,
                                             const LineLoadField& loads, double x_a, double x_b,
                                             double t_start_k, double q_start_w,
                                             int direction = +1,
                                             const SolverSettings& settings = {});

// Solves one stage against a fixed hot-side profile (the enclosing stage's
// temperature as a function of position; pass a constant for the vacuum
// can).  Runs the self-coupled fixed-point loop when the stage requires it.
StageProfile solve_stage(const LinkAssembly& assembly, int stage_index,
                         const std::function<double(double)>& t_hot,
                         const SolverSettings& settings = {});

// Solves all four stages, outermost first, feeding each solved profile to
// the next-colder stage.
AssemblySolution solve_assembly(const LinkAssembly& assembly,
                                const SolverSettings& settings = {});

}  // namespace cryolink
