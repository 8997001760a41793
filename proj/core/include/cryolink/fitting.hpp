#pragma once

// Measurement-reduction pipelines: power-law fits, shield conductivity
// extraction from heater sweeps, RRR fits against the NIST copper model,
// braid bulk/contact decomposition, support-post conductivity recovery, and
// solver-in-the-loop fitting of the effective radiative attenuation.
//
// All fits are deterministic pure functions of their inputs.  Results carry
// named parameters, the sum of squared errors, the degrees of freedom, and
// per-point residuals so callers can judge fit quality.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cryolink/geometry.hpp"
#include "cryolink/materials.hpp"
#include "cryolink/solver.hpp"

namespace cryolink {

struct FitParameter {
  double value = 0.0;
  std::string unit;
};

struct FitResult {
  std::map<std::string, FitParameter> parameters;  // name -> value (sorted, deterministic)
  double residual = 0.0;                           // sum of squared errors
  int dof = 0;                                     // points minus fitted parameters
  std::vector<double> point_residuals;             // data minus model, input order
};

// Serializes a FitResult as pretty-printed JSON (stable key order).
std::string serialize_fit_result(const FitResult& result);

struct XYPoint {
  double x = 0.0;
  double y = 0.0;
};

// Least-squares fit of y = a * x^b: closed-form fit in log-log space
// followed by one Gauss-Newton refinement pass in linear space (kept only if
// it lowers the linear-space error).  Requires at least 3 points with
// positive coordinates and at least two distinct x values.
FitResult fit_power_law(const std::vector<XYPoint>& points);

// One heater-sweep (or dipstick) measurement series: temperatures at fixed
// sensor stations along a conductor of uniform cross-section, one row per
// applied heater power.  background_power_w is the parasitic load flowing
// through the strip with the heater off.
struct HeaterSweep {
  std::vector<double> sensor_positions_m;            // strictly increasing
  double cross_section_m2 = 0.0;
  double background_power_w = 0.0;
  std::vector<double> heater_powers_w;               // strictly increasing, >= 0
  std::vector<std::vector<double>> temperatures_k;   // [row][sensor]
};

struct ConductivityPoint {
  double temperature_k = 0.0;
  double conductivity_w_per_k_m = 0.0;
};

// Reduces a heater sweep to conductivity points: for every row and adjacent
// sensor pair, rho(T_mid) = dx * (Q + Q_background) / (A * dT) with
// T_mid the pair midpoint.  This first-order reduction is accurate to
// better than 1% while dT / T_mid < 0.2; pairs beyond that bound still
// produce points but append a warning when `warnings` is given.  A pair
// whose dT falls below noise_floor_k cannot be divided meaningfully and
// raises validation_error.
std::vector<ConductivityPoint> shield_conductivity_points(
    const HeaterSweep& sweep, double noise_floor_k = 1e-3,
    std::vector<std::string>* warnings = nullptr);

// Fits the copper purity (RRR) whose NIST conductivity curve best matches
// the points: geometric scan over [10, 2000] plus golden-section refinement,
// minimizing the linear-space squared error.  Requires at least 3 points
// inside the model's temperature domain.
FitResult fit_rrr(const std::vector<ConductivityPoint>& points);

struct ResistancePoint {
  double temperature_k = 0.0;
  double resistance_k_per_w = 0.0;
};

struct BraidDecomposition {
  std::vector<ResistancePoint> contact_points;  // R_total - R_bulk on the common grid
  FitResult contact_fit;                        // power-law fit of the contact part
};

// Splits a measured total resistance into bulk and contact parts:
// R_contact(T) = R_total(T) - R_bulk(T) pointwise on the total series' grid
// restricted to the overlap (bulk interpolated log-log).  Differences that
// are non-positive but within noise_rel_tol of R_total are dropped;
// non-positive differences beyond that tolerance raise validation_error.
BraidDecomposition braid_decomposition(const std::vector<ResistancePoint>& total,
                                       const std::vector<ResistancePoint>& bulk,
                                       double noise_rel_tol = 0.05);

// Converts a fitted post heat-load power law P(T_hot) = a * T_hot^b into the
// post material's conductivity model: rho(T) = a * b * T^(b-1) * l / A.
ConductivityModel post_conductivity_from_fit(double a, double b, double post_length_m,
                                             double post_cross_section_m2);

struct ProfilePoint {
  double position_m = 0.0;
  double temperature_k = 0.0;
};

// Fits the outer stage's effective radiative attenuation: solves the stage-4
// profile for every candidate in lambda_grid (strictly increasing), scores
// each against the measured temperatures, and refines the grid minimum with
// one parabolic step.  A minimum on the grid boundary means the grid failed
// to bracket the optimum and raises convergence_error; per-candidate solver
// errors propagate unchanged.
FitResult fit_mli_lambda(const std::vector<ProfilePoint>& measured, const LinkAssembly& assembly,
                         const std::vector<double>& lambda_grid,
                         const SolverSettings& settings = {});

// Diagnostic for strip measurements: radiative exchange between a test strip
// and its surroundings, for judging whether radiation is negligible against
// the conducted heater power.
double strip_radiative_loss_w(double surface_area_m2, double emissivity,
                              double strip_temperature_k, double surroundings_temperature_k);

// --- Measurement ingestion -------------------------------------------------
//
// CSV files carry a header row; numbers are plain decimal.  Schemas:
//   heater sweep:  Q_W,T_<name>_K[,T_<name>_K...]   (+ JSON sidecar, below)
//   x/y points:    x,y
//   resistances:   T_K,R_K_per_W
//   profiles:      x_m,T_K
// The heater-sweep sidecar is a JSON document:
//   { "kind": "heater_sweep" | "dipstick",
//     "cross_section": {"mm2": 64.0},
//     "sensor_spacing": {"m": 0.235}            // or "sensor_positions": {"m": [..]}
//     "background_power": {"W": 0.0} }          // optional, default 0
// Unreadable files raise io_error; malformed content raises validation_error.

HeaterSweep load_heater_sweep(const std::string& csv_path, const std::string& sidecar_path);
std::vector<XYPoint> load_xy_points(const std::string& csv_path);
std::vector<ResistancePoint> load_resistance_points(const std::string& csv_path);
std::vector<ProfilePoint> load_profile_points(const std::string& csv_path);

}  // namespace cryolink
