#pragma once

// Material property curves for cryogenic link modelling.
//
// Four curve families cover everything the rest of the library needs:
//
//   ConductivityModel   thermal conductivity rho(T) of a shield material,
//                       either the NIST cryogenic copper correlation
//                       parametrized by the residual resistivity ratio (RRR),
//                       a piecewise power law, or a tabulated set of points
//                       interpolated log-log.  Also supplies the definite
//                       integral  G(a,b) = int_a^b rho(T) dT, the quantity
//                       that governs steady-state conduction.
//
//   CoolingCurve        extracted power of a refrigeration stage as a
//                       function of its plate temperature,
//                       P(T) = p0 * max(T/T0 - offset, 0)^exponent,
//                       together with its closed-form inverse.
//
//   ResistanceCurve     temperature-dependent thermal contact resistance
//                       R(T), either a power law R0*(T/T0)^e or a curve
//                       shaped like 1/rho(T) of a reference material
//                       (R0 * rho(Tref)/rho(T)).
//
// All curves carry an explicit temperature domain; evaluation outside it
// throws std::out_of_range rather than extrapolating.

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cryolink {

// Default validity window for material curves.  The lower end sits below
// the coldest operating point of interest (a few millikelvin), the upper
// end at room temperature.
inline constexpr double kTemperatureDomainMinK = 0.004;
inline constexpr double kTemperatureDomainMaxK = 300.0;

// One piece of a piecewise power-law conductivity:
//   rho(T) = a + b * T^c   on   [t_lo_k, t_hi_k]         (W / (K m))
struct PowerLawSegment {
  double t_lo_k = kTemperatureDomainMinK;
  double t_hi_k = kTemperatureDomainMaxK;
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
};

// A point (T, rho(T)) of a tabulated conductivity curve.
struct TabulatedPoint {
  double temperature_k = 0.0;
  double conductivity_w_per_k_m = 0.0;
};

// Thermal conductivity curve rho(T) with its definite integral.
//
// Copies are cheap-ish (shared integral cache) and the object is immutable
// after construction, so instances may be shared freely across threads.
class ConductivityModel {
 public:
  enum class Kind { nist_rrr_copper, power_law_piecewise, tabulated };

  // NIST cryogenic correlation for OFHC copper, parametrized by the
  // residual resistivity ratio.  Valid over the full default domain.
  static ConductivityModel nist_rrr_copper(double rrr);

  // Single power-law segment rho(T) = a + b*T^c on [t_lo, t_hi].
  static ConductivityModel power_law(double a, double b, double c,
                                     double t_lo_k = kTemperatureDomainMinK,
                                     double t_hi_k = kTemperatureDomainMaxK);

  // Contiguous piecewise power law; segments must be ordered and adjacent.
  static ConductivityModel power_law_piecewise(std::vector<PowerLawSegment> segments);

  // Tabulated curve, interpolated linearly in log-log space.  The domain is
  // the table's temperature range.
  static ConductivityModel tabulated(std::vector<TabulatedPoint> points);

  // rho(T) in W/(K m); throws std::out_of_range outside the domain.
  double conductivity(double temperature_k) const;

  // int_{t_lo}^{t_hi} rho(T) dT in W/m; requires t_lo <= t_hi, both within
  // the domain.  Exactly additive over adjacent intervals.
  double integral(double t_lo_k, double t_hi_k) const;

  double domain_min_k() const { return t_min_; }
  double domain_max_k() const { return t_max_; }
  Kind kind() const { return kind_; }

  // Parameter accessors for serialization; only the ones matching kind()
  // contain data.
  double rrr() const { return rrr_; }
  const std::vector<PowerLawSegment>& segments() const { return segments_; }
  const std::vector<TabulatedPoint>& points() const { return points_; }

 private:
  ConductivityModel() = default;

  double evaluate_unchecked(double t) const;

  struct IntegralCache;

  Kind kind_ = Kind::power_law_piecewise;
  double rrr_ = 0.0;
  std::vector<PowerLawSegment> segments_;
  std::vector<TabulatedPoint> points_;
  double t_min_ = kTemperatureDomainMinK;
  double t_max_ = kTemperatureDomainMaxK;
  std::shared_ptr<IntegralCache> cache_;  // lazy, NIST kind only
};

// Finds the RRR whose NIST copper curve passes through
// (temperature_k, conductivity_w_per_k_m); bisection over [rrr_lo, rrr_hi].
// Throws infeasible_error when the target is not bracketed.
double nist_rrr_for_conductivity(double conductivity_w_per_k_m,
                                 double temperature_k,
                                 double rrr_lo = 10.0,
                                 double rrr_hi = 2000.0);

// Extracted power of a refrigeration stage versus plate temperature:
//   P(T) = prefactor_w * max(T / reference_temperature_k - offset, 0)^exponent
// Below the zero-power knee the curve extracts nothing.
struct CoolingCurve {
  double reference_temperature_k = 1.0;  // T0, the stage design temperature
  double prefactor_w = 0.0;              // P0
  double offset = 0.0;                   // dimensionless knee position
  double exponent = 1.0;

  // P(T); throws std::out_of_range outside [kTemperatureDomainMinK, MaxK].
  double power(double temperature_k) const;

  // Closed-form inverse: the plate temperature at which the stage extracts
  // power_w.  Returns reference_temperature_k * offset for power_w == 0;
  // throws std::out_of_range for negative power.  The result is not clamped
  // to the temperature domain -- callers decide how to treat domain exits.
  double invert(double power_w) const;

  // Temperature below which the curve extracts no power.
  double knee_temperature_k() const { return reference_temperature_k * offset; }
};

// Temperature-dependent thermal contact resistance R(T) in K/W.
class ResistanceCurve {
 public:
  enum class Kind { power_law, conductivity_shaped };

  // Default: flat 1 K/W power law (placeholder before configuration).
  ResistanceCurve() = default;

  // R(T) = r0 * (T / t0)^exponent
  static ResistanceCurve power_law(double r0_k_per_w, double t0_k, double exponent);

  // R(T) = r0 * rho(t_ref) / rho(T): resistance falling where the reference
  // material conducts better (bulk-dominated joints).
  static ResistanceCurve conductivity_shaped(double r0_k_per_w, double t_ref_k,
                                             ConductivityModel model);

  // R(T); throws std::out_of_range outside the curve domain.
  double resistance(double temperature_k) const;

  Kind kind() const { return kind_; }
  double r0_k_per_w() const { return r0_; }
  double t0_k() const { return t0_; }
  double exponent() const { return exponent_; }
  const ConductivityModel& model() const;

 private:
  Kind kind_ = Kind::power_law;
  double r0_ = 1.0;
  double t0_ = 1.0;
  double exponent_ = 0.0;
  double rho_ref_ = 0.0;  // rho(t_ref) cached for conductivity_shaped
  std::optional<ConductivityModel> model_;
};

}  // namespace cryolink
