#include "cryolink/materials.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "cryolink/errors.hpp"

namespace cryolink {

namespace {

[[noreturn]] void throw_domain(const char* what, double t, double lo, double hi) {
  std::ostringstream os;
  os << what << ": temperature " << t << " K outside domain [" << lo << ", " << hi << "] K";
  throw std::out_of_range(os.str());
}

void check_domain(const char* what, double t, double lo, double hi) {
  if (!(t >= lo && t <= hi)) throw_domain(what, t, lo, hi);
}

// NIST cryogenic correlation for the thermal conductivity of OFHC copper
// (Hust/Lankford form, coefficient set as published by the NIST cryogenic
// material properties program).  The curve is parametrized by the residual
// resistivity ratio; W0 is the impurity (defect) resistivity term, Wi the
// intrinsic phonon term and Wi0 their interaction correction.
//
//   beta  = 0.634 / RRR
//   W0    = beta / T
//   Wi    = P1 T^P2 / (1 + P1 P3 T^(P2+P4) exp(-(P5/T)^P6))
//   P7    = 0.838 / (beta / 3.0e-4)^0.1661
//   Wi0   = P7 Wi W0 / (Wi + W0)
//   k(T)  = 1 / (W0 + Wi + Wi0)
double nist_copper_conductivity(double t, double rrr) {
  constexpr double p1 = 1.754e-8;
  constexpr double p2 = 2.763;
  constexpr double p3 = 1102.0;
  constexpr double p4 = -0.165;
  constexpr double p5 = 70.0;
  constexpr double p6 = 1.756;

  const double beta = 0.634 / rrr;
  const double w0 = beta / t;
  const double wi =
      p1 * std::pow(t, p2) /
      (1.0 + p1 * p3 * std::pow(t, p2 + p4) * std::exp(-std::pow(p5 / t, p6)));
  const double p7 = 0.838 / std::pow(beta / 3.0e-4, 0.1661);
  const double wi0 = p7 * wi * w0 / (wi + w0);
  return 1.0 / (w0 + wi + wi0);
}

double simpson(const ConductivityModel& m, double a, double b,
               double (*eval)(const ConductivityModel&, double)) {
  const double mid = 0.5 * (a + b);
  return (b - a) / 6.0 * (eval(m, a) + 4.0 * eval(m, mid) + eval(m, b));
}

// Closed-form integral of a + b*T^c over [x, y].
double power_law_integral(const PowerLawSegment& s, double x, double y) {
  double poly;
  if (s.c == -1.0) {
    poly = s.b * std::log(y / x);
  } else {
    const double e = s.c + 1.0;
    poly = s.b / e * (std::pow(y, e) - std::pow(x, e));
  }
  return s.a * (y - x) + poly;
}

}  // namespace

struct ConductivityModel::IntegralCache {
  std::once_flag once;
  std::vector<double> t;  // cell boundaries, log-spaced
  std::vector<double> g;  // cumulative integral at boundaries, g[0] = 0
};

ConductivityModel ConductivityModel::nist_rrr_copper(double rrr) {
  if (!(rrr >= 2.0 && rrr <= 1.0e5)) {
    std::ostringstream os;
    os << "nist_rrr_copper: RRR " << rrr << " outside supported range [2, 1e5]";
    throw std::invalid_argument(os.str());
  }
  ConductivityModel m;
  m.kind_ = Kind::nist_rrr_copper;
  m.rrr_ = rrr;
  m.t_min_ = kTemperatureDomainMinK;
  m.t_max_ = kTemperatureDomainMaxK;
  m.cache_ = std::make_shared<IntegralCache>();
  return m;
}

ConductivityModel ConductivityModel::power_law(double a, double b, double c,
                                               double t_lo_k, double t_hi_k) {
  return power_law_piecewise({PowerLawSegment{t_lo_k, t_hi_k, a, b, c}});
}

ConductivityModel ConductivityModel::power_law_piecewise(std::vector<PowerLawSegment> segments) {
  if (segments.empty()) {
    throw std::invalid_argument("power_law_piecewise: at least one segment required");
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (!(s.t_lo_k >= 0.0) || !(s.t_hi_k > s.t_lo_k)) {
      throw std::invalid_argument("power_law_piecewise: segment bounds must satisfy 0 <= t_lo < t_hi");
    }
    if (s.t_lo_k == 0.0 && s.c < 0.0) {
      throw std::invalid_argument("power_law_piecewise: segment reaching T = 0 needs exponent c >= 0");
    }
    if (i + 1 < segments.size()) {
      const double gap = std::abs(segments[i + 1].t_lo_k - s.t_hi_k);
      if (gap > 1e-9 * std::max(1.0, s.t_hi_k)) {
        throw std::invalid_argument("power_law_piecewise: segments must be contiguous and ordered");
      }
    }
    // Positivity spot check: conductivity must stay strictly positive.
    for (double f : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const double t = s.t_lo_k + f * (s.t_hi_k - s.t_lo_k);
      const double v = s.a + s.b * std::pow(t, s.c);
      if (!(v > 0.0) && !(t == 0.0 && v == 0.0)) {
        std::ostringstream os;
        os << "power_law_piecewise: non-positive conductivity " << v << " at T = " << t << " K";
        throw std::invalid_argument(os.str());
      }
    }
  }
  ConductivityModel m;
  m.kind_ = Kind::power_law_piecewise;
  m.t_min_ = segments.front().t_lo_k;
  m.t_max_ = segments.back().t_hi_k;
  m.segments_ = std::move(segments);
  return m;
}

ConductivityModel ConductivityModel::tabulated(std::vector<TabulatedPoint> points) {
  if (points.size() < 2) {
    throw std::invalid_argument("tabulated: at least two points required");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].temperature_k > 0.0) || !(points[i].conductivity_w_per_k_m > 0.0)) {
      throw std::invalid_argument("tabulated: temperatures and conductivities must be positive");
    }
    if (i > 0 && !(points[i].temperature_k > points[i - 1].temperature_k)) {
      throw std::invalid_argument("tabulated: temperatures must be strictly increasing");
    }
  }
  ConductivityModel m;
  m.kind_ = Kind::tabulated;
  m.t_min_ = points.front().temperature_k;
  m.t_max_ = points.back().temperature_k;
  m.points_ = std::move(points);
  return m;
}

double ConductivityModel::evaluate_unchecked(double t) const {
  switch (kind_) {
    case Kind::nist_rrr_copper:
      return nist_copper_conductivity(t, rrr_);
    case Kind::power_law_piecewise: {
      auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                                 [](double v, const PowerLawSegment& s) { return v < s.t_hi_k; });
      if (it == segments_.end()) --it;
      return it->a + it->b * std::pow(t, it->c);
    }
    case Kind::tabulated: {
      auto it = std::upper_bound(points_.begin(), points_.end(), t,
                                 [](double v, const TabulatedPoint& p) { return v < p.temperature_k; });
      if (it == points_.begin()) ++it;
      if (it == points_.end()) --it;
      const auto& hi = *it;
      const auto& lo = *(it - 1);
      const double slope = std::log(hi.conductivity_w_per_k_m / lo.conductivity_w_per_k_m) /
                           std::log(hi.temperature_k / lo.temperature_k);
      return lo.conductivity_w_per_k_m * std::pow(t / lo.temperature_k, slope);
    }
  }
  throw std::logic_error("ConductivityModel: unknown kind");
}

double ConductivityModel::conductivity(double temperature_k) const {
  check_domain("conductivity", temperature_k, t_min_, t_max_);
  return evaluate_unchecked(temperature_k);
}

double ConductivityModel::integral(double t_lo_k, double t_hi_k) const {
  check_domain("conductivity integral (lower bound)", t_lo_k, t_min_, t_max_);
  check_domain("conductivity integral (upper bound)", t_hi_k, t_min_, t_max_);
  if (t_lo_k > t_hi_k) {
    throw std::invalid_argument("conductivity integral: bounds must satisfy t_lo <= t_hi");
  }
  if (t_lo_k == t_hi_k) return 0.0;

  switch (kind_) {
    case Kind::power_law_piecewise: {
      double sum = 0.0;
      for (const auto& s : segments_) {
        const double x = std::max(t_lo_k, s.t_lo_k);
        const double y = std::min(t_hi_k, s.t_hi_k);
        if (y > x) sum += power_law_integral(s, x, y);
      }
      return sum;
    }
    case Kind::tabulated: {
      double sum = 0.0;
      for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
        const auto& a = points_[i];
        const auto& b = points_[i + 1];
        const double x = std::max(t_lo_k, a.temperature_k);
        const double y = std::min(t_hi_k, b.temperature_k);
        if (y <= x) continue;
        const double m = std::log(b.conductivity_w_per_k_m / a.conductivity_w_per_k_m) /
                         std::log(b.temperature_k / a.temperature_k);
        if (std::abs(m + 1.0) < 1e-12) {
          sum += a.conductivity_w_per_k_m * a.temperature_k * std::log(y / x);
        } else {
          const double e = m + 1.0;
          sum += a.conductivity_w_per_k_m * a.temperature_k / e *
                 (std::pow(y / a.temperature_k, e) - std::pow(x / a.temperature_k, e));
        }
      }
      return sum;
    }
    case Kind::nist_rrr_copper:
      break;  // handled below via the cached cumulative integral
  }

  // Lazily build a cumulative integral on a fine log-spaced grid; interval
  // queries then combine whole cells with Simpson rules on the partial end
  // cells.  Evaluating both from the same cell decomposition keeps adjacent
  // intervals exactly additive.
  auto eval = [](const ConductivityModel& m, double t) { return m.evaluate_unchecked(t); };
  std::call_once(cache_->once, [&] {
    constexpr int kCells = 48000;
    auto& t = cache_->t;
    auto& g = cache_->g;
    t.resize(kCells + 1);
    g.resize(kCells + 1);
    const double ratio = std::log(t_max_ / t_min_);
    for (int i = 0; i <= kCells; ++i) {
      t[i] = t_min_ * std::exp(ratio * static_cast<double>(i) / kCells);
    }
    t.front() = t_min_;
    t.back() = t_max_;
    g[0] = 0.0;
    for (int i = 0; i < kCells; ++i) {
      g[i + 1] = g[i] + simpson(*this, t[i], t[i + 1], eval);
    }
  });

  const auto& t = cache_->t;
  const auto& g = cache_->g;
  const auto cell_of = [&](double x) -> std::size_t {
    const auto it = std::upper_bound(t.begin(), t.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - t.begin());
    return std::min(std::max<std::size_t>(i, 1) - 1, t.size() - 2);
  };
  const std::size_t ci = cell_of(t_lo_k);
  const std::size_t cj = cell_of(t_hi_k);
  if (ci == cj) {
    return simpson(*this, t_lo_k, t_hi_k, eval);
  }
  double sum = simpson(*this, t_lo_k, t[ci + 1], eval);
  sum += g[cj] - g[ci + 1];
  sum += simpson(*this, t[cj], t_hi_k, eval);
  return sum;
}

double nist_rrr_for_conductivity(double conductivity_w_per_k_m, double temperature_k,
                                 double rrr_lo, double rrr_hi) {
  if (!(conductivity_w_per_k_m > 0.0)) {
    throw std::invalid_argument("nist_rrr_for_conductivity: target conductivity must be positive");
  }
  auto value = [&](double rrr) {
    return nist_copper_conductivity(temperature_k, rrr) - conductivity_w_per_k_m;
  };
  check_domain("nist_rrr_for_conductivity", temperature_k, kTemperatureDomainMinK,
               kTemperatureDomainMaxK);
  double flo = value(rrr_lo);
  double fhi = value(rrr_hi);
  if (flo == 0.0) return rrr_lo;
  if (fhi == 0.0) return rrr_hi;
  if (flo * fhi > 0.0) {
    std::ostringstream os;
    os << "nist_rrr_for_conductivity: target " << conductivity_w_per_k_m << " W/(K m) at "
       << temperature_k << " K not bracketed by RRR in [" << rrr_lo << ", " << rrr_hi << "]";
    throw infeasible_error(os.str());
  }
  for (int i = 0; i < 200 && (rrr_hi - rrr_lo) > 1e-10 * rrr_hi; ++i) {
    const double mid = 0.5 * (rrr_lo + rrr_hi);
    const double fm = value(mid);
    if (fm == 0.0) return mid;
    if (fm * flo < 0.0) {
      rrr_hi = mid;
    } else {
      rrr_lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (rrr_lo + rrr_hi);
}

double CoolingCurve::power(double temperature_k) const {
  check_domain("cooling power", temperature_k, kTemperatureDomainMinK, kTemperatureDomainMaxK);
  if (!(prefactor_w > 0.0) || !(exponent > 0.0) || !(reference_temperature_k > 0.0)) {
    throw std::invalid_argument("cooling power: curve requires positive prefactor, exponent and T0");
  }
  const double x = temperature_k / reference_temperature_k - offset;
  if (x <= 0.0) return 0.0;
  return prefactor_w * std::pow(x, exponent);
}

double CoolingCurve::invert(double power_w) const {
  if (!(prefactor_w > 0.0) || !(exponent > 0.0) || !(reference_temperature_k > 0.0)) {
    throw std::invalid_argument("cooling invert: curve requires positive prefactor, exponent and T0");
  }
  if (power_w < 0.0) {
    throw std::out_of_range("cooling invert: extracted power must be non-negative");
  }
  if (power_w == 0.0) return knee_temperature_k();
  return reference_temperature_k * (offset + std::pow(power_w / prefactor_w, 1.0 / exponent));
}

ResistanceCurve ResistanceCurve::power_law(double r0_k_per_w, double t0_k, double exponent) {
  if (!(r0_k_per_w > 0.0) || !(t0_k > 0.0)) {
    throw std::invalid_argument("ResistanceCurve::power_law: r0 and t0 must be positive");
  }
  ResistanceCurve r;
  r.kind_ = Kind::power_law;
  r.r0_ = r0_k_per_w;
  r.t0_ = t0_k;
  r.exponent_ = exponent;
  return r;
}

ResistanceCurve ResistanceCurve::conductivity_shaped(double r0_k_per_w, double t_ref_k,
                                                     ConductivityModel model) {
  if (!(r0_k_per_w > 0.0)) {
    throw std::invalid_argument("ResistanceCurve::conductivity_shaped: r0 must be positive");
  }
  ResistanceCurve r;
  r.kind_ = Kind::conductivity_shaped;
  r.r0_ = r0_k_per_w;
  r.t0_ = t_ref_k;
  r.rho_ref_ = model.conductivity(t_ref_k);
  r.model_ = std::move(model);
  return r;
}

double ResistanceCurve::resistance(double temperature_k) const {
  if (kind_ == Kind::power_law) {
    check_domain("contact resistance", temperature_k, kTemperatureDomainMinK,
                 kTemperatureDomainMaxK);
    return r0_ * std::pow(temperature_k / t0_, exponent_);
  }
  return r0_ * rho_ref_ / model_->conductivity(temperature_k);
}

const ConductivityModel& ResistanceCurve::model() const {
  if (!model_) {
    throw std::logic_error("ResistanceCurve: no conductivity model attached");
  }
  return *model_;
}

}  // namespace cryolink
