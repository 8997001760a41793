#include "cryolink/loads.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cryolink/errors.hpp"

namespace cryolink {

double attenuation_lambda(double emissivity_inner, double emissivity_outer, double view_factor) {
  auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!in_unit(emissivity_inner) || !in_unit(emissivity_outer) || !in_unit(view_factor)) {
    std::ostringstream os;
    os << "attenuation_lambda: emissivities and view factor must lie in (0, 1], got ("
       << emissivity_inner << ", " << emissivity_outer << ", " << view_factor << ")";
    throw std::domain_error(os.str());
  }
  return 1.0 / (1.0 / emissivity_inner + view_factor / emissivity_outer);
}

double radiative_flux(double t_hot_k, double lambda, bool include_self, double t_self_k) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::domain_error("radiative_flux: attenuation must lie in [0, 1]");
  }
  if (!(t_hot_k >= kTemperatureDomainMinK && t_hot_k <= kTemperatureDomainMaxK)) {
    std::ostringstream os;
    os << "radiative_flux: hot temperature " << t_hot_k << " K outside domain ["
       << kTemperatureDomainMinK << ", " << kTemperatureDomainMaxK << "] K";
    throw std::domain_error(os.str());
  }
  double t4 = 0.0;
  if (include_self) {
    if (!(t_self_k >= 0.0 && t_self_k < t_hot_k)) {
      std::ostringstream os;
      os << "radiative_flux: self temperature " << t_self_k << " K must lie in [0, " << t_hot_k
         << ") K";
      throw std::domain_error(os.str());
    }
    t4 = std::pow(t_self_k, 4);
  }
  return kStefanBoltzmann * lambda * (std::pow(t_hot_k, 4) - t4);
}

double post_heat_load(const PostLoadCurve& curve, double t_hot_k) {
  if (!(t_hot_k >= kTemperatureDomainMinK && t_hot_k <= kTemperatureDomainMaxK)) {
    std::ostringstream os;
    os << "post_heat_load: hot temperature " << t_hot_k << " K outside domain ["
       << kTemperatureDomainMinK << ", " << kTemperatureDomainMaxK << "] K";
    throw std::domain_error(os.str());
  }
  if (curve.p0_w == 0.0) return 0.0;
  return curve.p0_w * std::pow(t_hot_k / curve.t0_hot_k, curve.exponent);
}

LineLoadField build_line_load(const LinkAssembly& assembly, int stage_index,
                              const std::function<double(double)>& t_hot,
                              const std::function<double(double)>& t_self) {
  if (!t_hot) {
    throw std::invalid_argument("build_line_load: hot-side temperature profile required");
  }
  const StageSpec& stage = assembly.stage(stage_index);

  double lambda;
  if (stage.mli_attenuation_override) {
    lambda = *stage.mli_attenuation_override;
  } else if (stage_index < kNumStages) {
    const StageSpec& outer = assembly.stage(stage_index + 1);
    lambda = attenuation_lambda(stage.emissivity, outer.emissivity,
                                stage.circumference_m / outer.circumference_m);
  } else {
    lambda = attenuation_lambda(stage.emissivity, assembly.vacuum_can.emissivity,
                                stage.circumference_m / assembly.vacuum_can.circumference_m);
  }

  LineLoadField field;
  field.stage_index = stage_index;

  const bool self_coupled = stage.radiative_self_coupling && static_cast<bool>(t_self);
  const double circumference = stage.circumference_m;
  const double extra = stage.extra_flux_w_per_m2;
  field.density_w_per_m = [lambda, circumference, extra, self_coupled, t_hot, t_self](double x) {
    const double th = t_hot(x);
    double flux = kStefanBoltzmann * lambda * std::pow(th, 4);
    if (self_coupled) {
      // Clamp rather than error: during outer fixed-point iterations the
      // own-stage estimate may transiently cross the hot profile, which
      // physically just means no net radiative gain there.
      const double ts = std::max(t_self(x), 0.0);
      flux = std::max(0.0, flux - kStefanBoltzmann * lambda * std::pow(ts, 4));
    }
    return (flux + extra) * circumference;
  };

  if (stage.discrete_posts) {
    for (const PostSet& set : post_sets(assembly)) {
      const double per_post = post_heat_load(stage.post_load, t_hot(set.position_m));
      const double power = set.count * per_post;
      if (power > 0.0) {
        field.post_deltas.push_back({set.position_m, power});
      }
    }
  }
  return field;
}

}  // namespace cryolink
