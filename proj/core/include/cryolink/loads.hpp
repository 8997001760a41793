#pragma once

// Heat loads on the temperature stages of a link assembly.
//
// Each stage receives heat from the next-hotter surface through two
// channels:
//
//   * a distributed radiative load.  The gap between two long concentric
//     gray surfaces attenuates blackbody exchange by
//       lambda = 1 / (1/eps_inner + F/eps_outer),   F = C_inner/C_outer,
//     so the flux onto the inner surface is sigma*lambda*(T_hot^4 - T^4).
//     A stage may override lambda with a fitted effective attenuation
//     (e.g. for a multilayer-insulated gap); such a value is a total
//     transfer coefficient and usually absorbs the post conduction too.
//
//   * discrete conduction through support posts, one delta per post set of
//     each link module, with the per-post power following the stage's
//     PostLoadCurve evaluated at the local hot-stage temperature.
//
// build_line_load assembles both channels into the line density / delta
// representation the steady-state solver integrates.

#include <functional>
#include <vector>

#include "cryolink/geometry.hpp"

namespace cryolink {

inline constexpr double kStefanBoltzmann = 5.670374419e-8;  // W/(m^2 K^4)

// Radiative attenuation of the gap between gray surfaces with emissivities
// eps_inner/eps_outer and view factor F = C_inner/C_outer in (0, 1].
// Throws std::domain_error on arguments outside (0, 1].
double attenuation_lambda(double emissivity_inner, double emissivity_outer, double view_factor);

// Net flux sigma*lambda*(t_hot^4 - t_self^4) onto the colder surface, in
// W/m^2.  With include_self = false the cold-surface re-emission is
// neglected (t_self_k ignored).  Throws std::domain_error for lambda
// outside [0, 1], t_hot outside the temperature domain, or (include_self)
// t_self outside [0, t_hot).
double radiative_flux(double t_hot_k, double lambda, bool include_self = false,
                      double t_self_k = 0.0);

// Heat conducted through one support post whose hot end sits at t_hot_k.
double post_heat_load(const PostLoadCurve& curve, double t_hot_k);

// One discrete heat input on a stage.
struct PostDelta {
  double position_m = 0.0;
  double power_w = 0.0;
};

// Distributed + discrete heat load along one stage.  All contributions are
// non-negative.
struct LineLoadField {
  int stage_index = 0;
  std::function<double(double)> density_w_per_m;  // radiative + auxiliary flux
  std::vector<PostDelta> post_deltas;             // ordered by position
};

// Builds the load field for one stage.
//
//   t_hot   temperature profile of the enclosing surface (the next-hotter
//           stage, or the vacuum can for the outermost stage)
//   t_self  optional own-stage profile; used only when the stage has
//           radiative_self_coupling set, where the density becomes
//           sigma*lambda*(t_hot^4 - t_self^4)*C clamped at zero
//
// Post deltas are emitted only for stages with discrete_posts enabled; a
// stage whose attenuation override already folds the posts in gets none.
LineLoadField build_line_load(const LinkAssembly& assembly, int stage_index,
                              const std::function<double(double)>& t_hot,
                              const std::function<double(double)>& t_self = {});

}  // namespace cryolink
