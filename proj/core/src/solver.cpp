#include "cryolink/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "cryolink/errors.hpp"
#include "cryolink/materials.hpp"

namespace cryolink {

namespace {

[[noreturn]] void throw_with(std::ostringstream& msg, bool feasibility) {
  if (feasibility) throw infeasible_error(msg.str());
  throw convergence_error(msg.str());
}

// Conductivity evaluation that reports a domain exit as an infeasibility of
// the configuration rather than a bare range error.  With clamp_high set the
// evaluation saturates at the top of the material domain instead: transient
// iterates of a self-coupled stage may overshoot before the radiative
// feedback pulls them back, and only the converged profile is validated.
double rho_checked(const ConductivityModel& material, double temperature_k, int stage_index,
                   bool clamp_high = false) {
  if (clamp_high && temperature_k > material.domain_max_k()) {
    temperature_k = material.domain_max_k();
  }
  try {
    return material.conductivity(temperature_k);
  } catch (const std::out_of_range& e) {
    std::ostringstream msg;
    msg << "stage " << stage_index << ": " << e.what();
    throw infeasible_error(msg.str());
  }
}

// Cumulative distributed load over a span, sampled once so that interval
// queries are cheap and exactly additive.  The density is treated as
// piecewise linear between grid nodes and the cumulative integral is exact
// for that interpolant.
class LoadTable {
 public:
  LoadTable(const LineLoadField& field, double x_lo, double x_hi) : x_lo_(x_lo), x_hi_(x_hi) {
    const double span = std::max(x_hi - x_lo, 0.0);
    const std::size_t cells =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(span / 0.02)), 32, 400000);
    dx_ = span > 0.0 ? span / static_cast<double>(cells) : 1.0;
    density_.resize(cells + 1);
    cumulative_.resize(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) {
      const double x = x_lo_ + dx_ * static_cast<double>(i);
      density_[i] = std::max(0.0, field.density_w_per_m ? field.density_w_per_m(x) : 0.0);
    }
    cumulative_[0] = 0.0;
    for (std::size_t i = 1; i <= cells; ++i) {
      cumulative_[i] = cumulative_[i - 1] + 0.5 * dx_ * (density_[i - 1] + density_[i]);
    }
  }

  // Integral of the density over [a, b] (a <= b), clamped to the span.
  double distributed(double a, double b) const { return cumulative_at(b) - cumulative_at(a); }

 private:
  double cumulative_at(double x) const {
    if (x <= x_lo_) return 0.0;
    if (x >= x_hi_) return cumulative_.back();
    const double u = (x - x_lo_) / dx_;
    std::size_t i = std::min(static_cast<std::size_t>(u), density_.size() - 2);
    const double t = x - (x_lo_ + dx_ * static_cast<double>(i));
    const double w_lo = density_[i];
    const double w_hi = density_[i + 1];
    const double w_x = w_lo + (w_hi - w_lo) * (t / dx_);
    return cumulative_[i] + 0.5 * t * (w_lo + w_x);
  }

  double x_lo_;
  double x_hi_;
  double dx_;
  std::vector<double> density_;
  std::vector<double> cumulative_;
};

struct PathEvent {
  double tau = 0.0;
  bool is_post = false;
  double post_w = 0.0;
  const ResistanceCurve* joint = nullptr;
  // Tie-break so that coincident events replay in geometric crossing order.
  long order = 0;
};

// One integration path running from a sink flange toward a flow divide (or a
// closed end).  tau is the distance walked from the start; the accumulated
// flow starts at q_start_w and decreases by the distributed integral and the
// post deltas crossed.
struct PathSpec {
  double cross_section_m2 = 0.0;
  const ConductivityModel* material = nullptr;
  int stage_index = 0;
  double length_m = 0.0;
  double q_start_w = 0.0;
  std::function<double(double)> distributed_from_start;  // D(tau), non-decreasing, D(0) = 0
  std::vector<PathEvent> events;                         // sorted by tau; posts before joints
  double origin_x = 0.0;
  int x_direction = +1;       // x = origin_x + x_direction * tau
  bool clamp_high = false;    // saturate conductivity at the domain top (transient iterates)
};

struct PathRecorder {
  std::vector<ProfileSample>* out = nullptr;
  double max_dx = 0.05;
  double q_sign = 1.0;  // recorded heat flow = q_sign * path flow
};

void sort_events(std::vector<PathEvent>& events) {
  std::sort(events.begin(), events.end(), [](const PathEvent& a, const PathEvent& b) {
    if (a.tau != b.tau) return a.tau < b.tau;
    if (a.is_post != b.is_post) return a.is_post;  // post deltas apply on the sink side
    return a.order < b.order;
  });
}

// Cash-Karp embedded Runge-Kutta pair for dT/dtau = Q(tau) / (A * rho(T)),
// integrating one smooth piece [tau0, tau1] (no events inside).  Updates the
// temperature in place and records accepted interior points.  The landing
// point at tau1 is left to the caller so it can attach the right sample kind.
void rk_piece(const PathSpec& path, double tau0, double tau1, double q_at_tau0, double& temperature,
              const SolverSettings& st, PathRecorder* rec) {
  static constexpr double kA21 = 1.0 / 5.0;
  static constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
  static constexpr double kA41 = 3.0 / 10.0, kA42 = -9.0 / 10.0, kA43 = 6.0 / 5.0;
  static constexpr double kA51 = -11.0 / 54.0, kA52 = 5.0 / 2.0, kA53 = -70.0 / 27.0,
                          kA54 = 35.0 / 27.0;
  static constexpr double kA61 = 1631.0 / 55296.0, kA62 = 175.0 / 512.0, kA63 = 575.0 / 13824.0,
                          kA64 = 44275.0 / 110592.0, kA65 = 253.0 / 4096.0;
  static constexpr double kB1 = 37.0 / 378.0, kB3 = 250.0 / 621.0, kB4 = 125.0 / 594.0,
                          kB6 = 512.0 / 1771.0;
  static constexpr double kE1 = kB1 - 2825.0 / 27648.0, kE3 = kB3 - 18575.0 / 48384.0,
                          kE4 = kB4 - 13525.0 / 55296.0, kE5 = -277.0 / 14336.0,
                          kE6 = kB6 - 1.0 / 4.0;

  const double span = tau1 - tau0;
  if (!(span > 0.0)) return;
  const double d_base = path.distributed_from_start(tau0);
  auto flow = [&](double tau) {
    return q_at_tau0 - (path.distributed_from_start(tau) - d_base);
  };
  auto deriv = [&](double tau, double t) {
    return flow(tau) / (path.cross_section_m2 *
                        rho_checked(*path.material, t, path.stage_index, path.clamp_high));
  };

  const double min_h = 1e-14 * std::max(1.0, path.length_m);
  if (span <= min_h) {
    temperature += span * deriv(tau0 + 0.5 * span, temperature);
    return;
  }

  double tau = tau0;
  double t = temperature;
  double h = span;
  if (rec != nullptr) h = std::min(h, rec->max_dx);
  while (tau < tau1) {
    h = std::min(h, tau1 - tau);
    const double k1 = deriv(tau, t);
    const double k2 = deriv(tau + kA21 * h, t + h * (kA21 * k1));
    const double k3 = deriv(tau + 0.3 * h, t + h * (kA31 * k1 + kA32 * k2));
    const double k4 = deriv(tau + 0.6 * h, t + h * (kA41 * k1 + kA42 * k2 + kA43 * k3));
    const double k5 = deriv(tau + h, t + h * (kA51 * k1 + kA52 * k2 + kA53 * k3 + kA54 * k4));
    const double k6 = deriv(tau + 0.875 * h,
                            t + h * (kA61 * k1 + kA62 * k2 + kA63 * k3 + kA64 * k4 + kA65 * k5));
    const double t_next = t + h * (kB1 * k1 + kB3 * k3 + kB4 * k4 + kB6 * k6);
    const double err = std::abs(h * (kE1 * k1 + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6));
    const double tol =
        st.ode_abs_tol_k + st.ode_rel_tol * std::max(std::abs(t), std::abs(t_next));
    if (err <= tol || h <= min_h) {
      if (err > tol) {
        std::ostringstream msg;
        msg << "stage " << path.stage_index << ": integrator step size underflow near x = "
            << path.origin_x + path.x_direction * tau << " m";
        throw_with(msg, /*feasibility=*/false);
      }
      tau += h;
      t = t_next;
      if (rec != nullptr && tau < tau1) {
        rec->out->push_back({path.origin_x + path.x_direction * tau, t, rec->q_sign * flow(tau),
                             SampleKind::interior});
      }
      double grow = err > 0.0 ? 0.9 * std::pow(tol / err, 0.2) : 5.0;
      h *= std::clamp(grow, 1.0, 5.0);
      if (rec != nullptr) h = std::min(h, rec->max_dx);
    } else {
      h *= std::clamp(0.9 * std::pow(tol / err, 0.25), 0.1, 0.9);
      h = std::max(h, min_h);
    }
  }
  temperature = t;
}

double jump_across(const ResistanceCurve& joint, double q, double t_minus,
                   const SolverSettings& st, bool clamp_high = false);

// Walks one full path: smooth pieces separated by post deltas (exact steps in
// the accumulated flow) and contact joints (temperature jumps).  Returns the
// temperature at the far end.
double integrate_path(const PathSpec& path, double t_start, const SolverSettings& st,
                      PathRecorder* rec) {
  double tau = 0.0;
  double t = t_start;
  double crossed_posts = 0.0;
  auto flow_at = [&](double at) {
    return path.q_start_w - path.distributed_from_start(at) - crossed_posts;
  };
  const SampleKind pre_kind = path.x_direction > 0 ? SampleKind::jump_minus : SampleKind::jump_plus;
  const SampleKind post_kind = path.x_direction > 0 ? SampleKind::jump_plus : SampleKind::jump_minus;
  auto record = [&](double at, double temp, SampleKind kind) {
    if (rec != nullptr) {
      rec->out->push_back(
          {path.origin_x + path.x_direction * at, temp, rec->q_sign * flow_at(at), kind});
    }
  };

  record(0.0, t, SampleKind::interior);
  const double tiny = 1e-14 * std::max(1.0, path.length_m);
  std::size_t next_event = 0;
  while (true) {
    const bool has_event = next_event < path.events.size();
    const double stop = has_event ? std::min(path.events[next_event].tau, path.length_m)
                                  : path.length_m;
    if (stop > tau + tiny) {
      const double q_here = flow_at(tau);
      rk_piece(path, tau, stop, q_here, t, st, rec);
      tau = stop;
    } else if (stop > tau) {
      tau = stop;
    }
    if (!has_event) break;
    const PathEvent& ev = path.events[next_event++];
    if (ev.is_post) {
      record(tau, t, SampleKind::interior);
      crossed_posts += ev.post_w;
      record(tau, t, SampleKind::interior);
    } else {
      record(tau, t, pre_kind);
      t = jump_across(*ev.joint, std::max(0.0, flow_at(tau)), t, st, path.clamp_high);
      record(tau, t, post_kind);
    }
  }
  record(path.length_m, t, SampleKind::interior);
  return t;
}

double jump_across(const ResistanceCurve& joint, double q, double t_minus,
                   const SolverSettings& st, bool clamp_high) {
  if (q <= 0.0) return t_minus;
  // Transient iterates may sit above the resistance-curve domain; saturate
  // the evaluation there (mirroring rho_checked) so the iteration survives.
  // Converged profiles are re-validated against the strict domain upstream.
  const double r_cap = clamp_high
                           ? (joint.kind() == ResistanceCurve::Kind::conductivity_shaped
                                  ? joint.model().domain_max_k()
                                  : kTemperatureDomainMaxK)
                           : std::numeric_limits<double>::infinity();
  auto r_at = [&](double t) { return joint.resistance(std::min(t, r_cap)); };
  auto residual = [&](double t_plus) {
    return (t_plus - t_minus) - r_at(0.5 * (t_plus + t_minus)) * q;
  };
  // Strict solves bound the flange temperature by the material domain;
  // clamped (transient) solves bound the jump magnitude instead.
  const double t_limit =
      clamp_high ? t_minus + kTemperatureDomainMaxK : kTemperatureDomainMaxK;
  double step = std::max(r_at(t_minus) * q, 1e-12 * std::max(t_minus, 1.0));
  double lo = t_minus;
  double hi = t_minus + step;
  int expansions = 0;
  while (hi < t_limit && residual(hi) < 0.0) {
    lo = hi;
    step *= 2.0;
    hi = t_minus + step;
    if (++expansions > 200) break;
  }
  if (hi >= t_limit) {
    hi = t_limit;
    if (residual(hi) < 0.0) {
      std::ostringstream msg;
      msg << "contact jump from " << t_minus << " K carrying " << q
          << " W exceeds the temperature domain";
      throw_with(msg, /*feasibility=*/true);
    }
  }
  for (int i = 0; i < 200; ++i) {
    const double width_tol = st.jump_rel_tol * std::max(0.5 * (lo + hi), kTemperatureDomainMinK);
    if (hi - lo <= width_tol) break;
    const double mid = 0.5 * (lo + hi);
    if (residual(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Stage solve: flow divides, sink balance, profile assembly.

struct SinkState {
  double from_left = 0.0;   // committed conducted power arriving from the left
  double from_right = 0.0;  // ... and from the right
};

class StageSolver {
 public:
  StageSolver(const LinkAssembly& assembly, int stage_index, const LineLoadField& field,
              const SolverSettings& st, bool clamp_high = false)
      : assembly_(assembly),
        spec_(assembly.stage(stage_index)),
        stage_index_(stage_index),
        st_(st),
        clamp_high_(clamp_high),
        x_lo_(0.0),
        x_hi_(assembly.total_length_m()),
        table_(field, 0.0, assembly.total_length_m()),
        sinks_(sink_points(assembly, stage_index)),
        interfaces_(interfaces(assembly, stage_index)) {
    if (sinks_.empty()) {
      std::ostringstream msg;
      msg << "stage " << stage_index_ << " has no heat sinks";
      throw infeasible_error(msg.str());
    }
    pos_tol_ = 1e-9 * std::max(1.0, x_hi_ - x_lo_);
    partition_posts(field.post_deltas);
    build_segments();
  }

  StageProfile run() {
    // Loads into end sinks from closed-end regions are fixed by geometry.
    const int max_sweeps = st_.max_relaxation_sweeps;
    int sweeps = 0;
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
      double max_move = 0.0;
      for (Segment& seg : segments_) {
        const double s = locate_divide(seg);
        max_move = std::max(max_move, std::abs(s - seg.divide));
        seg.divide = s;
        state_[seg.left_sink].from_right = side_flow(seg, /*left_side=*/true, s);
        state_[seg.right_sink].from_left = side_flow(seg, /*left_side=*/false, s);
      }
      sweeps = sweep;
      if (sweep >= 2 && max_move < st_.divide_tol_m) break;
      if (sweep == max_sweeps && max_move >= st_.divide_tol_m && !segments_.empty()) {
        std::ostringstream msg;
        msg << "stage " << stage_index_ << ": flow-divide relaxation did not settle within "
            << max_sweeps << " sweeps (last movement " << max_move << " m)";
        throw_with(msg, /*feasibility=*/false);
      }
    }
    return assemble(sweeps);
  }

 private:
  struct Segment {
    int left_sink = -1;   // index into sinks_; -1 marks a closed end
    int right_sink = -1;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<const InterfacePoint*> joints;  // position-ordered, within [lo, hi]
    std::vector<PostDelta> posts;               // strictly inside (lo, hi)
    double divide = 0.0;
  };

  void partition_posts(const std::vector<PostDelta>& posts) {
    direct_post_w_.assign(sinks_.size(), 0.0);
    interior_posts_.clear();
    for (const PostDelta& post : posts) {
      bool direct = false;
      for (std::size_t k = 0; k < sinks_.size(); ++k) {
        if (std::abs(post.position_m - sinks_[k].position_m) <= pos_tol_) {
          direct_post_w_[k] += post.power_w;
          direct = true;
          break;
        }
      }
      if (!direct) interior_posts_.push_back(post);
    }
    std::sort(interior_posts_.begin(), interior_posts_.end(),
              [](const PostDelta& a, const PostDelta& b) { return a.position_m < b.position_m; });
  }

  void build_segments() {
    state_.assign(sinks_.size(), SinkState{});
    segments_.clear();

    auto joints_in = [&](double lo, double hi) {
      std::vector<const InterfacePoint*> out;
      for (const InterfacePoint& joint : interfaces_) {
        if (joint.position_m >= lo - pos_tol_ && joint.position_m <= hi + pos_tol_) {
          out.push_back(&joint);
        }
      }
      return out;
    };
    auto posts_in = [&](double lo, double hi) {
      std::vector<PostDelta> out;
      for (const PostDelta& post : interior_posts_) {
        if (post.position_m > lo && post.position_m < hi) out.push_back(post);
      }
      return out;
    };

    // Closed-end regions feed their whole load into the adjacent sink.
    if (sinks_.front().position_m > x_lo_ + pos_tol_) {
      Segment seg;
      seg.right_sink = 0;
      seg.lo = x_lo_;
      seg.hi = sinks_.front().position_m;
      seg.joints = joints_in(seg.lo, seg.hi);
      seg.posts = posts_in(seg.lo - pos_tol_, seg.hi);
      seg.divide = seg.lo;
      leading_ = seg;
      state_.front().from_left = side_flow(*leading_, /*left_side=*/false, seg.lo);
    }
    if (sinks_.back().position_m < x_hi_ - pos_tol_) {
      Segment seg;
      seg.left_sink = static_cast<int>(sinks_.size()) - 1;
      seg.lo = sinks_.back().position_m;
      seg.hi = x_hi_;
      seg.joints = joints_in(seg.lo, seg.hi);
      seg.posts = posts_in(seg.lo, seg.hi + pos_tol_);
      seg.divide = seg.hi;
      trailing_ = seg;
      state_.back().from_right = side_flow(*trailing_, /*left_side=*/true, seg.hi);
    }
    for (std::size_t k = 0; k + 1 < sinks_.size(); ++k) {
      Segment seg;
      seg.left_sink = static_cast<int>(k);
      seg.right_sink = static_cast<int>(k) + 1;
      seg.lo = sinks_[k].position_m;
      seg.hi = sinks_[k + 1].position_m;
      seg.joints = joints_in(seg.lo, seg.hi);
      seg.posts = posts_in(seg.lo, seg.hi);
      seg.divide = 0.5 * (seg.lo + seg.hi);
      segments_.push_back(std::move(seg));
    }
  }

  // Conducted power a side delivers to its sink when the divide sits at s.
  double side_flow(const Segment& seg, bool left_side, double s) const {
    double q = left_side ? table_.distributed(seg.lo, s) : table_.distributed(s, seg.hi);
    for (const PostDelta& post : seg.posts) {
      if (left_side ? post.position_m <= s : post.position_m > s) q += post.power_w;
    }
    return q;
  }

  double plate_temperature(int sink, double power_w) const {
    const SinkPoint& point = sinks_[static_cast<std::size_t>(sink)];
    const double plate = point.cooling.invert(power_w);
    if (plate > kTemperatureDomainMaxK || plate < kTemperatureDomainMinK) {
      std::ostringstream msg;
      msg << "stage " << stage_index_ << ": sink at x = " << point.position_m
          << " m would need a plate at " << plate << " K to reject " << power_w << " W";
      throw infeasible_error(msg.str());
    }
    return plate;
  }

  double sink_power(int sink, double own_side_w, bool own_is_right) const {
    const SinkState& s = state_[static_cast<std::size_t>(sink)];
    const double other = own_is_right ? s.from_left : s.from_right;
    return other + own_side_w + sinks_[static_cast<std::size_t>(sink)].intrinsic_load_w +
           direct_post_w_[static_cast<std::size_t>(sink)];
  }

  PathSpec make_path(const Segment& seg, bool left_side, double s, double q_side,
                     bool clamped) const {
    PathSpec path;
    path.cross_section_m2 = spec_.cross_section_m2;
    path.material = &spec_.shield_material;
    path.stage_index = stage_index_;
    path.clamp_high = clamped;
    path.q_start_w = q_side;
    if (left_side) {
      path.length_m = s - seg.lo;
      path.origin_x = seg.lo;
      path.x_direction = +1;
      path.distributed_from_start = [this, lo = seg.lo](double tau) {
        return table_.distributed(lo, lo + tau);
      };
    } else {
      path.length_m = seg.hi - s;
      path.origin_x = seg.hi;
      path.x_direction = -1;
      path.distributed_from_start = [this, hi = seg.hi](double tau) {
        return table_.distributed(hi - tau, hi);
      };
    }
    auto snap = [&](double tau) {
      if (tau < pos_tol_) return 0.0;
      if (tau > path.length_m - pos_tol_) return path.length_m;
      return tau;
    };
    for (const InterfacePoint* joint : seg.joints) {
      const double x = joint->position_m;
      const bool in_side = left_side ? (x <= s + pos_tol_) : (x >= s - pos_tol_);
      if (!in_side) continue;
      PathEvent ev;
      ev.tau = snap(left_side ? x - seg.lo : seg.hi - x);
      ev.joint = &joint->resistance;
      ev.order = path.x_direction > 0 ? static_cast<long>(joint->module_index)
                                      : -static_cast<long>(joint->module_index);
      path.events.push_back(ev);
    }
    for (const PostDelta& post : seg.posts) {
      const bool in_side = left_side ? (post.position_m <= s) : (post.position_m > s);
      if (!in_side) continue;
      PathEvent ev;
      ev.tau = snap(left_side ? post.position_m - seg.lo : seg.hi - post.position_m);
      ev.is_post = true;
      ev.post_w = post.power_w;
      path.events.push_back(ev);
    }
    sort_events(path.events);
    return path;
  }

  // Temperature reached at the divide, walking away from the side's sink.
  // Probe evaluations (divide search, relaxation sweeps) saturate material
  // curves at the domain top: a probe deliberately routes the whole segment
  // load through one side, and that transient state may run far hotter than
  // any admissible answer.  Only the final recording pass is strict.
  double side_temperature(const Segment& seg, bool left_side, double s, PathRecorder* rec,
                          bool clamped) const {
    const int sink = left_side ? seg.left_sink : seg.right_sink;
    const double q_side = side_flow(seg, left_side, s);
    const double power = sink_power(sink, q_side, /*own_is_right=*/left_side);
    const double plate = plate_temperature(sink, power);
    const SinkPoint& point = sinks_[static_cast<std::size_t>(sink)];
    const double flange = jump_across(point.coupling, q_side, plate, st_, clamped);
    const PathSpec path = make_path(seg, left_side, s, q_side, clamped);
    return integrate_path(path, flange, st_, rec);
  }

  double locate_divide(const Segment& seg) const {
    auto mismatch = [&](double s) {
      return side_temperature(seg, /*left_side=*/true, s, nullptr, /*clamped=*/true) -
             side_temperature(seg, /*left_side=*/false, s, nullptr, /*clamped=*/true);
    };
    double lo = seg.lo;
    double hi = seg.hi;
    if (mismatch(lo) >= 0.0) return lo;  // the left sink takes none of the load
    if (mismatch(hi) <= 0.0) return hi;  // ... or all of it
    for (int i = 0; i < 200 && hi - lo > st_.divide_tol_m; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mismatch(mid) < 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }

  // Records one side and returns its samples ordered by increasing position.
  std::vector<ProfileSample> record_side(const Segment& seg, bool left_side, double s) const {
    std::vector<ProfileSample> samples;
    PathRecorder rec;
    rec.out = &samples;
    rec.max_dx = st_.record_max_step_m;
    rec.q_sign = left_side ? -1.0 : 1.0;  // exported flow is along +x
    side_temperature(seg, left_side, s, &rec, clamp_high_);
    if (!left_side) std::reverse(samples.begin(), samples.end());
    // The sample at the sink flange bounds the plate.
    if (!samples.empty()) {
      if (left_side) {
        samples.front().kind = SampleKind::jump_plus;
      } else {
        samples.back().kind = SampleKind::jump_minus;
      }
    }
    return samples;
  }

  std::vector<ProfileSample> record_segment(const Segment& seg) const {
    if (seg.left_sink < 0) {
      return record_side(seg, /*left_side=*/false, seg.lo);  // leading closed end
    }
    if (seg.right_sink < 0) {
      return record_side(seg, /*left_side=*/true, seg.hi);  // trailing closed end
    }
    std::vector<ProfileSample> left = record_side(seg, /*left_side=*/true, seg.divide);
    std::vector<ProfileSample> right = record_side(seg, /*left_side=*/false, seg.divide);
    std::vector<ProfileSample> merged;
    merged.reserve(left.size() + right.size());
    merged.insert(merged.end(), left.begin(), std::prev(left.end()));
    merged.push_back({seg.divide, 0.5 * (left.back().temperature_k + right.front().temperature_k),
                      0.0, SampleKind::interior});
    merged.insert(merged.end(), std::next(right.begin()), right.end());
    return merged;
  }

  StageProfile assemble(int sweeps) const {
    StageProfile profile;
    profile.stage_index = stage_index_;
    profile.relaxation_sweeps = sweeps;
    auto append = [&](std::vector<ProfileSample>&& chunk) {
      for (ProfileSample& sample : chunk) profile.samples.push_back(sample);
    };
    if (leading_) append(record_segment(*leading_));
    for (std::size_t k = 0; k < sinks_.size(); ++k) {
      const SinkPoint& point = sinks_[k];
      const double power = state_[k].from_left + state_[k].from_right + point.intrinsic_load_w +
                           direct_post_w_[k];
      const double plate = plate_temperature(static_cast<int>(k), power);
      profile.samples.push_back({point.position_m, plate, power, SampleKind::sink});
      profile.sinks.push_back(
          {point.position_m, point.source, point.module_index, power, plate});
      if (k < segments_.size()) append(record_segment(segments_[k]));
    }
    if (trailing_) append(record_segment(*trailing_));
    for (const Segment& seg : segments_) profile.divide_positions_m.push_back(seg.divide);
    return profile;
  }

  const LinkAssembly& assembly_;
  const StageSpec& spec_;
  int stage_index_;
  SolverSettings st_;
  bool clamp_high_ = false;
  double x_lo_;
  double x_hi_;
  double pos_tol_ = 1e-9;
  LoadTable table_;
  std::vector<SinkPoint> sinks_;
  std::vector<InterfacePoint> interfaces_;
  std::vector<PostDelta> interior_posts_;
  std::vector<double> direct_post_w_;
  std::vector<Segment> segments_;
  std::optional<Segment> leading_;
  std::optional<Segment> trailing_;
  std::vector<SinkState> state_;
};

StageProfile solve_stage_with_field(const LinkAssembly& assembly, int stage_index,
                                    const LineLoadField& field, const SolverSettings& st,
                                    bool clamp_high = false) {
  StageSolver solver(assembly, stage_index, field, st, clamp_high);
  return solver.run();
}

}  // namespace

void apply_settings(SolverSettings& settings, const std::map<std::string, double>& overrides) {
  static const char* const kKnown =
      "ode_rel_tol, ode_abs_tol_k, jump_rel_tol, divide_tol_m, max_relaxation_sweeps, "
      "picard_relaxation, picard_tol_k, max_picard_iterations, picard_initial_guess_k, "
      "record_max_step_m";
  auto as_count = [](const std::string& name, double value) {
    const double rounded = std::nearbyint(value);
    if (std::abs(value - rounded) > 1e-9 || rounded < 1.0) {
      throw validation_error("solver setting '" + name + "' must be a positive integer");
    }
    return static_cast<int>(rounded);
  };
  for (const auto& [name, value] : overrides) {
    if (!std::isfinite(value)) {
      throw validation_error("solver setting '" + name + "' is not finite");
    }
    if (name == "ode_rel_tol") {
      settings.ode_rel_tol = value;
    } else if (name == "ode_abs_tol_k") {
      settings.ode_abs_tol_k = value;
    } else if (name == "jump_rel_tol") {
      settings.jump_rel_tol = value;
    } else if (name == "divide_tol_m") {
      settings.divide_tol_m = value;
    } else if (name == "max_relaxation_sweeps") {
      settings.max_relaxation_sweeps = as_count(name, value);
    } else if (name == "picard_relaxation") {
      settings.picard_relaxation = value;
    } else if (name == "picard_tol_k") {
      settings.picard_tol_k = value;
    } else if (name == "max_picard_iterations") {
      settings.max_picard_iterations = as_count(name, value);
    } else if (name == "picard_initial_guess_k") {
      settings.picard_initial_guess_k = value;
    } else if (name == "record_max_step_m") {
      settings.record_max_step_m = value;
    } else {
      throw validation_error("unknown solver setting '" + name + "'; known settings: " + kKnown);
    }
  }
  auto positive = [](const char* name, double value) {
    if (!(value > 0.0)) {
      throw validation_error(std::string("solver setting '") + name + "' must be positive");
    }
  };
  positive("ode_rel_tol", settings.ode_rel_tol);
  positive("ode_abs_tol_k", settings.ode_abs_tol_k);
  positive("jump_rel_tol", settings.jump_rel_tol);
  positive("divide_tol_m", settings.divide_tol_m);
  positive("picard_tol_k", settings.picard_tol_k);
  positive("record_max_step_m", settings.record_max_step_m);
  if (!(settings.picard_relaxation > 0.0) || settings.picard_relaxation > 1.0) {
    throw validation_error("solver setting 'picard_relaxation' must lie in (0, 1]");
  }
  if (settings.max_relaxation_sweeps < 2) {
    throw validation_error("solver setting 'max_relaxation_sweeps' must be at least 2");
  }
  if (settings.picard_initial_guess_k < kTemperatureDomainMinK ||
      settings.picard_initial_guess_k > kTemperatureDomainMaxK) {
    throw validation_error("solver setting 'picard_initial_guess_k' is outside the domain");
  }
}

const char* to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::interior: return "interior";
    case SampleKind::jump_minus: return "jump_minus";
    case SampleKind::jump_plus: return "jump_plus";
    case SampleKind::sink: return "sink";
  }
  return "unknown";
}

double StageProfile::max_temperature_k() const {
  if (samples.empty()) throw std::logic_error("stage profile has no samples");
  double best = samples.front().temperature_k;
  for (const ProfileSample& sample : samples) best = std::max(best, sample.temperature_k);
  return best;
}

double StageProfile::min_temperature_k() const {
  if (samples.empty()) throw std::logic_error("stage profile has no samples");
  double best = samples.front().temperature_k;
  for (const ProfileSample& sample : samples) best = std::min(best, sample.temperature_k);
  return best;
}

double StageProfile::temperature_at(double position_m) const {
  if (samples.empty()) throw std::logic_error("stage profile has no samples");
  if (position_m <= samples.front().position_m) return samples.front().temperature_k;
  if (position_m >= samples.back().position_m) return samples.back().temperature_k;
  const auto next = std::upper_bound(
      samples.begin(), samples.end(), position_m,
      [](double x, const ProfileSample& sample) { return x < sample.position_m; });
  const auto prev = std::prev(next);  // last sample with position <= x
  if (next == samples.end()) return prev->temperature_k;
  const double dx = next->position_m - prev->position_m;
  if (dx <= 0.0) return next->temperature_k;
  const double u = (position_m - prev->position_m) / dx;
  return prev->temperature_k + u * (next->temperature_k - prev->temperature_k);
}

const StageProfile& AssemblySolution::stage(int stage_index) const {
  if (stage_index < 1 || stage_index > kNumStages) {
    throw std::invalid_argument("stage index must be between 1 and 4");
  }
  return stages[static_cast<std::size_t>(stage_index - 1)];
}

double contact_jump(const ResistanceCurve& resistance, double heat_flow_w, double t_minus_k,
                    const SolverSettings& settings) {
  if (!(heat_flow_w >= 0.0)) {
    throw std::invalid_argument("contact jump requires a non-negative heat flow");
  }
  if (t_minus_k < kTemperatureDomainMinK || t_minus_k > kTemperatureDomainMaxK) {
    throw std::out_of_range("contact jump cold side is outside the temperature domain");
  }
  return jump_across(resistance, heat_flow_w, t_minus_k, settings);
}

std::vector<SegmentSample> integrate_segment(double cross_section_m2,
                                             const ConductivityModel& material,
                                             const LineLoadField& loads, double x_a, double x_b,
                                             double t_start_k, double q_start_w, int direction,
                                             const SolverSettings& settings) {
  if (!(cross_section_m2 > 0.0)) {
    throw std::invalid_argument("cross section must be positive");
  }
  if (!(x_b > x_a)) {
    throw std::invalid_argument("segment bounds must satisfy x_a < x_b");
  }
  if (direction != +1 && direction != -1) {
    throw std::invalid_argument("direction must be +1 or -1");
  }
  LoadTable table(loads, x_a, x_b);
  PathSpec path;
  path.cross_section_m2 = cross_section_m2;
  path.material = &material;
  path.stage_index = loads.stage_index;
  path.length_m = x_b - x_a;
  path.q_start_w = q_start_w;
  if (direction > 0) {
    path.origin_x = x_a;
    path.x_direction = +1;
    path.distributed_from_start = [&table, x_a](double tau) {
      return table.distributed(x_a, x_a + tau);
    };
  } else {
    path.origin_x = x_b;
    path.x_direction = -1;
    path.distributed_from_start = [&table, x_b](double tau) {
      return table.distributed(x_b - tau, x_b);
    };
  }
  for (const PostDelta& post : loads.post_deltas) {
    if (post.position_m < x_a || post.position_m > x_b) continue;
    const double tau = direction > 0 ? post.position_m - x_a : x_b - post.position_m;
    if (tau <= 0.0) continue;  // a post at the starting end is upstream of the path
    PathEvent ev;
    ev.tau = std::min(tau, path.length_m);
    ev.is_post = true;
    ev.post_w = post.power_w;
    path.events.push_back(ev);
  }
  sort_events(path.events);

  std::vector<ProfileSample> recorded;
  PathRecorder rec;
  rec.out = &recorded;
  rec.max_dx = settings.record_max_step_m;
  rec.q_sign = 1.0;
  integrate_path(path, t_start_k, settings, &rec);
  if (direction < 0) std::reverse(recorded.begin(), recorded.end());
  std::vector<SegmentSample> out;
  out.reserve(recorded.size());
  for (const ProfileSample& sample : recorded) {
    out.push_back({sample.position_m, sample.temperature_k, sample.heat_flow_w});
  }
  return out;
}

StageProfile solve_stage(const LinkAssembly& assembly, int stage_index,
                         const std::function<double(double)>& t_hot,
                         const SolverSettings& settings) {
  validate_assembly(assembly);
  if (!t_hot) throw std::invalid_argument("hot-side profile must be callable");
  const StageSpec& spec = assembly.stage(stage_index);
  if (!spec.radiative_self_coupling) {
    const LineLoadField field = build_line_load(assembly, stage_index, t_hot);
    return solve_stage_with_field(assembly, stage_index, field, settings);
  }

  // The stage's own temperature feeds back into the net radiative density:
  // iterate a relaxed fixed point on a sampled copy of the profile.
  const double x_lo = assembly.modules.front().position_m;
  const double length = assembly.total_length_m();
  const std::size_t nodes = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(length / settings.record_max_step_m)) + 1, 201, 4001);
  std::vector<double> xs(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    xs[i] = x_lo + length * static_cast<double>(i) / static_cast<double>(nodes - 1);
  }
  double hot_min = t_hot(xs.front());
  for (double x : xs) hot_min = std::min(hot_min, t_hot(x));
  const double start = std::max(kTemperatureDomainMinK,
                                std::min(settings.picard_initial_guess_k, 0.99 * hot_min));
  std::vector<double> state(nodes, start);

  for (int iteration = 1; iteration <= settings.max_picard_iterations; ++iteration) {
    auto self_fn = [&xs, &state](double x) {
      if (x <= xs.front()) return state.front();
      if (x >= xs.back()) return state.back();
      const auto it = std::upper_bound(xs.begin(), xs.end(), x);
      const std::size_t i = static_cast<std::size_t>(it - xs.begin());
      const double u = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
      return state[i - 1] + u * (state[i] - state[i - 1]);
    };
    const LineLoadField field = build_line_load(assembly, stage_index, t_hot, self_fn);
    // Transient iterates may overshoot the material domain before the
    // radiative feedback pulls them down; saturate the conductivity there
    // and hold the converged answer to the strict domain below.
    StageProfile profile = solve_stage_with_field(assembly, stage_index, field, settings,
                                                  /*clamp_high=*/true);
    double residual = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) {
      const double fresh = profile.temperature_at(xs[i]);
      residual = std::max(residual, std::abs(fresh - state[i]));
      state[i] += settings.picard_relaxation * (fresh - state[i]);
    }
    if (residual < settings.picard_tol_k) {
      const double domain_max = spec.shield_material.domain_max_k();
      if (profile.max_temperature_k() > domain_max) {
        std::ostringstream msg;
        msg << "stage " << stage_index << ": converged profile reaches "
            << profile.max_temperature_k() << " K, above the material domain limit of "
            << domain_max << " K";
        throw infeasible_error(msg.str());
      }
      profile.picard_iterations = iteration;
      profile.picard_residual_k = residual;
      return profile;
    }
  }
  std::ostringstream msg;
  msg << "stage " << stage_index << ": self-coupled radiation loop did not converge within "
      << settings.max_picard_iterations << " iterations";
  throw convergence_error(msg.str());
}

AssemblySolution solve_assembly(const LinkAssembly& assembly, const SolverSettings& settings) {
  validate_assembly(assembly);
  AssemblySolution solution;
  const double can_temperature = assembly.vacuum_can.temperature_k;
  std::function<double(double)> hot = [can_temperature](double) { return can_temperature; };
  for (int stage_index = kNumStages; stage_index >= 1; --stage_index) {
    StageProfile profile = solve_stage(assembly, stage_index, hot, settings);
    solution.stages[static_cast<std::size_t>(stage_index - 1)] = std::move(profile);
    const StageProfile* solved = &solution.stages[static_cast<std::size_t>(stage_index - 1)];
    hot = [solved](double x) { return solved->temperature_at(x); };
    solution.convergence.relaxation_sweeps[static_cast<std::size_t>(stage_index - 1)] =
        solved->relaxation_sweeps;
    if (solved->picard_iterations > solution.convergence.picard_iterations) {
      solution.convergence.picard_iterations = solved->picard_iterations;
      solution.convergence.picard_residual_k = solved->picard_residual_k;
    }
  }
  return solution;
}

}  // namespace cryolink
