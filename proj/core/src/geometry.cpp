#include "cryolink/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cryolink/errors.hpp"

namespace cryolink {

namespace {

using ojson = nlohmann::ordered_json;

double geom_tol(double scale) { return 1e-9 * std::max(1.0, scale); }

[[noreturn]] void fail(const std::string& context, const std::string& message) {
  throw validation_error(context.empty() ? message : context + ": " + message);
}

std::string module_context(std::size_t index, ModuleKind kind) {
  std::ostringstream os;
  os << "modules[" << index << "] (" << to_string(kind) << ")";
  return os.str();
}

}  // namespace

const char* to_string(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::node: return "node";
    case ModuleKind::adapter: return "adapter";
    case ModuleKind::link: return "link";
    case ModuleKind::braid: return "braid";
    case ModuleKind::cooling_unit: return "cooling_unit";
  }
  return "?";
}

double ModuleSpec::length_m() const {
  if (const auto* a = std::get_if<AdapterModule>(&payload)) return a->length_m;
  if (const auto* l = std::get_if<LinkModule>(&payload)) return l->length_m;
  return 0.0;
}

const StageSpec& LinkAssembly::stage(int stage_index) const {
  if (stage_index < 1 || stage_index > kNumStages) {
    throw std::out_of_range("LinkAssembly::stage: stage index must be in [1, 4]");
  }
  return stages[static_cast<std::size_t>(stage_index - 1)];
}

StageSpec& LinkAssembly::stage(int stage_index) {
  return const_cast<StageSpec&>(std::as_const(*this).stage(stage_index));
}

double LinkAssembly::total_length_m() const {
  double first = 0.0, last = 0.0;
  bool seen = false;
  for (const auto& m : modules) {
    if (m.kind != ModuleKind::node) continue;
    if (!seen) {
      first = m.position_m;
      seen = true;
    }
    last = m.position_m;
  }
  if (!seen) throw validation_error("assembly has no node modules");
  return last - first;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

void validate_stage(const StageSpec& s, int expected_index) {
  std::ostringstream ctx;
  ctx << "stages[" << expected_index - 1 << "]";
  if (s.stage_index != expected_index) {
    fail(ctx.str(), "stage_index must be " + std::to_string(expected_index));
  }
  if (!(s.reference_temperature_k > 0.0)) fail(ctx.str(), "reference_temperature_K must be positive");
  if (!(s.cross_section_m2 > 0.0)) fail(ctx.str(), "cross_section_m2 must be positive");
  if (!(s.circumference_m > 0.0)) fail(ctx.str(), "circumference_m must be positive");
  if (!(s.emissivity > 0.0 && s.emissivity <= 1.0)) fail(ctx.str(), "emissivity must be in (0, 1]");
  if (s.mli_attenuation_override &&
      !(*s.mli_attenuation_override >= 0.0 && *s.mli_attenuation_override <= 1.0)) {
    fail(ctx.str(), "mli_attenuation_override must be in [0, 1]");
  }
  if (!(s.extra_flux_w_per_m2 >= 0.0)) fail(ctx.str(), "extra_flux_W_per_m2 must be non-negative");
  if (!(s.post_load.p0_w >= 0.0)) fail(ctx.str(), "post_load.p0_W must be non-negative");
  if (!(s.post_load.t0_hot_k > 0.0)) fail(ctx.str(), "post_load.t0_hot_K must be positive");
}

}  // namespace

void validate_assembly(const LinkAssembly& assembly) {
  for (int n = 1; n <= kNumStages; ++n) {
    validate_stage(assembly.stage(n), n);
  }
  for (int n = 1; n < kNumStages; ++n) {
    if (!(assembly.stage(n).circumference_m < assembly.stage(n + 1).circumference_m)) {
      fail("stages", "circumferences must increase with the stage index");
    }
  }
  const auto& vc = assembly.vacuum_can;
  if (!(vc.temperature_k > 0.0 && vc.temperature_k <= kTemperatureDomainMaxK)) {
    fail("vacuum_can", "temperature_K must be in (0, 300]");
  }
  if (!(vc.emissivity > 0.0 && vc.emissivity <= 1.0)) fail("vacuum_can", "emissivity must be in (0, 1]");
  if (!(vc.circumference_m >= assembly.stage(kNumStages).circumference_m)) {
    fail("vacuum_can", "circumference_m must be at least the outermost stage circumference");
  }

  const auto& mods = assembly.modules;
  if (mods.empty()) fail("modules", "assembly has no modules");
  if (mods.front().kind != ModuleKind::node) fail("modules", "assembly must begin with a node");
  if (mods.back().kind != ModuleKind::node) fail("modules", "assembly must end with a node");

  const double start = mods.front().position_m;
  if (std::abs(start) > geom_tol(1.0)) fail("modules[0]", "first node must sit at position 0");
  const double end = mods.back().position_m;
  if (!(end > start)) fail("modules", "assembly span must have positive length");
  const double tol = geom_tol(end - start);

  // Per-module parameter checks and position monotonicity.
  double prev_pos = start;
  for (std::size_t i = 0; i < mods.size(); ++i) {
    const auto& m = mods[i];
    const std::string ctx = module_context(i, m.kind);
    if (m.position_m < prev_pos - tol) fail(ctx, "modules must be ordered by position");
    prev_pos = std::max(prev_pos, m.position_m);
    if (m.position_m < start - tol || m.end_m() > end + tol) {
      fail(ctx, "module lies outside the assembly span");
    }
    if (const auto* link = std::get_if<LinkModule>(&m.payload)) {
      if (!(link->length_m > 0.0)) fail(ctx, "length_m must be positive");
      if (link->posts_per_set < 0) fail(ctx, "posts_per_set must be non-negative");
      for (double off : link->post_offsets_m) {
        if (!(off >= -tol && off <= link->length_m + tol)) {
          fail(ctx, "post offset outside the module extent");
        }
      }
    } else if (const auto* ad = std::get_if<AdapterModule>(&m.payload)) {
      if (!(ad->length_m > 0.0)) fail(ctx, "length_m must be positive");
    } else if (const auto* node = std::get_if<NodeModule>(&m.payload)) {
      for (double q : node->intrinsic_load_w) {
        if (!(q >= 0.0)) fail(ctx, "intrinsic_load_W must be non-negative");
      }
    } else if (const auto* cu = std::get_if<CoolingUnitModule>(&m.payload)) {
      bool any = false;
      for (const auto& c : cu->cooling) any = any || c.has_value();
      if (!any) fail(ctx, "cooling unit must cool at least one stage");
      for (double q : cu->intrinsic_load_w) {
        if (!(q >= 0.0)) fail(ctx, "intrinsic_load_W must be non-negative");
      }
    }
  }

  // Extent modules must tile [start, end] without gaps or overlaps.
  double cursor = start;
  bool any_extent = false;
  for (std::size_t i = 0; i < mods.size(); ++i) {
    const auto& m = mods[i];
    if (m.kind != ModuleKind::adapter && m.kind != ModuleKind::link) continue;
    any_extent = true;
    if (std::abs(m.position_m - cursor) > tol) {
      fail(module_context(i, m.kind), "extent modules must tile the span without gaps or overlaps");
    }
    cursor = m.position_m + m.length_m();
  }
  if (!any_extent) fail("modules", "assembly needs at least one adapter or link module");
  if (std::abs(cursor - end) > tol) {
    fail("modules", "extent modules must reach the final node position");
  }

  // Point modules must sit at extent boundaries.
  std::vector<double> boundaries{start};
  for (const auto& m : mods) {
    if (m.kind == ModuleKind::adapter || m.kind == ModuleKind::link) {
      boundaries.push_back(m.end_m());
    }
  }
  for (std::size_t i = 0; i < mods.size(); ++i) {
    const auto& m = mods[i];
    if (m.kind == ModuleKind::adapter || m.kind == ModuleKind::link) continue;
    bool at_boundary = false;
    for (double b : boundaries) {
      if (std::abs(m.position_m - b) <= tol) {
        at_boundary = true;
        break;
      }
    }
    if (!at_boundary) {
      fail(module_context(i, m.kind), "point module must sit at a module junction");
    }
  }
}

// ---------------------------------------------------------------------------
// Standard hardware catalog
// ---------------------------------------------------------------------------

StageSpec default_stage(int stage_index) {
  StageSpec s;
  s.stage_index = stage_index;
  s.emissivity = 0.025;  // polished copper shield surfaces
  switch (stage_index) {
    case 1:
      s.reference_temperature_k = 0.01;
      s.cross_section_m2 = 200e-6;
      s.circumference_m = std::numbers::pi * 0.055;
      s.shield_material = ConductivityModel::nist_rrr_copper(150.0);
      s.mli_attenuation_override = 0.0;  // radiative load negligible below ~1 K
      s.discrete_posts = true;
      s.post_load = default_post_load(1);
      break;
    case 2:
      s.reference_temperature_k = 1.0;
      s.cross_section_m2 = 370e-6;
      s.circumference_m = std::numbers::pi * 0.110;
      s.shield_material = ConductivityModel::nist_rrr_copper(200.0);
      s.mli_attenuation_override = 0.0;
      s.discrete_posts = true;
      s.post_load = default_post_load(2);
      break;
    case 3:
      s.reference_temperature_k = 4.0;
      s.cross_section_m2 = 1000e-6;
      s.circumference_m = std::numbers::pi * 0.155;
      s.shield_material = ConductivityModel::nist_rrr_copper(230.0);
      s.mli_attenuation_override = std::nullopt;  // derived from emissivities
      s.discrete_posts = true;
      s.post_load = default_post_load(3);
      break;
    case 4:
      s.reference_temperature_k = 50.0;
      s.cross_section_m2 = 2000e-6;
      s.circumference_m = std::numbers::pi * 0.205;
      s.shield_material = ConductivityModel::nist_rrr_copper(210.0);
      // Effective attenuation of the MLI-wrapped gap, fitted to measured
      // temperature profiles.  It is a total-transfer coefficient: support
      // post conduction is folded in, so discrete post deltas stay off.
      s.mli_attenuation_override = 0.004;
      s.discrete_posts = false;
      s.radiative_self_coupling = true;
      s.post_load = default_post_load(4);
      break;
    default:
      throw std::out_of_range("default_stage: stage index must be in [1, 4]");
  }
  return s;
}

VacuumCan default_vacuum_can() {
  VacuumCan vc;
  vc.temperature_k = 293.0;
  vc.emissivity = 0.05;  // aluminium vessel
  vc.circumference_m = std::numbers::pi * 0.265;
  return vc;
}

CoolingCurve default_node_cooling(int stage_index) {
  switch (stage_index) {
    case 1: return CoolingCurve{0.01, 4e-6, 0.0, 2.0};
    case 2: return CoolingCurve{1.0, 80e-3, 0.5, 2.0};
    case 3: return CoolingCurve{4.0, 2.5, 0.75, 1.2};
    case 4: return CoolingCurve{50.0, 36.0, 0.75, 0.7};
    default: throw std::out_of_range("default_node_cooling: stage index must be in [1, 4]");
  }
}

ResistanceCurve default_node_internal_resistance(int stage_index) {
  switch (stage_index) {
    case 1: return ResistanceCurve::power_law(5e3, 0.01, -2.0);
    case 2: return ResistanceCurve::power_law(60.0, 1.0, -2.0);
    case 3: return ResistanceCurve::power_law(2.4, 4.0, -2.0);
    case 4:
      return ResistanceCurve::conductivity_shaped(0.5, 50.0, ConductivityModel::nist_rrr_copper(75.0));
    default: throw std::out_of_range("default_node_internal_resistance: stage index must be in [1, 4]");
  }
}

ResistanceCurve default_braid_resistance(int stage_index) {
  switch (stage_index) {
    case 1: return ResistanceCurve::power_law(40e3, 0.01, -2.0);
    case 2: return ResistanceCurve::power_law(10.0, 1.0, -1.7);
    case 3: return ResistanceCurve::power_law(0.5, 4.0, -2.6);
    case 4:
      return ResistanceCurve::conductivity_shaped(0.15, 50.0, ConductivityModel::nist_rrr_copper(320.0));
    default: throw std::out_of_range("default_braid_resistance: stage index must be in [1, 4]");
  }
}

ResistanceCurve default_cooling_unit_resistance(int stage_index) {
  switch (stage_index) {
    case 1: return ResistanceCurve::power_law(1e3, 0.01, -1.0);
    case 2: return ResistanceCurve::power_law(2.0, 1.0, -1.0);
    case 3: return ResistanceCurve::power_law(0.5, 4.0, -1.0);
    case 4:
      return ResistanceCurve::conductivity_shaped(0.2, 50.0, ConductivityModel::nist_rrr_copper(75.0));
    default: throw std::out_of_range("default_cooling_unit_resistance: stage index must be in [1, 4]");
  }
}

std::optional<CoolingCurve> default_cooling_unit_cooling(int stage_index) {
  // The intermediate refrigerator cools the two outer stages only; the
  // still and base stages pass through.
  if (stage_index == 3 || stage_index == 4) return default_node_cooling(stage_index);
  return std::nullopt;
}

PostLoadCurve default_post_load(int stage_index) {
  switch (stage_index) {
    case 1: return PostLoadCurve{10e-9, 1.0, 3.3};
    case 2: return PostLoadCurve{34e-6, 4.0, 2.2};
    case 3: return PostLoadCurve{10e-3, 50.0, 1.7};
    case 4: return PostLoadCurve{0.26, 293.0, 0.0};  // constant, vessel-side posts
    default: throw std::out_of_range("default_post_load: stage index must be in [1, 4]");
  }
}

NodeModule default_node(const StandardOptions& options) {
  NodeModule n;
  for (int s = 1; s <= kNumStages; ++s) {
    n.cooling[static_cast<std::size_t>(s - 1)] = default_node_cooling(s);
    n.internal_resistance[static_cast<std::size_t>(s - 1)] = default_node_internal_resistance(s);
    n.intrinsic_load_w[static_cast<std::size_t>(s - 1)] = 0.0;
  }
  n.intrinsic_load_w[0] = options.base_intrinsic_load_w;
  return n;
}

BraidModule default_braid() {
  BraidModule b;
  for (int s = 1; s <= kNumStages; ++s) {
    b.resistance[static_cast<std::size_t>(s - 1)] = default_braid_resistance(s);
  }
  return b;
}

CoolingUnitModule default_cooling_unit() {
  CoolingUnitModule cu;
  for (int s = 1; s <= kNumStages; ++s) {
    cu.cooling[static_cast<std::size_t>(s - 1)] = default_cooling_unit_cooling(s);
    cu.resistance[static_cast<std::size_t>(s - 1)] = default_cooling_unit_resistance(s);
    cu.intrinsic_load_w[static_cast<std::size_t>(s - 1)] = 0.0;
  }
  return cu;
}

namespace {

// One element of a span layout before positions are assigned.
struct SpanElement {
  ModuleKind kind;          // adapter or link
  double length_m;
  int stack;                // 0 = left adapter stack, 1 = field, 2 = right stack
};

}  // namespace

LinkAssembly standard_assembly(double length_m, std::optional<double> cu_spacing_m,
                               const StandardOptions& options) {
  const double ad = options.adapter_length_m;
  const double pitch = options.link_module_length_m;
  if (!(ad > 0.0) || !(pitch > 0.0)) {
    throw validation_error("standard_assembly: adapter and link module lengths must be positive");
  }
  if (options.posts_per_set < 0) {
    throw validation_error("standard_assembly: posts_per_set must be non-negative");
  }
  const double min_length = 2.0 * ad;
  if (!(length_m >= min_length - geom_tol(min_length))) {
    std::ostringstream os;
    os << "standard_assembly: length " << length_m << " m below the minimum buildable span of "
       << min_length << " m";
    throw validation_error(os.str());
  }
  if (cu_spacing_m && !(*cu_spacing_m > 0.0)) {
    throw validation_error("standard_assembly: cu_spacing_m must be positive");
  }

  const double tol = geom_tol(length_m);

  // Interior cooling-unit anchor positions.
  std::vector<double> cu_positions;
  if (cu_spacing_m) {
    for (int k = 1; k * *cu_spacing_m < length_m - tol; ++k) {
      cu_positions.push_back(k * *cu_spacing_m);
    }
  }
  if (options.central_cooling_unit) {
    const double mid = 0.5 * length_m;
    bool present = false;
    for (double p : cu_positions) present = present || std::abs(p - mid) <= tol;
    if (!present) cu_positions.push_back(mid);
  }
  std::sort(cu_positions.begin(), cu_positions.end());

  // Two adapters per node flange on full-size builds; the short variant
  // (anything without room for a full stack and one link module) uses one.
  const int stack_count = (length_m >= 2.0 * (2.0 * ad) + pitch - tol) ? 2 : 1;

  LinkAssembly assembly;
  for (int n = 1; n <= kNumStages; ++n) {
    assembly.stage(n) = default_stage(n);
  }
  assembly.vacuum_can = default_vacuum_can();
  assembly.vacuum_can.temperature_k = options.vacuum_can_temperature_k;

  auto& mods = assembly.modules;
  mods.push_back({ModuleKind::node, 0.0, default_node(options)});

  std::vector<double> anchors{0.0};
  anchors.insert(anchors.end(), cu_positions.begin(), cu_positions.end());
  anchors.push_back(length_m);

  double cursor = 0.0;
  for (std::size_t span = 0; span + 1 < anchors.size(); ++span) {
    const double lo = anchors[span];
    const double hi = anchors[span + 1];
    const bool node_lo = span == 0;
    const bool node_hi = span + 2 == anchors.size();
    const double span_len = hi - lo;

    // Adapter stacks at node flanges, shrunk when the span is too short.
    auto stack_fits = [&](int n_left, int n_right) {
      return span_len - (n_left + n_right) * ad >= -tol;
    };
    int n_left = node_lo ? stack_count : 0;
    int n_right = node_hi ? stack_count : 0;
    while (!stack_fits(n_left, n_right) && (n_left > 1 || n_right > 1)) {
      if (n_left >= n_right && n_left > 1) {
        --n_left;
      } else {
        --n_right;
      }
    }

    std::vector<SpanElement> elements;
    double remaining = span_len;
    if (!stack_fits(n_left, n_right)) {
      // Degenerate span: a single shortened adapter per present node side.
      if (n_left > 0 && n_right > 0) {
        elements.push_back({ModuleKind::adapter, 0.5 * span_len, 0});
        elements.push_back({ModuleKind::adapter, 0.5 * span_len, 2});
      } else {
        elements.push_back({ModuleKind::adapter, span_len, n_left > 0 ? 0 : 2});
      }
      remaining = 0.0;
    } else {
      for (int i = 0; i < n_left; ++i) elements.push_back({ModuleKind::adapter, ad, 0});
      remaining -= (n_left + n_right) * ad;
      const int n_full = static_cast<int>(std::floor(remaining / pitch + 1e-9));
      double partial = remaining - n_full * pitch;
      if (partial < tol) partial = 0.0;
      // A partial span is filled with one shortened link module.  Keep it
      // at the centre of the link-module run so symmetric requests build
      // mirror-symmetric assemblies where possible.
      const int before = n_full / 2;
      for (int i = 0; i < before; ++i) elements.push_back({ModuleKind::link, pitch, 1});
      if (partial > 0.0) elements.push_back({ModuleKind::link, partial, 1});
      for (int i = before; i < n_full; ++i) elements.push_back({ModuleKind::link, pitch, 1});
      for (int i = 0; i < n_right; ++i) elements.push_back({ModuleKind::adapter, ad, 2});
    }

    // Emit: anchor-side braid (cooling units join flexibly), the elements
    // with braids at field junctions, then the cooling unit at the far
    // anchor.  Node-adapter and intra-stack adapter-adapter joints are
    // rigid and carry no braid.
    if (!node_lo) {
      mods.push_back({ModuleKind::braid, cursor, default_braid()});
    }
    for (std::size_t i = 0; i < elements.size(); ++i) {
      if (i > 0) {
        const auto& prev = elements[i - 1];
        const auto& cur = elements[i];
        const bool rigid = prev.kind == ModuleKind::adapter && cur.kind == ModuleKind::adapter &&
                           prev.stack == cur.stack;
        if (!rigid) mods.push_back({ModuleKind::braid, cursor, default_braid()});
      }
      ModuleSpec m;
      m.kind = elements[i].kind;
      m.position_m = cursor;
      if (elements[i].kind == ModuleKind::adapter) {
        m.payload = AdapterModule{elements[i].length_m};
      } else {
        LinkModule link;
        link.length_m = elements[i].length_m;
        link.post_offsets_m = {0.25 * link.length_m, 0.75 * link.length_m};
        link.posts_per_set = options.posts_per_set;
        m.payload = link;
      }
      mods.push_back(std::move(m));
      cursor += elements[i].length_m;
    }
    if (!node_hi) {
      mods.push_back({ModuleKind::braid, cursor, default_braid()});
      mods.push_back({ModuleKind::cooling_unit, cursor, default_cooling_unit()});
    }
  }
  mods.push_back({ModuleKind::node, cursor, default_node(options)});

  validate_assembly(assembly);
  return assembly;
}

// ---------------------------------------------------------------------------
// Solver-facing enumeration
// ---------------------------------------------------------------------------

std::vector<InterfacePoint> interfaces(const LinkAssembly& assembly, int stage_index) {
  const std::size_t s = static_cast<std::size_t>(stage_index - 1);
  if (stage_index < 1 || stage_index > kNumStages) {
    throw std::out_of_range("interfaces: stage index must be in [1, 4]");
  }
  std::vector<InterfacePoint> out;
  for (std::size_t i = 0; i < assembly.modules.size(); ++i) {
    const auto& m = assembly.modules[i];
    if (const auto* braid = std::get_if<BraidModule>(&m.payload)) {
      out.push_back({m.position_m, ModuleKind::braid, i, braid->resistance[s]});
    } else if (const auto* cu = std::get_if<CoolingUnitModule>(&m.payload)) {
      if (!cu->cooling[s].has_value()) {
        out.push_back({m.position_m, ModuleKind::cooling_unit, i, cu->resistance[s]});
      }
    }
  }
  return out;
}

std::vector<SinkPoint> sink_points(const LinkAssembly& assembly, int stage_index) {
  const std::size_t s = static_cast<std::size_t>(stage_index - 1);
  if (stage_index < 1 || stage_index > kNumStages) {
    throw std::out_of_range("sink_points: stage index must be in [1, 4]");
  }
  std::vector<SinkPoint> out;
  for (std::size_t i = 0; i < assembly.modules.size(); ++i) {
    const auto& m = assembly.modules[i];
    if (const auto* node = std::get_if<NodeModule>(&m.payload)) {
      out.push_back({m.position_m, ModuleKind::node, i, node->cooling[s],
                     node->internal_resistance[s], node->intrinsic_load_w[s]});
    } else if (const auto* cu = std::get_if<CoolingUnitModule>(&m.payload)) {
      if (cu->cooling[s].has_value()) {
        out.push_back({m.position_m, ModuleKind::cooling_unit, i, *cu->cooling[s],
                       cu->resistance[s], cu->intrinsic_load_w[s]});
      }
    }
  }
  return out;
}

std::vector<PostSet> post_sets(const LinkAssembly& assembly) {
  std::vector<PostSet> out;
  for (const auto& m : assembly.modules) {
    const auto* link = std::get_if<LinkModule>(&m.payload);
    if (!link || link->posts_per_set <= 0) continue;
    for (double off : link->post_offsets_m) {
      out.push_back({m.position_m + off, link->posts_per_set});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const PostSet& a, const PostSet& b) { return a.position_m < b.position_m; });
  return out;
}

// ---------------------------------------------------------------------------
// JSON configuration
// ---------------------------------------------------------------------------

namespace {

// Accepted unit spellings per dimension; first entry is the canonical one
// used by the serializer.
const std::vector<std::pair<std::string, double>>& unit_family(const std::string& family) {
  static const std::map<std::string, std::vector<std::pair<std::string, double>>> kFamilies = {
      {"K", {{"K", 1.0}, {"mK", 1e-3}}},
      {"m", {{"m", 1.0}, {"cm", 1e-2}, {"mm", 1e-3}}},
      {"m2", {{"m2", 1.0}, {"cm2", 1e-4}, {"mm2", 1e-6}}},
      {"W", {{"W", 1.0}, {"mW", 1e-3}, {"uW", 1e-6}, {"nW", 1e-9}}},
      {"K_per_W", {{"K_per_W", 1.0}, {"K_per_mW", 1e3}}},
      {"W_per_m2", {{"W_per_m2", 1.0}, {"mW_per_m2", 1e-3}, {"uW_per_m2", 1e-6}}},
  };
  const auto it = kFamilies.find(family);
  if (it == kFamilies.end()) throw std::logic_error("unknown unit family " + family);
  return it->second;
}

// Reads `<base>_<unit>` with any accepted unit spelling, converting to the
// canonical unit.  Exactly one spelling must be present unless optional.
std::optional<double> read_quantity_impl(const ojson& obj, const std::string& base,
                                         const std::string& family, const std::string& ctx,
                                         bool required) {
  const auto& variants = unit_family(family);
  std::optional<double> result;
  int found = 0;
  for (const auto& [suffix, scale] : variants) {
    const std::string key = base + "_" + suffix;
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) continue;
    if (!it->is_number()) fail(ctx, "field " + key + " must be a number");
    ++found;
    result = it->get<double>() * scale;
  }
  if (found > 1) fail(ctx, "field " + base + " given in more than one unit");
  if (required && found == 0) {
    fail(ctx, "missing field " + base + "_" + variants.front().first);
  }
  return result;
}

double read_quantity(const ojson& obj, const std::string& base, const std::string& family,
                     const std::string& ctx) {
  return *read_quantity_impl(obj, base, family, ctx, true);
}

std::optional<double> read_quantity_opt(const ojson& obj, const std::string& base,
                                        const std::string& family, const std::string& ctx) {
  return read_quantity_impl(obj, base, family, ctx, false);
}

double read_number(const ojson& obj, const std::string& key, const std::string& ctx) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) fail(ctx, "missing numeric field " + key);
  return it->get<double>();
}

double read_number_or(const ojson& obj, const std::string& key, double fallback,
                      const std::string& ctx) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_number()) fail(ctx, "field " + key + " must be a number");
  return it->get<double>();
}

bool read_bool_or(const ojson& obj, const std::string& key, bool fallback, const std::string& ctx) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_boolean()) fail(ctx, "field " + key + " must be a boolean");
  return it->get<bool>();
}

const ojson& require_object(const ojson& obj, const std::string& key, const std::string& ctx) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_object()) fail(ctx, "missing object field " + key);
  return *it;
}

const ojson& require_array(const ojson& obj, const std::string& key, const std::string& ctx) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_array()) fail(ctx, "missing array field " + key);
  return *it;
}

std::string require_string(const ojson& obj, const std::string& key, const std::string& ctx) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) fail(ctx, "missing string field " + key);
  return it->get<std::string>();
}

ojson model_to_json(const ConductivityModel& m) {
  ojson j;
  switch (m.kind()) {
    case ConductivityModel::Kind::nist_rrr_copper:
      j["kind"] = "nist_rrr_copper";
      j["rrr"] = m.rrr();
      break;
    case ConductivityModel::Kind::power_law_piecewise: {
      j["kind"] = "power_law_piecewise";
      ojson segs = ojson::array();
      for (const auto& s : m.segments()) {
        ojson seg;
        seg["t_lo_K"] = s.t_lo_k;
        seg["t_hi_K"] = s.t_hi_k;
        seg["a"] = s.a;
        seg["b"] = s.b;
        seg["c"] = s.c;
        segs.push_back(std::move(seg));
      }
      j["segments"] = std::move(segs);
      break;
    }
    case ConductivityModel::Kind::tabulated: {
      j["kind"] = "tabulated";
      ojson pts = ojson::array();
      for (const auto& p : m.points()) {
        pts.push_back(ojson::array({p.temperature_k, p.conductivity_w_per_k_m}));
      }
      j["points_K_W_per_K_m"] = std::move(pts);
      break;
    }
  }
  return j;
}

ConductivityModel model_from_json(const ojson& j, const std::string& ctx) {
  if (!j.is_object()) fail(ctx, "conductivity model must be an object");
  const std::string kind = require_string(j, "kind", ctx);
  try {
    if (kind == "nist_rrr_copper") {
      return ConductivityModel::nist_rrr_copper(read_number(j, "rrr", ctx));
    }
    if (kind == "power_law_piecewise") {
      std::vector<PowerLawSegment> segs;
      for (const auto& seg : require_array(j, "segments", ctx)) {
        PowerLawSegment s;
        s.t_lo_k = read_quantity(seg, "t_lo", "K", ctx);
        s.t_hi_k = read_quantity(seg, "t_hi", "K", ctx);
        s.a = read_number_or(seg, "a", 0.0, ctx);
        s.b = read_number_or(seg, "b", 0.0, ctx);
        s.c = read_number_or(seg, "c", 1.0, ctx);
        segs.push_back(s);
      }
      return ConductivityModel::power_law_piecewise(std::move(segs));
    }
    if (kind == "tabulated") {
      std::vector<TabulatedPoint> pts;
      for (const auto& p : require_array(j, "points_K_W_per_K_m", ctx)) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
          fail(ctx, "tabulated points must be numeric [T, rho] pairs");
        }
        pts.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      return ConductivityModel::tabulated(std::move(pts));
    }
  } catch (const std::invalid_argument& e) {
    fail(ctx, e.what());
  }
  fail(ctx, "unknown conductivity model kind '" + kind + "'");
}

ojson cooling_to_json(const CoolingCurve& c) {
  ojson j;
  j["reference_temperature_K"] = c.reference_temperature_k;
  j["prefactor_W"] = c.prefactor_w;
  j["offset"] = c.offset;
  j["exponent"] = c.exponent;
  return j;
}

CoolingCurve cooling_from_json(const ojson& j, const std::string& ctx) {
  if (!j.is_object()) fail(ctx, "cooling curve must be an object");
  CoolingCurve c;
  c.reference_temperature_k = read_quantity(j, "reference_temperature", "K", ctx);
  c.prefactor_w = read_quantity(j, "prefactor", "W", ctx);
  c.offset = read_number_or(j, "offset", 0.0, ctx);
  c.exponent = read_number(j, "exponent", ctx);
  if (!(c.prefactor_w > 0.0) || !(c.exponent > 0.0) || !(c.reference_temperature_k > 0.0) ||
      !(c.offset >= 0.0)) {
    fail(ctx, "cooling curve requires positive T0, prefactor, exponent and offset >= 0");
  }
  return c;
}

ojson resistance_to_json(const ResistanceCurve& r) {
  ojson j;
  if (r.kind() == ResistanceCurve::Kind::power_law) {
    j["kind"] = "power_law";
    j["r0_K_per_W"] = r.r0_k_per_w();
    j["t0_K"] = r.t0_k();
    j["exponent"] = r.exponent();
  } else {
    j["kind"] = "conductivity_shaped";
    j["r0_K_per_W"] = r.r0_k_per_w();
    j["t_ref_K"] = r.t0_k();
    j["model"] = model_to_json(r.model());
  }
  return j;
}

ResistanceCurve resistance_from_json(const ojson& j, const std::string& ctx) {
  if (!j.is_object()) fail(ctx, "resistance curve must be an object");
  const std::string kind = require_string(j, "kind", ctx);
  try {
    if (kind == "power_law") {
      return ResistanceCurve::power_law(read_quantity(j, "r0", "K_per_W", ctx),
                                        read_quantity(j, "t0", "K", ctx),
                                        read_number(j, "exponent", ctx));
    }
    if (kind == "conductivity_shaped") {
      return ResistanceCurve::conductivity_shaped(read_quantity(j, "r0", "K_per_W", ctx),
                                                  read_quantity(j, "t_ref", "K", ctx),
                                                  model_from_json(j.at("model"), ctx));
    }
  } catch (const std::invalid_argument& e) {
    fail(ctx, e.what());
  } catch (const ojson::exception&) {
    fail(ctx, "conductivity_shaped resistance requires a model object");
  }
  fail(ctx, "unknown resistance curve kind '" + kind + "'");
}

ojson post_load_to_json(const PostLoadCurve& p) {
  ojson j;
  j["p0_W"] = p.p0_w;
  j["t0_hot_K"] = p.t0_hot_k;
  j["exponent"] = p.exponent;
  return j;
}

PostLoadCurve post_load_from_json(const ojson& j, const std::string& ctx) {
  if (!j.is_object()) fail(ctx, "post_load must be an object");
  PostLoadCurve p;
  p.p0_w = read_quantity(j, "p0", "W", ctx);
  p.t0_hot_k = read_quantity(j, "t0_hot", "K", ctx);
  p.exponent = read_number(j, "exponent", ctx);
  return p;
}

template <typename T, typename Fn>
ojson per_stage_array(const std::array<T, kNumStages>& values, Fn&& to_json) {
  ojson arr = ojson::array();
  for (const auto& v : values) arr.push_back(to_json(v));
  return arr;
}

ojson module_to_json(const ModuleSpec& m) {
  ojson j;
  j["kind"] = to_string(m.kind);
  j["position_m"] = m.position_m;
  if (const auto* node = std::get_if<NodeModule>(&m.payload)) {
    j["cooling"] = per_stage_array(node->cooling, cooling_to_json);
    j["internal_resistance"] = per_stage_array(node->internal_resistance, resistance_to_json);
    j["intrinsic_load_W"] = node->intrinsic_load_w;
  } else if (const auto* ad = std::get_if<AdapterModule>(&m.payload)) {
    j["length_m"] = ad->length_m;
  } else if (const auto* link = std::get_if<LinkModule>(&m.payload)) {
    j["length_m"] = link->length_m;
    j["post_offsets_m"] = link->post_offsets_m;
    j["posts_per_set"] = link->posts_per_set;
  } else if (const auto* braid = std::get_if<BraidModule>(&m.payload)) {
    j["resistance"] = per_stage_array(braid->resistance, resistance_to_json);
  } else if (const auto* cu = std::get_if<CoolingUnitModule>(&m.payload)) {
    ojson cooling = ojson::array();
    for (const auto& c : cu->cooling) {
      cooling.push_back(c ? cooling_to_json(*c) : ojson(nullptr));
    }
    j["cooling"] = std::move(cooling);
    j["resistance"] = per_stage_array(cu->resistance, resistance_to_json);
    j["intrinsic_load_W"] = cu->intrinsic_load_w;
  }
  return j;
}

template <typename T>
std::array<T, kNumStages> per_stage_from_json(const ojson& arr, const std::string& ctx,
                                              T (*from_json)(const ojson&, const std::string&)) {
  if (!arr.is_array() || arr.size() != kNumStages) {
    fail(ctx, "per-stage arrays must have exactly 4 entries (coldest first)");
  }
  std::array<T, kNumStages> out{};
  for (std::size_t i = 0; i < kNumStages; ++i) {
    out[i] = from_json(arr[i], ctx + " stage " + std::to_string(i + 1));
  }
  return out;
}

std::array<double, kNumStages> loads_from_json(const ojson& obj, const std::string& key,
                                               const std::string& ctx) {
  std::array<double, kNumStages> out{};
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return out;
  if (!it->is_array() || it->size() != kNumStages) {
    fail(ctx, "field " + key + " must be an array of 4 per-stage values");
  }
  for (std::size_t i = 0; i < kNumStages; ++i) {
    if (!(*it)[i].is_number()) fail(ctx, "field " + key + " must contain numbers");
    out[i] = (*it)[i].get<double>();
  }
  return out;
}

ModuleSpec module_from_json(const ojson& j, std::size_t index) {
  std::string ctx = "modules[" + std::to_string(index) + "]";
  if (!j.is_object()) fail(ctx, "module must be an object");
  const std::string kind = require_string(j, "kind", ctx);
  ctx = ctx + " (" + kind + ")";
  ModuleSpec m;
  m.position_m = read_quantity(j, "position", "m", ctx);
  if (kind == "node") {
    m.kind = ModuleKind::node;
    NodeModule node;
    node.cooling = per_stage_from_json<CoolingCurve>(require_array(j, "cooling", ctx), ctx,
                                                     cooling_from_json);
    node.internal_resistance = per_stage_from_json<ResistanceCurve>(
        require_array(j, "internal_resistance", ctx), ctx, resistance_from_json);
    node.intrinsic_load_w = loads_from_json(j, "intrinsic_load_W", ctx);
    m.payload = std::move(node);
  } else if (kind == "adapter") {
    m.kind = ModuleKind::adapter;
    m.payload = AdapterModule{read_quantity(j, "length", "m", ctx)};
  } else if (kind == "link") {
    m.kind = ModuleKind::link;
    LinkModule link;
    link.length_m = read_quantity(j, "length", "m", ctx);
    const auto it = j.find("post_offsets_m");
    if (it != j.end() && !it->is_null()) {
      if (!it->is_array()) fail(ctx, "post_offsets_m must be an array");
      for (const auto& v : *it) {
        if (!v.is_number()) fail(ctx, "post_offsets_m must contain numbers");
        link.post_offsets_m.push_back(v.get<double>());
      }
    }
    link.posts_per_set = static_cast<int>(read_number_or(j, "posts_per_set", 0.0, ctx));
    m.payload = std::move(link);
  } else if (kind == "braid") {
    m.kind = ModuleKind::braid;
    BraidModule braid;
    braid.resistance = per_stage_from_json<ResistanceCurve>(require_array(j, "resistance", ctx),
                                                            ctx, resistance_from_json);
    m.payload = std::move(braid);
  } else if (kind == "cooling_unit") {
    m.kind = ModuleKind::cooling_unit;
    CoolingUnitModule cu;
    const auto& cooling = require_array(j, "cooling", ctx);
    if (cooling.size() != kNumStages) fail(ctx, "cooling must have exactly 4 entries");
    for (std::size_t i = 0; i < kNumStages; ++i) {
      if (!cooling[i].is_null()) {
        cu.cooling[i] = cooling_from_json(cooling[i], ctx + " stage " + std::to_string(i + 1));
      }
    }
    cu.resistance = per_stage_from_json<ResistanceCurve>(require_array(j, "resistance", ctx), ctx,
                                                         resistance_from_json);
    cu.intrinsic_load_w = loads_from_json(j, "intrinsic_load_W", ctx);
    m.payload = std::move(cu);
  } else {
    fail(ctx, "unknown module kind '" + kind + "'");
  }
  return m;
}

StageSpec stage_from_json(const ojson& j, std::size_t index) {
  const std::string ctx = "stages[" + std::to_string(index) + "]";
  if (!j.is_object()) fail(ctx, "stage must be an object");
  StageSpec s;
  s.stage_index = static_cast<int>(read_number(j, "stage_index", ctx));
  s.reference_temperature_k = read_quantity(j, "reference_temperature", "K", ctx);
  s.cross_section_m2 = read_quantity(j, "cross_section", "m2", ctx);
  s.circumference_m = read_quantity(j, "circumference", "m", ctx);
  s.emissivity = read_number(j, "emissivity", ctx);
  s.shield_material = model_from_json(require_object(j, "shield_material", ctx), ctx);
  const auto it = j.find("mli_attenuation_override");
  if (it != j.end() && !it->is_null()) {
    if (!it->is_number()) fail(ctx, "mli_attenuation_override must be a number or null");
    s.mli_attenuation_override = it->get<double>();
  }
  s.discrete_posts = read_bool_or(j, "discrete_posts", true, ctx);
  s.radiative_self_coupling = read_bool_or(j, "radiative_self_coupling", false, ctx);
  s.extra_flux_w_per_m2 =
      read_quantity_opt(j, "extra_flux", "W_per_m2", ctx).value_or(0.0);
  const auto pl = j.find("post_load");
  if (pl != j.end() && !pl->is_null()) {
    s.post_load = post_load_from_json(*pl, ctx);
  }
  return s;
}

LinkAssembly assembly_from_json(const ojson& j) {
  if (!j.is_object()) throw validation_error("assembly: document must be a JSON object");
  const auto version = j.find("schema_version");
  if (version != j.end() && version->is_number() &&
      version->get<int>() > kConfigSchemaVersion) {
    fail("assembly", "unsupported schema_version " + version->dump());
  }
  LinkAssembly a;
  const auto& stages = require_array(j, "stages", "assembly");
  if (stages.size() != kNumStages) fail("assembly", "exactly 4 stages required (coldest first)");
  for (std::size_t i = 0; i < kNumStages; ++i) {
    a.stages[i] = stage_from_json(stages[i], i);
  }
  const auto& vc = require_object(j, "vacuum_can", "assembly");
  a.vacuum_can.temperature_k = read_quantity(vc, "temperature", "K", "vacuum_can");
  a.vacuum_can.emissivity = read_number(vc, "emissivity", "vacuum_can");
  a.vacuum_can.circumference_m = read_quantity(vc, "circumference", "m", "vacuum_can");
  const auto& mods = require_array(j, "modules", "assembly");
  for (std::size_t i = 0; i < mods.size(); ++i) {
    a.modules.push_back(module_from_json(mods[i], i));
  }
  validate_assembly(a);
  return a;
}

ojson assembly_to_json(const LinkAssembly& a) {
  ojson j;
  j["schema_version"] = kConfigSchemaVersion;
  ojson vc;
  vc["temperature_K"] = a.vacuum_can.temperature_k;
  vc["emissivity"] = a.vacuum_can.emissivity;
  vc["circumference_m"] = a.vacuum_can.circumference_m;
  j["vacuum_can"] = std::move(vc);
  ojson stages = ojson::array();
  for (const auto& s : a.stages) {
    ojson st;
    st["stage_index"] = s.stage_index;
    st["reference_temperature_K"] = s.reference_temperature_k;
    st["cross_section_m2"] = s.cross_section_m2;
    st["circumference_m"] = s.circumference_m;
    st["emissivity"] = s.emissivity;
    st["shield_material"] = model_to_json(s.shield_material);
    st["mli_attenuation_override"] =
        s.mli_attenuation_override ? ojson(*s.mli_attenuation_override) : ojson(nullptr);
    st["discrete_posts"] = s.discrete_posts;
    st["radiative_self_coupling"] = s.radiative_self_coupling;
    st["extra_flux_W_per_m2"] = s.extra_flux_w_per_m2;
    st["post_load"] = post_load_to_json(s.post_load);
    stages.push_back(std::move(st));
  }
  j["stages"] = std::move(stages);
  ojson mods = ojson::array();
  for (const auto& m : a.modules) {
    mods.push_back(module_to_json(m));
  }
  j["modules"] = std::move(mods);
  return j;
}

ojson parse_json_text(const std::string& text, const char* what) {
  try {
    return ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw std::invalid_argument(std::string(what) + ": malformed JSON: " + e.what());
  }
}

}  // namespace

LinkAssembly parse_assembly(const std::string& json_text) {
  return assembly_from_json(parse_json_text(json_text, "assembly"));
}

std::string serialize_assembly(const LinkAssembly& assembly) {
  return assembly_to_json(assembly).dump(2) + "\n";
}

ConfigDocument parse_config_document(const std::string& json_text) {
  const ojson j = parse_json_text(json_text, "config");
  if (!j.is_object()) throw validation_error("config: document must be a JSON object");
  ConfigDocument doc;

  if (j.contains("stages") && j.contains("modules")) {
    // The document is a bare assembly.
    doc.assembly = assembly_from_json(j);
    return doc;
  }
  if (j.contains("assembly")) {
    doc.assembly = assembly_from_json(j.at("assembly"));
  }
  if (j.contains("standard_options")) {
    const auto& so = j.at("standard_options");
    if (!so.is_object()) fail("standard_options", "must be an object");
    StandardOptions opts;
    doc.standard_length_m = read_quantity_opt(so, "length", "m", "standard_options");
    doc.cu_spacing_m = read_quantity_opt(so, "cu_spacing", "m", "standard_options");
    opts.central_cooling_unit =
        read_bool_or(so, "central_cooling_unit", false, "standard_options");
    opts.posts_per_set =
        static_cast<int>(read_number_or(so, "posts_per_set", 3.0, "standard_options"));
    opts.adapter_length_m =
        read_quantity_opt(so, "adapter_length", "m", "standard_options").value_or(1.25);
    opts.link_module_length_m =
        read_quantity_opt(so, "link_module_length", "m", "standard_options").value_or(2.5);
    opts.base_intrinsic_load_w =
        read_quantity_opt(so, "base_intrinsic_load", "W", "standard_options").value_or(5e-6);
    opts.vacuum_can_temperature_k =
        read_quantity_opt(so, "vacuum_can_temperature", "K", "standard_options").value_or(293.0);
    doc.standard_options = opts;
  }
  if (j.contains("solver_settings")) {
    const auto& ss = j.at("solver_settings");
    if (!ss.is_object()) fail("solver_settings", "must be an object");
    for (const auto& [key, value] : ss.items()) {
      if (!value.is_number()) fail("solver_settings", "value of " + key + " must be a number");
      doc.solver_settings[key] = value.get<double>();
    }
  }
  return doc;
}

LinkAssembly assembly_from_config(const ConfigDocument& config) {
  if (config.assembly) {
    validate_assembly(*config.assembly);
    return *config.assembly;
  }
  if (config.standard_length_m) {
    return standard_assembly(*config.standard_length_m, config.cu_spacing_m,
                             config.standard_options.value_or(StandardOptions{}));
  }
  throw validation_error(
      "config: document provides neither an assembly nor standard_options.length_m");
}

}  // namespace cryolink
