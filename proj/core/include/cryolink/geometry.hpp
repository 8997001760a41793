#pragma once

// Geometric and topological description of a modular cryogenic link.
//
// A link assembly is a one-dimensional chain of modules connecting two (or
// more) cryostat nodes.  Each module either has an extent (adapter modules,
// link modules) or sits at a point between extents (nodes, braid modules,
// cooling units).  Four nested temperature stages run the full length of the
// assembly; StageSpec carries the per-stage shield geometry and material.
//
//   node          refrigeration sink on all four stages; couples to the
//                 shield flange through a per-stage internal resistance and
//                 adds an optional intrinsic plate load
//   adapter       rigid extent module next to a node, no support posts
//   link          repeating extent module carrying sets of support posts
//   braid         flexible joint; per-stage series contact resistance
//   cooling unit  intermediate refrigerator: sink on the stages that carry a
//                 cooling curve, series pass-through resistance on the rest
//
// The module also provides the standard assembly builder (the catalog of
// measured hardware parameters), JSON (de)serialization with explicit unit
// suffixes, and the interface/sink enumeration the solver consumes.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cryolink/materials.hpp"

namespace cryolink {

inline constexpr int kNumStages = 4;
inline constexpr int kConfigSchemaVersion = 1;

// Heat conducted into a stage through one support post as a function of the
// temperature of the next-hotter stage at the post position:
//   P(T_hot) = p0_w * (T_hot / t0_hot_k)^exponent
struct PostLoadCurve {
  double p0_w = 0.0;
  double t0_hot_k = 1.0;
  double exponent = 0.0;
};

// Per-stage shield geometry, material and load parameters.
struct StageSpec {
  int stage_index = 1;                  // 1 = coldest ... 4 = outermost
  double reference_temperature_k = 1.0; // stage design temperature T0
  double cross_section_m2 = 0.0;        // conduction cross-section of the shield
  double circumference_m = 0.0;         // radiating perimeter of the shield
  double emissivity = 0.0;
  ConductivityModel shield_material = ConductivityModel::nist_rrr_copper(100.0);

  // Effective radiative attenuation of the gap outside this stage.  When
  // set, it replaces the value derived from the surface emissivities.  A
  // fitted effective attenuation absorbs every transfer channel between the
  // enclosing surface and the shield (including support-post conduction),
  // so stages carrying one normally disable discrete_posts.
  std::optional<double> mli_attenuation_override;

  // Apply per-post heat deltas to this stage's line load.  Disabled on
  // stages whose attenuation override already accounts for the posts.
  bool discrete_posts = true;

  // Let the radiative load depend on the stage's own temperature profile
  // (relevant only where the shield runs hot enough to re-radiate).
  bool radiative_self_coupling = false;

  // Additional uniform flux on the shield surface (instrumentation, wiring).
  double extra_flux_w_per_m2 = 0.0;

  PostLoadCurve post_load;
};

// Enclosing room-temperature vacuum vessel.
struct VacuumCan {
  double temperature_k = 293.0;
  double emissivity = 0.05;
  double circumference_m = 0.0;
};

enum class ModuleKind { node, adapter, link, braid, cooling_unit };

const char* to_string(ModuleKind kind);

struct NodeModule {
  std::array<CoolingCurve, kNumStages> cooling{};             // [stage-1]
  std::array<ResistanceCurve, kNumStages> internal_resistance{};
  std::array<double, kNumStages> intrinsic_load_w{};          // plate-level
};

struct AdapterModule {
  double length_m = 0.0;
};

struct LinkModule {
  double length_m = 0.0;
  std::vector<double> post_offsets_m;  // post-set positions relative to module start
  int posts_per_set = 0;
};

struct BraidModule {
  std::array<ResistanceCurve, kNumStages> resistance{};
};

struct CoolingUnitModule {
  std::array<std::optional<CoolingCurve>, kNumStages> cooling{};  // set on sink stages
  std::array<ResistanceCurve, kNumStages> resistance{};           // pass/coupling
  std::array<double, kNumStages> intrinsic_load_w{};
};

struct ModuleSpec {
  ModuleKind kind = ModuleKind::node;
  double position_m = 0.0;  // start for extent modules, location for points
  std::variant<NodeModule, AdapterModule, LinkModule, BraidModule, CoolingUnitModule> payload;

  double length_m() const;  // 0 for point modules
  double end_m() const { return position_m + length_m(); }
};

struct LinkAssembly {
  std::array<StageSpec, kNumStages> stages{};  // stages[i] describes stage i+1
  VacuumCan vacuum_can;
  std::vector<ModuleSpec> modules;  // ordered by position

  const StageSpec& stage(int stage_index) const;
  StageSpec& stage(int stage_index);

  // Distance between the first and last node flange.
  double total_length_m() const;
};

// Throws validation_error (message names the module index and field) if the
// assembly violates a structural invariant: stages out of order, extents not
// tiling the span, point modules away from junctions, first/last module not
// a node, bad curve or geometry parameters.
void validate_assembly(const LinkAssembly& assembly);

// ---------------------------------------------------------------------------
// Standard hardware catalog
// ---------------------------------------------------------------------------

// Knobs of the standard assembly builder.  Defaults describe the measured
// production hardware.
struct StandardOptions {
  bool central_cooling_unit = false;  // place one cooling unit at mid-span
  int posts_per_set = 3;              // posts per support set (two sets per link module)
  double adapter_length_m = 1.25;
  double link_module_length_m = 2.5;
  double base_intrinsic_load_w = 5e-6;  // wiring/readout load on each node's coldest plate
  double vacuum_can_temperature_k = 293.0;
};

// Measured defaults for the four temperature stages and the module curves.
StageSpec default_stage(int stage_index);
VacuumCan default_vacuum_can();
CoolingCurve default_node_cooling(int stage_index);
ResistanceCurve default_node_internal_resistance(int stage_index);
ResistanceCurve default_braid_resistance(int stage_index);
ResistanceCurve default_cooling_unit_resistance(int stage_index);
std::optional<CoolingCurve> default_cooling_unit_cooling(int stage_index);
PostLoadCurve default_post_load(int stage_index);
NodeModule default_node(const StandardOptions& options = {});
BraidModule default_braid();
CoolingUnitModule default_cooling_unit();

// Builds a two-node assembly of the requested length from the standard
// catalog: adapter stacks at the node flanges, 2.5 m link modules in
// between (a partial span is filled with one shortened link module), braid
// modules at every flexible junction, and cooling units at interior
// multiples of cu_spacing_m (and/or at mid-span).  Throws validation_error
// if the length is below the minimum buildable span.
LinkAssembly standard_assembly(double length_m,
                               std::optional<double> cu_spacing_m = std::nullopt,
                               const StandardOptions& options = {});

// ---------------------------------------------------------------------------
// Solver-facing enumeration
// ---------------------------------------------------------------------------

// A point along a stage where the temperature jumps across a series contact
// resistance (braid joints; cooling-unit pass-through on stages the unit
// does not cool).
struct InterfacePoint {
  double position_m = 0.0;
  ModuleKind source = ModuleKind::braid;
  std::size_t module_index = 0;
  ResistanceCurve resistance;
};

// A point along a stage where heat is extracted: the plate couples to the
// shield through `coupling` and follows `cooling`, with `intrinsic_load_w`
// applied directly at the plate.
struct SinkPoint {
  double position_m = 0.0;
  ModuleKind source = ModuleKind::node;
  std::size_t module_index = 0;
  CoolingCurve cooling;
  ResistanceCurve coupling;
  double intrinsic_load_w = 0.0;
};

// A set of support posts at one axial position.
struct PostSet {
  double position_m = 0.0;
  int count = 0;
};

std::vector<InterfacePoint> interfaces(const LinkAssembly& assembly, int stage_index);
std::vector<SinkPoint> sink_points(const LinkAssembly& assembly, int stage_index);
std::vector<PostSet> post_sets(const LinkAssembly& assembly);

// ---------------------------------------------------------------------------
// JSON configuration
// ---------------------------------------------------------------------------

// Parses an assembly from JSON text.  Physical quantities carry explicit
// unit suffixes in their key names; the canonical form uses SI units
// ("length_m", "reference_temperature_K", ...) and a fixed set of scaled
// alternates is accepted on input ("_mm", "_mK", "_uW", "_K_per_mW", ...).
// Throws validation_error (structure/values) or std::invalid_argument
// (malformed JSON).
LinkAssembly parse_assembly(const std::string& json_text);

// Serializes to canonical JSON (SI unit suffixes, fixed key order, lossless
// doubles).  parse_assembly(serialize_assembly(a)) reproduces `a` exactly.
std::string serialize_assembly(const LinkAssembly& assembly);

// A full configuration document: any of an explicit assembly, standard
// builder arguments, and solver-setting overrides (applied by the solver's
// apply_settings).
struct ConfigDocument {
  std::optional<LinkAssembly> assembly;
  std::optional<double> standard_length_m;
  std::optional<double> cu_spacing_m;
  std::optional<StandardOptions> standard_options;
  std::map<std::string, double> solver_settings;
};

ConfigDocument parse_config_document(const std::string& json_text);

// Materializes the assembly a document describes: the explicit one if
// present, otherwise standard_assembly(standard_length_m, cu_spacing_m,
// standard_options).  Throws validation_error if neither is given.
LinkAssembly assembly_from_config(const ConfigDocument& config);

}  // namespace cryolink
