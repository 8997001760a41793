// Command-line front end for the cryolink library.
//
// Subcommands:
//   validate         parse a configuration document and report problems
//   solve            steady-state solve; per-stage + combined profile files
//   sweep            solve standard assemblies over a range of lengths
//   feasible-length  largest operable standard-assembly length in a bracket
//   fit rrr          copper purity from a heater-sweep CSV + metadata sidecar
//   fit powerlaw     least-squares fit of y = a * x^b from an x/y CSV
//   fit braid        bulk/contact decomposition of braid resistance series
//   fit mli          effective radiative attenuation from a measured profile
//   loss             microwave channel attenuation for a link length
//
// Every run that writes data files also writes <out>/manifest.json, always
// last, so its presence marks a completed run (on failure it carries the
// error and lists whatever partial outputs exist).  Data files are
// deterministic for identical inputs: fixed column order, fixed row order,
// every number rendered in scientific notation with nine significant
// digits.  The manifest is excluded from that guarantee because it records
// the wall-clock duration.
//
// Exit codes: 0 success, 64 usage, 65 invalid configuration or data,
// 66 unreadable/unwritable file, 69 physically infeasible request,
// 70 iteration budget exhausted, 1 unexpected failure.

#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "cryolink/errors.hpp"
#include "cryolink/feasibility.hpp"
#include "cryolink/fitting.hpp"
#include "cryolink/geometry.hpp"
#include "cryolink/materials.hpp"
#include "cryolink/solver.hpp"

#ifndef CRYOLINK_TOOL_VERSION
#define CRYOLINK_TOOL_VERSION "0.0.0"
#endif

namespace {

constexpr int kExitUsage = 64;
constexpr int kExitValidation = 65;
constexpr int kExitIo = 66;
constexpr int kExitInfeasible = 69;
constexpr int kExitConvergence = 70;

// Command-line level misuse that CLI11 itself cannot catch (malformed
// key=value or range specifications).  Mapped to the usage exit code.
class usage_error : public std::runtime_error {
 public:
  explicit usage_error(const std::string& what) : std::runtime_error(what) {}
};

// All numbers in data files go through this: scientific notation, nine
// significant digits, negative zero collapsed.
std::string fmt(double value) {
  if (value == 0.0) value = 0.0;
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.8e", value);
  return std::string(buffer);
}

std::string json_quote(const std::string& text) { return nlohmann::json(text).dump(); }

// Error text destined for a CSV field: keep it on one line and comma-free.
std::string csv_sanitize(std::string text) {
  for (char& c : text) {
    if (c == ',') {
      c = ';';
    } else if (c == '\n' || c == '\r') {
      c = ' ';
    }
  }
  return text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cryolink::io_error("cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw cryolink::io_error("cannot read " + path);
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw cryolink::io_error("cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out) throw cryolink::io_error("short write to " + path.string());
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw cryolink::io_error("cannot create output directory " + dir.string() + ": " +
                             ec.message());
  }
}

double strict_double(const std::string& text, const std::string& context) {
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(value)) {
    throw usage_error(context + ": '" + text + "' is not a finite number");
  }
  return value;
}

std::map<std::string, double> parse_setting_overrides(const std::vector<std::string>& items) {
  std::map<std::string, double> overrides;
  for (const std::string& item : items) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw usage_error("--settings expects key=value, got '" + item + "'");
    }
    overrides[item.substr(0, eq)] = strict_double(item.substr(eq + 1), "--settings " + item.substr(0, eq));
  }
  return overrides;
}

// "a:b:step" expands to the inclusive arithmetic progression a, a+step, ...;
// a bare number is a single-element list.
std::vector<double> parse_range_spec(const std::string& spec, const std::string& flag) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t colon = spec.find(':', start);
    parts.push_back(spec.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() == 1) return {strict_double(parts[0], flag)};
  if (parts.size() != 3) throw usage_error(flag + " expects a:b:step or a single value");
  const double lo = strict_double(parts[0], flag);
  const double hi = strict_double(parts[1], flag);
  const double step = strict_double(parts[2], flag);
  if (step <= 0.0) throw usage_error(flag + ": step must be positive");
  if (hi < lo) throw usage_error(flag + ": range end lies below its start");
  if ((hi - lo) / step > 1e6) throw usage_error(flag + ": range expands to too many points");
  std::vector<double> values;
  for (int k = 0;; ++k) {
    const double value = lo + k * step;
    if (value > hi + step * 1e-9) break;
    values.push_back(value);
  }
  return values;
}

// --- options shared by every subcommand -------------------------------------

struct CommonOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::string format = "csv";
  int jobs = 1;
  std::vector<std::string> settings_kv;
};

void add_common_options(CLI::App* cmd, CommonOptions& opts, bool config_required) {
  CLI::Option* config = cmd->add_option("--config", opts.config_path, "configuration document (JSON)");
  if (config_required) config->required();
  cmd->add_option("--out", opts.out_dir, "directory for output files")->capture_default_str();
  cmd->add_option("--format", opts.format, "data file format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  cmd->add_option("--jobs", opts.jobs, "worker threads for sweeps")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--settings", opts.settings_kv, "solver setting override key=value (repeatable)")
      ->type_size(1);
}

cryolink::ConfigDocument load_config(const std::string& path) {
  return cryolink::parse_config_document(read_text_file(path));
}

// Config-document settings first, command-line overrides on top; both go
// through the same key validation.
cryolink::SolverSettings resolve_settings(const cryolink::ConfigDocument* config,
                                          const std::map<std::string, double>& overrides) {
  cryolink::SolverSettings settings;
  if (config != nullptr) cryolink::apply_settings(settings, config->solver_settings);
  cryolink::apply_settings(settings, overrides);
  return settings;
}

// --- run manifest ------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::vector<std::string> config_paths;
  std::map<std::string, double> settings_overrides;
  std::filesystem::path out_dir = ".";
  std::vector<std::string> output_files;  // names relative to out_dir, write order
  nlohmann::ordered_json convergence;     // null unless a solver ran
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  void write(const std::string* error) const {
    nlohmann::ordered_json doc;
    doc["schema_version"] = 1;
    doc["tool_version"] = CRYOLINK_TOOL_VERSION;
    doc["command"] = command;
    doc["config_paths"] = config_paths;
    nlohmann::ordered_json overrides(nlohmann::ordered_json::value_t::object);
    for (const auto& [key, value] : settings_overrides) overrides[key] = value;
    doc["settings_overrides"] = std::move(overrides);
    doc["output_files"] = output_files;
    doc["convergence"] = convergence;
    const auto elapsed = std::chrono::steady_clock::now() - started;
    doc["duration_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    if (error != nullptr) doc["error"] = *error;
    write_text_file(out_dir / "manifest.json", doc.dump(2) + "\n");
  }
};

// Runs the command body, then writes the manifest last so that a complete
// manifest implies every listed output exists.  On failure the manifest is
// written best-effort with the error recorded, and the error propagates to
// the exit-code mapping.
void run_with_manifest(RunManifest& manifest, const std::function<void()>& body) {
  try {
    body();
    manifest.write(nullptr);
  } catch (const std::exception& e) {
    const std::string reason = e.what();
    try {
      manifest.write(&reason);
    } catch (...) {
      // Unwritable manifest on the failure path: the original error is the
      // one worth reporting.
    }
    throw;
  }
}

nlohmann::ordered_json convergence_json(const cryolink::ConvergenceReport& report) {
  nlohmann::ordered_json doc;
  doc["picard_iterations"] = report.picard_iterations;
  doc["picard_residual_k"] = report.picard_residual_k;
  doc["relaxation_sweeps"] = report.relaxation_sweeps;
  return doc;
}

// --- profile / sweep serialization -------------------------------------------

constexpr const char kProfileCsvHeader[] = "stage,x_m,T_K,Q_W,kind\n";

std::string profile_csv_rows(const cryolink::StageProfile& profile) {
  std::string rows;
  for (const cryolink::ProfileSample& sample : profile.samples) {
    rows += std::to_string(profile.stage_index);
    rows += ',';
    rows += fmt(sample.position_m);
    rows += ',';
    rows += fmt(sample.temperature_k);
    rows += ',';
    rows += fmt(sample.heat_flow_w);
    rows += ',';
    rows += cryolink::to_string(sample.kind);
    rows += '\n';
  }
  return rows;
}

void append_profile_json_records(const cryolink::StageProfile& profile,
                                 std::vector<std::string>& records) {
  for (const cryolink::ProfileSample& sample : profile.samples) {
    records.push_back("  {\"stage\": " + std::to_string(profile.stage_index) +
                      ", \"x_m\": " + fmt(sample.position_m) +
                      ", \"T_K\": " + fmt(sample.temperature_k) +
                      ", \"Q_W\": " + fmt(sample.heat_flow_w) + ", \"kind\": \"" +
                      cryolink::to_string(sample.kind) + "\"}");
  }
}

std::string join_json_array(const std::vector<std::string>& records) {
  if (records.empty()) return "[]\n";
  std::string text = "[\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    text += records[i];
    text += (i + 1 < records.size()) ? ",\n" : "\n";
  }
  text += "]\n";
  return text;
}

std::string profile_file_text(const cryolink::StageProfile& profile, const std::string& format) {
  if (format == "csv") return std::string(kProfileCsvHeader) + profile_csv_rows(profile);
  std::vector<std::string> records;
  append_profile_json_records(profile, records);
  return join_json_array(records);
}

std::string criterion_flags(const cryolink::CriteriaReport& report) {
  std::string flags;
  for (const cryolink::CriterionResult& criterion : report.criteria) {
    if (!flags.empty()) flags += ';';
    flags += criterion.name + (criterion.pass ? ":pass" : ":fail");
  }
  return flags;
}

std::string sweep_csv(const cryolink::LengthSweepResult& result) {
  std::string text = "length_m,stage,T_c_K,T_h_K,criterion_flags\n";
  for (const cryolink::LengthResult& entry : result.entries) {
    if (!entry.solved()) {
      text += fmt(entry.length_m) + ",,,,error:" + csv_sanitize(entry.error) + "\n";
      continue;
    }
    const std::string flags = criterion_flags(entry.criteria);
    for (int stage = 1; stage <= cryolink::kNumStages; ++stage) {
      const cryolink::StageExtremes& extremes = entry.extremes[static_cast<std::size_t>(stage - 1)];
      text += fmt(entry.length_m) + "," + std::to_string(stage) + "," + fmt(extremes.coldest_k) +
              "," + fmt(extremes.hottest_k) + "," + flags + "\n";
    }
  }
  return text;
}

std::string sweep_json(const cryolink::LengthSweepResult& result) {
  std::vector<std::string> records;
  for (const cryolink::LengthResult& entry : result.entries) {
    if (!entry.solved()) {
      records.push_back("  {\"length_m\": " + fmt(entry.length_m) +
                        ", \"error\": " + json_quote(entry.error) + "}");
      continue;
    }
    std::string stages = "[";
    for (int stage = 1; stage <= cryolink::kNumStages; ++stage) {
      const cryolink::StageExtremes& extremes = entry.extremes[static_cast<std::size_t>(stage - 1)];
      if (stage > 1) stages += ", ";
      stages += "{\"stage\": " + std::to_string(stage) + ", \"T_c_K\": " + fmt(extremes.coldest_k) +
                ", \"T_h_K\": " + fmt(extremes.hottest_k) + "}";
    }
    stages += "]";
    std::string criteria = "[";
    bool first = true;
    for (const cryolink::CriterionResult& criterion : entry.criteria.criteria) {
      if (!first) criteria += ", ";
      first = false;
      criteria += "{\"name\": " + json_quote(criterion.name) +
                  ", \"pass\": " + (criterion.pass ? "true" : "false") +
                  ", \"observed_K\": " + fmt(criterion.observed_extreme_k) +
                  ", \"threshold_K\": " + fmt(criterion.threshold_k) +
                  ", \"location_m\": " + fmt(criterion.location_m) + "}";
    }
    criteria += "]";
    records.push_back("  {\"length_m\": " + fmt(entry.length_m) + ", \"stages\": " + stages +
                      ", \"criteria\": " + criteria + "}");
  }
  return join_json_array(records);
}

void print_fit_summary(const std::string& name, const cryolink::FitResult& fit) {
  std::cout << "fit " << name << ":";
  for (const auto& [parameter, value] : fit.parameters) {
    std::cout << " " << parameter << "=" << fmt(value.value);
    if (!value.unit.empty() && value.unit != "1") std::cout << " " << value.unit;
  }
  std::cout << "\n  residual=" << fmt(fit.residual) << " dof=" << fit.dof
            << " points=" << fit.point_residuals.size() << "\n";
}

// --- commands ----------------------------------------------------------------

void cmd_validate(const CommonOptions& opts) {
  const std::map<std::string, double> overrides = parse_setting_overrides(opts.settings_kv);
  const cryolink::ConfigDocument config = load_config(opts.config_path);
  resolve_settings(&config, overrides);
  const cryolink::LinkAssembly assembly = cryolink::assembly_from_config(config);

  constexpr std::array<cryolink::ModuleKind, 5> kKinds = {
      cryolink::ModuleKind::node, cryolink::ModuleKind::adapter, cryolink::ModuleKind::link,
      cryolink::ModuleKind::braid, cryolink::ModuleKind::cooling_unit};
  std::cout << "valid: " << opts.config_path << "\n";
  std::cout << "total length: " << fmt(assembly.total_length_m()) << " m\n";
  std::cout << "modules:";
  bool any = false;
  for (const cryolink::ModuleKind kind : kKinds) {
    std::size_t count = 0;
    for (const cryolink::ModuleSpec& module : assembly.modules) {
      if (module.kind == kind) ++count;
    }
    if (count == 0) continue;
    std::cout << (any ? ", " : " ") << count << " " << cryolink::to_string(kind);
    any = true;
  }
  std::cout << (any ? "\n" : " none\n");
}

void cmd_solve(const CommonOptions& opts) {
  const std::map<std::string, double> overrides = parse_setting_overrides(opts.settings_kv);
  RunManifest manifest;
  manifest.command = "solve";
  manifest.config_paths.push_back(opts.config_path);
  manifest.settings_overrides = overrides;
  manifest.out_dir = opts.out_dir.empty() ? "." : opts.out_dir;

  run_with_manifest(manifest, [&] {
    const cryolink::ConfigDocument config = load_config(opts.config_path);
    const cryolink::SolverSettings settings = resolve_settings(&config, overrides);
    const cryolink::LinkAssembly assembly = cryolink::assembly_from_config(config);
    ensure_directory(manifest.out_dir);

    // Outermost stage first, each profile written as soon as its stage is
    // solved: an infeasible inner stage still leaves the outer profiles on
    // disk as diagnostics.
    cryolink::AssemblySolution solution;
    const double can_temperature = assembly.vacuum_can.temperature_k;
    std::function<double(double)> hot = [can_temperature](double) { return can_temperature; };
    for (int stage_index = cryolink::kNumStages; stage_index >= 1; --stage_index) {
      const std::size_t slot = static_cast<std::size_t>(stage_index - 1);
      solution.stages[slot] = cryolink::solve_stage(assembly, stage_index, hot, settings);
      const cryolink::StageProfile* solved = &solution.stages[slot];
      hot = [solved](double x) { return solved->temperature_at(x); };
      solution.convergence.relaxation_sweeps[slot] = solved->relaxation_sweeps;
      if (solved->picard_iterations > solution.convergence.picard_iterations) {
        solution.convergence.picard_iterations = solved->picard_iterations;
        solution.convergence.picard_residual_k = solved->picard_residual_k;
      }
      const std::string name = "profile_stage" + std::to_string(stage_index) + "." + opts.format;
      write_text_file(manifest.out_dir / name, profile_file_text(*solved, opts.format));
      manifest.output_files.push_back(name);
    }

    const std::string combined_name = "profile_combined." + opts.format;
    if (opts.format == "csv") {
      std::string text = kProfileCsvHeader;
      for (int stage = 1; stage <= cryolink::kNumStages; ++stage) {
        text += profile_csv_rows(solution.stage(stage));
      }
      write_text_file(manifest.out_dir / combined_name, text);
    } else {
      std::vector<std::string> records;
      for (int stage = 1; stage <= cryolink::kNumStages; ++stage) {
        append_profile_json_records(solution.stage(stage), records);
      }
      write_text_file(manifest.out_dir / combined_name, join_json_array(records));
    }
    manifest.output_files.push_back(combined_name);
    manifest.convergence = convergence_json(solution.convergence);

    for (int stage = 1; stage <= cryolink::kNumStages; ++stage) {
      const cryolink::StageProfile& profile = solution.stage(stage);
      double extracted = 0.0;
      for (const cryolink::SinkRecord& sink : profile.sinks) extracted += sink.extracted_power_w;
      std::cout << "stage " << stage << ": T in [" << fmt(profile.min_temperature_k()) << ", "
                << fmt(profile.max_temperature_k()) << "] K, " << profile.sinks.size()
                << " sinks extracting " << fmt(extracted) << " W\n";
    }
    std::cout << "wrote " << manifest.output_files.size() << " profile files to "
              << manifest.out_dir.string() << "\n";
  });
}

void cmd_sweep(const CommonOptions& opts, const std::string& lengths_spec,
               const std::optional<double>& cu_spacing_flag) {
  const std::map<std::string, double> overrides = parse_setting_overrides(opts.settings_kv);
  const std::vector<double> lengths = parse_range_spec(lengths_spec, "--lengths");
  RunManifest manifest;
  manifest.command = "sweep";
  if (!opts.config_path.empty()) manifest.config_paths.push_back(opts.config_path);
  manifest.settings_overrides = overrides;
  manifest.out_dir = opts.out_dir.empty() ? "." : opts.out_dir;

  run_with_manifest(manifest, [&] {
    std::optional<cryolink::ConfigDocument> config;
    if (!opts.config_path.empty()) config = load_config(opts.config_path);
    const cryolink::SolverSettings settings =
        resolve_settings(config ? &*config : nullptr, overrides);
    cryolink::StandardOptions standard;
    if (config && config->standard_options) standard = *config->standard_options;
    std::optional<double> cu_spacing = cu_spacing_flag;
    if (!cu_spacing && config) cu_spacing = config->cu_spacing_m;

    const cryolink::LengthSweepResult result =
        cryolink::sweep_lengths(lengths, cu_spacing, standard, settings, opts.jobs);

    ensure_directory(manifest.out_dir);
    const std::string name = "sweep." + opts.format;
    write_text_file(manifest.out_dir / name,
                    opts.format == "csv" ? sweep_csv(result) : sweep_json(result));
    manifest.output_files.push_back(name);

    std::size_t solved = 0;
    for (const cryolink::LengthResult& entry : result.entries) {
      if (entry.solved()) ++solved;
    }
    nlohmann::ordered_json summary;
    summary["lengths_total"] = result.entries.size();
    summary["lengths_solved"] = solved;
    summary["lengths_failed"] = result.entries.size() - solved;
    manifest.convergence = std::move(summary);

    for (const cryolink::LengthResult& entry : result.entries) {
      std::cout << "L=" << fmt(entry.length_m) << " m: ";
      if (!entry.solved()) {
        std::cout << "error: " << entry.error << "\n";
      } else if (entry.feasible()) {
        std::cout << "feasible\n";
      } else {
        std::cout << "violates " << entry.criteria.first_failure() << "\n";
      }
    }
    if (result.first_violation) {
      std::cout << "first violation: " << fmt(result.first_violation->length_m) << " m ("
                << result.first_violation->criterion << ")\n";
    } else {
      std::cout << "no violation within the swept range\n";
    }
  });
}

void cmd_feasible_length(const CommonOptions& opts, double lo_m, double hi_m,
                         const std::optional<double>& cu_spacing_flag, double tolerance_m) {
  const std::map<std::string, double> overrides = parse_setting_overrides(opts.settings_kv);
  RunManifest manifest;
  manifest.command = "feasible-length";
  if (!opts.config_path.empty()) manifest.config_paths.push_back(opts.config_path);
  manifest.settings_overrides = overrides;
  manifest.out_dir = opts.out_dir.empty() ? "." : opts.out_dir;

  run_with_manifest(manifest, [&] {
    std::optional<cryolink::ConfigDocument> config;
    if (!opts.config_path.empty()) config = load_config(opts.config_path);
    const cryolink::SolverSettings settings =
        resolve_settings(config ? &*config : nullptr, overrides);
    cryolink::StandardOptions standard;
    if (config && config->standard_options) standard = *config->standard_options;
    std::optional<double> cu_spacing = cu_spacing_flag;
    if (!cu_spacing && config) cu_spacing = config->cu_spacing_m;

    const double length =
        cryolink::max_feasible_length(lo_m, hi_m, cu_spacing, standard, settings, tolerance_m);

    ensure_directory(manifest.out_dir);
    const std::string name = "feasible_length." + opts.format;
    const std::string text = opts.format == "csv"
                                 ? "length_m\n" + fmt(length) + "\n"
                                 : "{\"length_m\": " + fmt(length) + "}\n";
    write_text_file(manifest.out_dir / name, text);
    manifest.output_files.push_back(name);

    std::cout << "max feasible length: " << fmt(length) << " m\n";
  });
}

void cmd_loss(double length_m, double alpha_db_per_km) {
  std::cout << fmt(cryolink::channel_loss_db(length_m, alpha_db_per_km)) << "\n";
}

void write_fit_outputs(RunManifest& manifest, const std::string& file_name,
                       const cryolink::FitResult& fit) {
  ensure_directory(manifest.out_dir);
  write_text_file(manifest.out_dir / file_name, cryolink::serialize_fit_result(fit));
  manifest.output_files.push_back(file_name);
}

void cmd_fit_rrr(const CommonOptions& opts, const std::string& data_path,
                 const std::string& meta_path, double noise_floor_k) {
  const std::map<std::string, double> overrides = parse_setting_overrides(opts.settings_kv);
  resolve_settings(nullptr, overrides);  // reject typos even though unused here
  RunManifest manifest;
  manifest.command = "fit rrr";
  manifest.config_paths = {data_path, meta_path};
  manifest.settings_overrides = overrides;
  manifest.out_dir = opts.out_dir.empty() ? "." : opts.out_dir;

  run_with_manifest(manifest, [&] {
    const cryolink::HeaterSweep sweep = cryolink::load_heater_sweep(data_path, meta_path);
    std::vector<std::string> warnings;
    const std::vector<cryolink::ConductivityPoint> points =
        cryolink::shield_conductivity_points(sweep, noise_floor_k, &warnings);
    for (const std::string& warning : warnings) std::cerr << "warning: " << warning << "\n";
    const cryolink::FitResult fit = cryolink::fit_rrr(points);
    write_fit_outputs(manifest, "fit_rrr.json", fit);
    print_fit_summary("rrr", fit);
  });
}

void cmd_fit_powerlaw(const CommonOptions& opts, const std::string& data_path) {
  const std::map<std::string, double> overrides = parse_setting_overrides(opts.settings_kv);
  resolve_settings(nullptr, overrides);
  RunManifest manifest;
  manifest.command = "fit powerlaw";
  manifest.config_paths = {data_path};
  manifest.settings_overrides = overrides;
  manifest.out_dir = opts.out_dir.empty() ? "." : opts.out_dir;

  run_with_manifest(manifest, [&] {
    const cryolink::FitResult fit = cryolink::fit_power_law(cryolink::load_xy_points(data_path));
    write_fit_outputs(manifest, "fit_powerlaw.json", fit);
    print_fit_summary("powerlaw", fit);
  });
}

void cmd_fit_braid(const CommonOptions& opts, const std::string& total_path,
                   const std::string& bulk_path, double noise_rel_tol) {
  const std::map<std::string, double> overrides = parse_setting_overrides(opts.settings_kv);
  resolve_settings(nullptr, overrides);
  RunManifest manifest;
  manifest.command = "fit braid";
  manifest.config_paths = {total_path, bulk_path};
  manifest.settings_overrides = overrides;
  manifest.out_dir = opts.out_dir.empty() ? "." : opts.out_dir;

  run_with_manifest(manifest, [&] {
    const cryolink::BraidDecomposition decomposition = cryolink::braid_decomposition(
        cryolink::load_resistance_points(total_path), cryolink::load_resistance_points(bulk_path),
        noise_rel_tol);

    ensure_directory(manifest.out_dir);
    const std::string contact_name = "braid_contact." + opts.format;
    if (opts.format == "csv") {
      std::string text = "T_K,R_K_per_W\n";
      for (const cryolink::ResistancePoint& point : decomposition.contact_points) {
        text += fmt(point.temperature_k) + "," + fmt(point.resistance_k_per_w) + "\n";
      }
      write_text_file(manifest.out_dir / contact_name, text);
    } else {
      std::vector<std::string> records;
      for (const cryolink::ResistancePoint& point : decomposition.contact_points) {
        records.push_back("  {\"T_K\": " + fmt(point.temperature_k) +
                          ", \"R_K_per_W\": " + fmt(point.resistance_k_per_w) + "}");
      }
      write_text_file(manifest.out_dir / contact_name, join_json_array(records));
    }
    manifest.output_files.push_back(contact_name);

    write_fit_outputs(manifest, "fit_braid.json", decomposition.contact_fit);
    std::cout << "contact points kept: " << decomposition.contact_points.size() << "\n";
    print_fit_summary("braid (contact part)", decomposition.contact_fit);
  });
}

void cmd_fit_mli(const CommonOptions& opts, const std::string& data_path,
                 const std::string& grid_spec) {
  const std::map<std::string, double> overrides = parse_setting_overrides(opts.settings_kv);
  const std::vector<double> grid = parse_range_spec(grid_spec, "--grid");
  RunManifest manifest;
  manifest.command = "fit mli";
  manifest.config_paths = {opts.config_path, data_path};
  manifest.settings_overrides = overrides;
  manifest.out_dir = opts.out_dir.empty() ? "." : opts.out_dir;

  run_with_manifest(manifest, [&] {
    const cryolink::ConfigDocument config = load_config(opts.config_path);
    const cryolink::SolverSettings settings = resolve_settings(&config, overrides);
    const cryolink::LinkAssembly assembly = cryolink::assembly_from_config(config);
    const std::vector<cryolink::ProfilePoint> measured = cryolink::load_profile_points(data_path);
    const cryolink::FitResult fit = cryolink::fit_mli_lambda(measured, assembly, grid, settings);
    write_fit_outputs(manifest, "fit_mli.json", fit);
    print_fit_summary("mli", fit);
  });
}

}  // namespace

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);

  CLI::App app{"steady-state thermal solves, feasibility sweeps, and measurement fits for "
               "modular cryogenic links"};
  app.set_version_flag("--version", CRYOLINK_TOOL_VERSION);
  app.require_subcommand(1);

  CommonOptions common;

  CLI::App* validate = app.add_subcommand("validate", "check a configuration document");
  add_common_options(validate, common, /*config_required=*/true);

  CLI::App* solve =
      app.add_subcommand("solve", "solve the steady state and export per-stage profiles");
  add_common_options(solve, common, /*config_required=*/true);

  CLI::App* sweep = app.add_subcommand("sweep", "solve standard assemblies over a range of lengths");
  add_common_options(sweep, common, /*config_required=*/false);
  std::string lengths_spec;
  std::optional<double> sweep_cu_spacing;
  sweep->add_option("--lengths", lengths_spec, "lengths in metres, a:b:step or a single value")
      ->required();
  sweep->add_option("--cu-spacing", sweep_cu_spacing, "cooling-unit spacing in metres");

  CLI::App* feasible =
      app.add_subcommand("feasible-length", "largest operable length inside a bracket");
  add_common_options(feasible, common, /*config_required=*/false);
  double bracket_lo_m = 0.0;
  double bracket_hi_m = 0.0;
  double bracket_tolerance_m = 0.5;
  std::optional<double> feasible_cu_spacing;
  feasible->add_option("--lo", bracket_lo_m, "bracket low end, metres (must be feasible)")
      ->required();
  feasible->add_option("--hi", bracket_hi_m, "bracket high end, metres (must be infeasible)")
      ->required();
  feasible->add_option("--cu-spacing", feasible_cu_spacing, "cooling-unit spacing in metres");
  feasible->add_option("--tolerance", bracket_tolerance_m, "bisection resolution, metres")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  CLI::App* fit = app.add_subcommand("fit", "measurement-reduction fits");
  fit->require_subcommand(1);

  CLI::App* fit_rrr = fit->add_subcommand("rrr", "copper purity from a heater sweep");
  add_common_options(fit_rrr, common, /*config_required=*/false);
  std::string rrr_data_path;
  std::string rrr_meta_path;
  double rrr_noise_floor_k = 1e-3;
  fit_rrr->add_option("--data", rrr_data_path, "heater-sweep CSV")->required();
  fit_rrr->add_option("--meta", rrr_meta_path, "JSON sidecar with strip geometry")->required();
  fit_rrr->add_option("--noise-floor", rrr_noise_floor_k, "smallest usable sensor-pair dT, kelvin")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  CLI::App* fit_powerlaw = fit->add_subcommand("powerlaw", "least-squares fit of y = a * x^b");
  add_common_options(fit_powerlaw, common, /*config_required=*/false);
  std::string powerlaw_data_path;
  fit_powerlaw->add_option("--data", powerlaw_data_path, "x,y CSV")->required();

  CLI::App* fit_braid =
      fit->add_subcommand("braid", "split braid resistance into bulk and contact parts");
  add_common_options(fit_braid, common, /*config_required=*/false);
  std::string braid_total_path;
  std::string braid_bulk_path;
  double braid_noise_rel_tol = 0.05;
  fit_braid->add_option("--total", braid_total_path, "total-resistance CSV (T_K,R_K_per_W)")
      ->required();
  fit_braid->add_option("--bulk", braid_bulk_path, "bulk-resistance CSV (T_K,R_K_per_W)")
      ->required();
  fit_braid
      ->add_option("--noise-rel-tol", braid_noise_rel_tol,
                   "relative tolerance for dropping noise-level contact points")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  CLI::App* fit_mli =
      fit->add_subcommand("mli", "effective radiative attenuation from a measured profile");
  add_common_options(fit_mli, common, /*config_required=*/true);
  std::string mli_data_path;
  std::string mli_grid_spec;
  fit_mli->add_option("--data", mli_data_path, "measured profile CSV (x_m,T_K)")->required();
  fit_mli->add_option("--grid", mli_grid_spec, "candidate attenuations, a:b:step")->required();

  CLI::App* loss = app.add_subcommand("loss", "microwave channel attenuation for a link length");
  double loss_length_m = 0.0;
  double loss_alpha_db_per_km = 1.0;
  loss->add_option("--length", loss_length_m, "link length, metres")->required();
  loss->add_option("--alpha", loss_alpha_db_per_km, "cable attenuation, dB/km")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (validate->parsed()) {
      cmd_validate(common);
    } else if (solve->parsed()) {
      cmd_solve(common);
    } else if (sweep->parsed()) {
      cmd_sweep(common, lengths_spec, sweep_cu_spacing);
    } else if (feasible->parsed()) {
      cmd_feasible_length(common, bracket_lo_m, bracket_hi_m, feasible_cu_spacing,
                          bracket_tolerance_m);
    } else if (fit_rrr->parsed()) {
      cmd_fit_rrr(common, rrr_data_path, rrr_meta_path, rrr_noise_floor_k);
    } else if (fit_powerlaw->parsed()) {
      cmd_fit_powerlaw(common, powerlaw_data_path);
    } else if (fit_braid->parsed()) {
      cmd_fit_braid(common, braid_total_path, braid_bulk_path, braid_noise_rel_tol);
    } else if (fit_mli->parsed()) {
      cmd_fit_mli(common, mli_data_path, mli_grid_spec);
    } else if (loss->parsed()) {
      cmd_loss(loss_length_m, loss_alpha_db_per_km);
    }
    return 0;
  } catch (const usage_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cryolink::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const cryolink::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const cryolink::infeasible_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const cryolink::convergence_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
