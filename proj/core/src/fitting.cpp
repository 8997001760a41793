#include "cryolink/fitting.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cryolink/errors.hpp"
#include "cryolink/loads.hpp"

namespace cryolink {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

double sse_of(const std::vector<double>& residuals) {
  double sse = 0.0;
  for (double r : residuals) sse += r * r;
  return sse;
}

// ---------------------------------------------------------------------------
// CSV / sidecar helpers.

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw io_error("error while reading '" + path + "'");
  return buffer.str();
}

std::string trim(const std::string& s) {
  std::size_t lo = 0;
  std::size_t hi = s.size();
  while (lo < hi && std::isspace(static_cast<unsigned char>(s[lo]))) ++lo;
  while (hi > lo && std::isspace(static_cast<unsigned char>(s[hi - 1]))) --hi;
  return s.substr(lo, hi - lo);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

// Rows of a CSV file as trimmed fields, with 1-based line numbers.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::pair<int, std::vector<std::string>>> rows;
};

CsvTable read_csv(const std::string& path) {
  const std::string text = read_file(path);
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (table.header.empty()) {
      table.header = split_csv_line(line);
    } else {
      table.rows.emplace_back(line_number, split_csv_line(line));
    }
  }
  if (table.header.empty()) throw validation_error("'" + path + "' has no header row");
  if (table.rows.empty()) throw validation_error("'" + path + "' has no data rows");
  return table;
}

double parse_number(const std::string& path, int line, const std::string& token) {
  const std::string t = trim(token);
  if (t.empty()) {
    std::ostringstream msg;
    msg << path << ":" << line << ": empty numeric field";
    throw validation_error(msg.str());
  }
  char* end = nullptr;
  const double value = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << path << ":" << line << ": not a finite number: '" << t << "'";
    throw validation_error(msg.str());
  }
  return value;
}

void expect_header(const std::string& path, const CsvTable& table,
                   const std::vector<std::string>& expected) {
  if (table.header != expected) {
    std::string want;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i > 0) want += ",";
      want += expected[i];
    }
    throw validation_error("'" + path + "': expected header '" + want + "'");
  }
}

// Unit-suffixed quantity objects, matching the config file convention:
// {"mm2": 64.0} etc.  Each family maps unit key -> scale to SI.
double read_sidecar_quantity(const std::string& path, const json& doc, const std::string& field,
                             const std::vector<std::pair<std::string, double>>& family,
                             const json*& found_value) {
  const auto it = doc.find(field);
  if (it == doc.end()) throw validation_error("'" + path + "': missing field '" + field + "'");
  if (!it->is_object() || it->size() != 1) {
    throw validation_error("'" + path + "': field '" + field +
                           "' must be an object with exactly one unit key");
  }
  const auto entry = it->begin();
  const std::string& unit = entry.key();
  for (const auto& [name, scale] : family) {
    if (unit == name) {
      found_value = &entry.value();
      return scale;
    }
  }
  throw validation_error("'" + path + "': field '" + field + "' has unsupported unit '" + unit +
                         "'");
}

double read_sidecar_scalar(const std::string& path, const json& doc, const std::string& field,
                           const std::vector<std::pair<std::string, double>>& family) {
  const json* value = nullptr;
  const double scale = read_sidecar_quantity(path, doc, field, family, value);
  if (!value->is_number()) {
    throw validation_error("'" + path + "': field '" + field + "' must hold a number");
  }
  return value->get<double>() * scale;
}

const std::vector<std::pair<std::string, double>> kLengthUnits = {
    {"m", 1.0}, {"cm", 1e-2}, {"mm", 1e-3}};
const std::vector<std::pair<std::string, double>> kAreaUnits = {
    {"m2", 1.0}, {"cm2", 1e-4}, {"mm2", 1e-6}};
const std::vector<std::pair<std::string, double>> kPowerUnits = {
    {"W", 1.0}, {"mW", 1e-3}, {"uW", 1e-6}, {"nW", 1e-9}};

// ---------------------------------------------------------------------------
// Interpolation helper for resistance series.

double loglog_interpolate(const std::vector<ResistancePoint>& points, double temperature_k) {
  const auto upper = std::upper_bound(
      points.begin(), points.end(), temperature_k,
      [](double t, const ResistancePoint& p) { return t < p.temperature_k; });
  if (upper == points.begin()) return points.front().resistance_k_per_w;
  if (upper == points.end()) return points.back().resistance_k_per_w;
  const auto lower = std::prev(upper);
  const double u = (std::log(temperature_k) - std::log(lower->temperature_k)) /
                   (std::log(upper->temperature_k) - std::log(lower->temperature_k));
  return std::exp(std::log(lower->resistance_k_per_w) +
                  u * (std::log(upper->resistance_k_per_w) - std::log(lower->resistance_k_per_w)));
}

std::vector<ResistancePoint> sorted_positive(const std::vector<ResistancePoint>& points,
                                             const char* label) {
  if (points.size() < 2) {
    throw validation_error(std::string(label) + " series needs at least 2 points");
  }
  std::vector<ResistancePoint> sorted = points;
  std::sort(sorted.begin(), sorted.end(), [](const ResistancePoint& a, const ResistancePoint& b) {
    return a.temperature_k < b.temperature_k;
  });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!(sorted[i].temperature_k > 0.0) || !(sorted[i].resistance_k_per_w > 0.0)) {
      throw validation_error(std::string(label) + " series must be positive everywhere");
    }
    if (i > 0 && !(sorted[i].temperature_k > sorted[i - 1].temperature_k)) {
      throw validation_error(std::string(label) + " series has duplicate temperatures");
    }
  }
  return sorted;
}

}  // namespace

std::string serialize_fit_result(const FitResult& result) {
  ordered_json doc;
  ordered_json params = ordered_json::object();
  for (const auto& [name, parameter] : result.parameters) {
    params[name] = {{"value", parameter.value}, {"unit", parameter.unit}};
  }
  doc["parameters"] = params;
  doc["residual"] = result.residual;
  doc["dof"] = result.dof;
  doc["point_residuals"] = result.point_residuals;
  return doc.dump(2) + "\n";
}

FitResult fit_power_law(const std::vector<XYPoint>& points) {
  if (points.size() < 3) throw validation_error("power-law fit needs at least 3 points");
  for (const XYPoint& p : points) {
    if (!(p.x > 0.0) || !(p.y > 0.0)) {
      throw validation_error("power-law fit requires positive coordinates");
    }
  }
  double mean_lx = 0.0;
  double mean_ly = 0.0;
  for (const XYPoint& p : points) {
    mean_lx += std::log(p.x);
    mean_ly += std::log(p.y);
  }
  const double n = static_cast<double>(points.size());
  mean_lx /= n;
  mean_ly /= n;
  double var = 0.0;
  double cov = 0.0;
  for (const XYPoint& p : points) {
    const double dx = std::log(p.x) - mean_lx;
    var += dx * dx;
    cov += dx * (std::log(p.y) - mean_ly);
  }
  if (var <= 0.0) throw validation_error("power-law fit is degenerate: all x values are equal");
  double b = cov / var;
  double a = std::exp(mean_ly - b * mean_lx);

  auto residuals_of = [&](double pa, double pb) {
    std::vector<double> out;
    out.reserve(points.size());
    for (const XYPoint& p : points) out.push_back(p.y - pa * std::pow(p.x, pb));
    return out;
  };

  // One Gauss-Newton pass against the linear-space error, kept only when it
  // actually improves on the log-log estimate.
  std::vector<double> residuals = residuals_of(a, b);
  {
    double jaa = 0.0, jab = 0.0, jbb = 0.0, ra = 0.0, rb = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double model = a * std::pow(points[i].x, b);
      const double da = model / a;                  // d model / d a = x^b
      const double db = model * std::log(points[i].x);  // d model / d b
      jaa += da * da;
      jab += da * db;
      jbb += db * db;
      ra += da * residuals[i];
      rb += db * residuals[i];
    }
    const double det = jaa * jbb - jab * jab;
    if (std::abs(det) > 1e-300) {
      const double step_a = (jbb * ra - jab * rb) / det;
      const double step_b = (jaa * rb - jab * ra) / det;
      const double a2 = a + step_a;
      const double b2 = b + step_b;
      if (a2 > 0.0 && std::isfinite(a2) && std::isfinite(b2)) {
        const std::vector<double> refined = residuals_of(a2, b2);
        if (sse_of(refined) < sse_of(residuals)) {
          a = a2;
          b = b2;
          residuals = refined;
        }
      }
    }
  }

  FitResult result;
  result.parameters["a"] = {a, ""};
  result.parameters["b"] = {b, "1"};
  result.point_residuals = residuals;
  result.residual = sse_of(residuals);
  result.dof = static_cast<int>(points.size()) - 2;
  return result;
}

std::vector<ConductivityPoint> shield_conductivity_points(const HeaterSweep& sweep,
                                                          double noise_floor_k,
                                                          std::vector<std::string>* warnings) {
  if (sweep.sensor_positions_m.size() < 2) {
    throw validation_error("heater sweep needs at least 2 sensor stations");
  }
  for (std::size_t i = 1; i < sweep.sensor_positions_m.size(); ++i) {
    if (!(sweep.sensor_positions_m[i] > sweep.sensor_positions_m[i - 1])) {
      throw validation_error("sensor positions must be strictly increasing");
    }
  }
  if (!(sweep.cross_section_m2 > 0.0)) throw validation_error("cross section must be positive");
  if (!(noise_floor_k > 0.0)) throw validation_error("noise floor must be positive");
  if (sweep.heater_powers_w.size() != sweep.temperatures_k.size() ||
      sweep.heater_powers_w.empty()) {
    throw validation_error("heater sweep rows are inconsistent");
  }

  std::vector<ConductivityPoint> points;
  for (std::size_t row = 0; row < sweep.heater_powers_w.size(); ++row) {
    const double q = sweep.heater_powers_w[row] + sweep.background_power_w;
    const std::vector<double>& temps = sweep.temperatures_k[row];
    if (temps.size() != sweep.sensor_positions_m.size()) {
      throw validation_error("heater sweep row width does not match the sensor count");
    }
    for (std::size_t i = 0; i + 1 < temps.size(); ++i) {
      const double dt = std::abs(temps[i] - temps[i + 1]);
      const double t_mid = 0.5 * (temps[i] + temps[i + 1]);
      if (dt < noise_floor_k) {
        std::ostringstream msg;
        msg << "row " << row + 1 << ", sensor pair " << i + 1 << ": temperature difference " << dt
            << " K is below the " << noise_floor_k << " K noise floor";
        throw validation_error(msg.str());
      }
      if (warnings != nullptr && dt / t_mid >= 0.2) {
        std::ostringstream msg;
        msg << "row " << row + 1 << ", sensor pair " << i + 1 << ": dT/T = " << dt / t_mid
            << " exceeds 0.2; the midpoint reduction degrades beyond that";
        warnings->push_back(msg.str());
      }
      const double dx = sweep.sensor_positions_m[i + 1] - sweep.sensor_positions_m[i];
      points.push_back({t_mid, dx * q / (sweep.cross_section_m2 * dt)});
    }
  }
  return points;
}

FitResult fit_rrr(const std::vector<ConductivityPoint>& points) {
  if (points.size() < 3) throw validation_error("RRR fit needs at least 3 conductivity points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double t = points[i].temperature_k;
    if (t < kTemperatureDomainMinK || t > kTemperatureDomainMaxK) {
      std::ostringstream msg;
      msg << "point " << i + 1 << " at " << t << " K is outside the conductivity model domain";
      throw std::domain_error(msg.str());
    }
    if (!(points[i].conductivity_w_per_k_m > 0.0)) {
      throw validation_error("conductivity points must be positive");
    }
  }

  auto sse = [&](double rrr) {
    const ConductivityModel model = ConductivityModel::nist_rrr_copper(rrr);
    double total = 0.0;
    for (const ConductivityPoint& p : points) {
      const double r = model.conductivity(p.temperature_k) - p.conductivity_w_per_k_m;
      total += r * r;
    }
    return total;
  };

  // Geometric scan, then golden-section refinement inside the best cell.
  constexpr double kLo = 10.0;
  constexpr double kHi = 2000.0;
  constexpr int kScan = 64;
  double best_rrr = kLo;
  double best_sse = sse(kLo);
  std::vector<double> grid(kScan);
  for (int j = 0; j < kScan; ++j) {
    grid[static_cast<std::size_t>(j)] =
        kLo * std::pow(kHi / kLo, static_cast<double>(j) / (kScan - 1));
  }
  int best_j = 0;
  for (int j = 1; j < kScan; ++j) {
    const double value = sse(grid[static_cast<std::size_t>(j)]);
    if (value < best_sse) {
      best_sse = value;
      best_j = j;
    }
  }
  double lo = grid[static_cast<std::size_t>(std::max(best_j - 1, 0))];
  double hi = grid[static_cast<std::size_t>(std::min(best_j + 1, kScan - 1))];
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - golden * (hi - lo);
  double x2 = lo + golden * (hi - lo);
  double f1 = sse(x1);
  double f2 = sse(x2);
  for (int it = 0; it < 100 && hi - lo > 1e-6 * hi; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - golden * (hi - lo);
      f1 = sse(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + golden * (hi - lo);
      f2 = sse(x2);
    }
  }
  best_rrr = 0.5 * (lo + hi);
  best_sse = sse(best_rrr);

  FitResult result;
  result.parameters["rrr"] = {best_rrr, "1"};
  result.residual = best_sse;
  result.dof = static_cast<int>(points.size()) - 1;
  const ConductivityModel model = ConductivityModel::nist_rrr_copper(best_rrr);
  result.point_residuals.reserve(points.size());
  for (const ConductivityPoint& p : points) {
    result.point_residuals.push_back(p.conductivity_w_per_k_m -
                                     model.conductivity(p.temperature_k));
  }
  return result;
}

BraidDecomposition braid_decomposition(const std::vector<ResistancePoint>& total,
                                       const std::vector<ResistancePoint>& bulk,
                                       double noise_rel_tol) {
  if (!(noise_rel_tol >= 0.0)) throw validation_error("noise tolerance must be non-negative");
  const std::vector<ResistancePoint> total_sorted = sorted_positive(total, "total resistance");
  const std::vector<ResistancePoint> bulk_sorted = sorted_positive(bulk, "bulk resistance");

  const double overlap_lo =
      std::max(total_sorted.front().temperature_k, bulk_sorted.front().temperature_k);
  const double overlap_hi =
      std::min(total_sorted.back().temperature_k, bulk_sorted.back().temperature_k);
  if (!(overlap_hi > overlap_lo)) {
    throw validation_error("total and bulk series have no overlapping temperature support");
  }

  BraidDecomposition decomposition;
  for (const ResistancePoint& p : total_sorted) {
    if (p.temperature_k < overlap_lo || p.temperature_k > overlap_hi) continue;
    const double bulk_here = loglog_interpolate(bulk_sorted, p.temperature_k);
    const double contact = p.resistance_k_per_w - bulk_here;
    if (contact <= 0.0) {
      if (std::abs(contact) <= noise_rel_tol * p.resistance_k_per_w) continue;  // noise: drop
      std::ostringstream msg;
      msg << "contact resistance is negative beyond the noise tolerance at "
          << p.temperature_k << " K (total " << p.resistance_k_per_w << ", bulk " << bulk_here
          << " K/W)";
      throw validation_error(msg.str());
    }
    decomposition.contact_points.push_back({p.temperature_k, contact});
  }

  std::vector<XYPoint> xy;
  xy.reserve(decomposition.contact_points.size());
  for (const ResistancePoint& p : decomposition.contact_points) {
    xy.push_back({p.temperature_k, p.resistance_k_per_w});
  }
  if (xy.size() < 3) {
    throw validation_error(
        "braid decomposition is degenerate: fewer than 3 usable contact points remain");
  }
  decomposition.contact_fit = fit_power_law(xy);
  return decomposition;
}

ConductivityModel post_conductivity_from_fit(double a, double b, double post_length_m,
                                             double post_cross_section_m2) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::domain_error("power-law coefficients must be positive");
  }
  if (!(post_length_m > 0.0) || !(post_cross_section_m2 > 0.0)) {
    throw std::domain_error("post geometry must be positive");
  }
  // P(T_hot) = (A/l) * integral of rho, so rho(T) = dP/dT * l/A = a b T^(b-1) l/A.
  const double coefficient = a * b * post_length_m / post_cross_section_m2;
  return ConductivityModel::power_law(0.0, coefficient, b - 1.0, kTemperatureDomainMinK,
                                      kTemperatureDomainMaxK);
}

FitResult fit_mli_lambda(const std::vector<ProfilePoint>& measured, const LinkAssembly& assembly,
                         const std::vector<double>& lambda_grid,
                         const SolverSettings& settings) {
  if (measured.empty()) throw validation_error("no measured temperatures given");
  if (lambda_grid.size() < 3) {
    throw validation_error("attenuation grid needs at least 3 candidates");
  }
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] > 0.0) || lambda_grid[i] > 1.0) {
      throw validation_error("attenuation candidates must lie in (0, 1]");
    }
    if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1])) {
      throw validation_error("attenuation grid must be strictly increasing");
    }
  }
  const double length = assembly.total_length_m();
  for (const ProfilePoint& p : measured) {
    if (p.position_m < -1e-9 || p.position_m > length + 1e-9) {
      throw validation_error("measured position lies outside the assembly");
    }
  }

  const double can_temperature = assembly.vacuum_can.temperature_k;
  const auto hot = [can_temperature](double) { return can_temperature; };
  auto evaluate = [&](double lambda) {
    LinkAssembly candidate = assembly;
    candidate.stages[kNumStages - 1].mli_attenuation_override = lambda;
    const StageProfile profile = solve_stage(candidate, kNumStages, hot, settings);
    std::vector<double> residuals;
    residuals.reserve(measured.size());
    for (const ProfilePoint& p : measured) {
      residuals.push_back(p.temperature_k - profile.temperature_at(p.position_m));
    }
    return residuals;
  };

  std::vector<double> scores(lambda_grid.size());
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    scores[i] = sse_of(evaluate(lambda_grid[i]));
  }
  const std::size_t best =
      static_cast<std::size_t>(std::min_element(scores.begin(), scores.end()) - scores.begin());
  if (best == 0 || best + 1 == lambda_grid.size()) {
    throw convergence_error(
        "attenuation minimum sits on the grid boundary; extend the grid to bracket it");
  }

  // Parabolic refinement through the bracketing triple.
  double lambda_best = lambda_grid[best];
  std::vector<double> residuals_best = evaluate(lambda_best);
  double sse_best = sse_of(residuals_best);
  {
    const double x0 = lambda_grid[best - 1], x1 = lambda_grid[best], x2 = lambda_grid[best + 1];
    const double s0 = scores[best - 1], s1 = scores[best], s2 = scores[best + 1];
    const double num = (x1 - x0) * (x1 - x0) * (s1 - s2) - (x1 - x2) * (x1 - x2) * (s1 - s0);
    const double den = (x1 - x0) * (s1 - s2) - (x1 - x2) * (s1 - s0);
    if (std::abs(den) > 1e-300) {
      double vertex = x1 - 0.5 * num / den;
      vertex = std::clamp(vertex, x0 + 1e-12, x2 - 1e-12);
      if (std::abs(vertex - x1) > 1e-12) {
        const std::vector<double> refined = evaluate(vertex);
        const double sse_refined = sse_of(refined);
        if (sse_refined < sse_best) {
          lambda_best = vertex;
          residuals_best = refined;
          sse_best = sse_refined;
        }
      }
    }
  }

  FitResult result;
  result.parameters["lambda"] = {lambda_best, "1"};
  result.residual = sse_best;
  result.dof = static_cast<int>(measured.size()) - 1;
  result.point_residuals = residuals_best;
  return result;
}

double strip_radiative_loss_w(double surface_area_m2, double emissivity,
                              double strip_temperature_k, double surroundings_temperature_k) {
  if (!(surface_area_m2 >= 0.0)) throw std::domain_error("surface area must be non-negative");
  if (!(emissivity > 0.0) || emissivity > 1.0) {
    throw std::domain_error("emissivity must lie in (0, 1]");
  }
  if (!(strip_temperature_k >= 0.0) || !(surroundings_temperature_k >= 0.0)) {
    throw std::domain_error("temperatures must be non-negative");
  }
  return kStefanBoltzmann * emissivity * surface_area_m2 *
         (std::pow(strip_temperature_k, 4) - std::pow(surroundings_temperature_k, 4));
}

HeaterSweep load_heater_sweep(const std::string& csv_path, const std::string& sidecar_path) {
  const CsvTable table = read_csv(csv_path);
  if (table.header.empty() || table.header.front() != "Q_W") {
    throw validation_error("'" + csv_path + "': first column must be Q_W");
  }
  const std::size_t sensors = table.header.size() - 1;
  if (sensors < 2) {
    throw validation_error("'" + csv_path + "': need at least two T_<sensor>_K columns");
  }
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    const std::string& name = table.header[c];
    if (name.size() < 4 || name.rfind("T_", 0) != 0 ||
        name.compare(name.size() - 2, 2, "_K") != 0) {
      throw validation_error("'" + csv_path + "': column '" + name +
                             "' does not match T_<sensor>_K");
    }
  }

  json sidecar;
  try {
    sidecar = json::parse(read_file(sidecar_path));
  } catch (const json::parse_error& e) {
    throw validation_error("'" + sidecar_path + "': " + e.what());
  }
  if (!sidecar.is_object()) {
    throw validation_error("'" + sidecar_path + "': sidecar must be a JSON object");
  }
  const std::string kind = sidecar.value("kind", "");
  if (kind != "heater_sweep" && kind != "dipstick") {
    throw validation_error("'" + sidecar_path +
                           "': kind must be 'heater_sweep' or 'dipstick'");
  }

  HeaterSweep sweep;
  sweep.cross_section_m2 = read_sidecar_scalar(sidecar_path, sidecar, "cross_section", kAreaUnits);
  if (sidecar.contains("background_power")) {
    sweep.background_power_w =
        read_sidecar_scalar(sidecar_path, sidecar, "background_power", kPowerUnits);
  }
  const bool has_spacing = sidecar.contains("sensor_spacing");
  const bool has_positions = sidecar.contains("sensor_positions");
  if (has_spacing == has_positions) {
    throw validation_error("'" + sidecar_path +
                           "': give exactly one of sensor_spacing or sensor_positions");
  }
  if (has_spacing) {
    const double spacing =
        read_sidecar_scalar(sidecar_path, sidecar, "sensor_spacing", kLengthUnits);
    for (std::size_t i = 0; i < sensors; ++i) {
      sweep.sensor_positions_m.push_back(spacing * static_cast<double>(i));
    }
  } else {
    const json* value = nullptr;
    const double scale =
        read_sidecar_quantity(sidecar_path, sidecar, "sensor_positions", kLengthUnits, value);
    if (!value->is_array()) {
      throw validation_error("'" + sidecar_path + "': sensor_positions must hold an array");
    }
    for (const json& entry : *value) {
      if (!entry.is_number()) {
        throw validation_error("'" + sidecar_path + "': sensor_positions must hold numbers");
      }
      sweep.sensor_positions_m.push_back(entry.get<double>() * scale);
    }
    if (sweep.sensor_positions_m.size() != sensors) {
      throw validation_error("'" + sidecar_path +
                             "': sensor_positions count does not match the CSV columns");
    }
  }

  for (const auto& [line, fields] : table.rows) {
    if (fields.size() != table.header.size()) {
      std::ostringstream msg;
      msg << csv_path << ":" << line << ": expected " << table.header.size() << " fields, got "
          << fields.size();
      throw validation_error(msg.str());
    }
    const double q = parse_number(csv_path, line, fields[0]);
    if (!(q >= 0.0)) {
      std::ostringstream msg;
      msg << csv_path << ":" << line << ": heater power must be non-negative";
      throw validation_error(msg.str());
    }
    if (!sweep.heater_powers_w.empty() && !(q > sweep.heater_powers_w.back())) {
      std::ostringstream msg;
      msg << csv_path << ":" << line << ": heater powers must be strictly increasing";
      throw validation_error(msg.str());
    }
    std::vector<double> temps;
    temps.reserve(sensors);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const double t = parse_number(csv_path, line, fields[c]);
      if (!(t > 0.0)) {
        std::ostringstream msg;
        msg << csv_path << ":" << line << ": temperatures must be positive";
        throw validation_error(msg.str());
      }
      temps.push_back(t);
    }
    sweep.heater_powers_w.push_back(q);
    sweep.temperatures_k.push_back(std::move(temps));
  }
  return sweep;
}

std::vector<XYPoint> load_xy_points(const std::string& csv_path) {
  const CsvTable table = read_csv(csv_path);
  expect_header(csv_path, table, {"x", "y"});
  std::vector<XYPoint> points;
  for (const auto& [line, fields] : table.rows) {
    if (fields.size() != 2) {
      std::ostringstream msg;
      msg << csv_path << ":" << line << ": expected 2 fields";
      throw validation_error(msg.str());
    }
    points.push_back({parse_number(csv_path, line, fields[0]),
                      parse_number(csv_path, line, fields[1])});
  }
  return points;
}

std::vector<ResistancePoint> load_resistance_points(const std::string& csv_path) {
  const CsvTable table = read_csv(csv_path);
  expect_header(csv_path, table, {"T_K", "R_K_per_W"});
  std::vector<ResistancePoint> points;
  for (const auto& [line, fields] : table.rows) {
    if (fields.size() != 2) {
      std::ostringstream msg;
      msg << csv_path << ":" << line << ": expected 2 fields";
      throw validation_error(msg.str());
    }
    points.push_back({parse_number(csv_path, line, fields[0]),
                      parse_number(csv_path, line, fields[1])});
  }
  return points;
}

std::vector<ProfilePoint> load_profile_points(const std::string& csv_path) {
  const CsvTable table = read_csv(csv_path);
  expect_header(csv_path, table, {"x_m", "T_K"});
  std::vector<ProfilePoint> points;
  for (const auto& [line, fields] : table.rows) {
    if (fields.size() != 2) {
      std::ostringstream msg;
      msg << csv_path << ":" << line << ": expected 2 fields";
      throw validation_error(msg.str());
    }
    points.push_back({parse_number(csv_path, line, fields[0]),
                      parse_number(csv_path, line, fields[1])});
  }
  return points;
}

}  // namespace cryolink
