#include "cryolink/feasibility.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cryolink/errors.hpp"

namespace cryolink {

namespace {

// Tracks the hottest offender so reports can point at a position.
struct Worst {
  double value = -std::numeric_limits<double>::infinity();
  double position = 0.0;
  void offer(double v, double x) {
    if (v > value) {
      value = v;
      position = x;
    }
  }
};

CriterionResult make_result(std::string name, double threshold, bool inclusive,
                            const Worst& worst) {
  CriterionResult result;
  result.name = std::move(name);
  result.threshold_k = threshold;
  result.inclusive = inclusive;
  result.observed_extreme_k = worst.value;
  result.location_m = worst.position;
  result.pass = inclusive ? worst.value <= threshold : worst.value < threshold;
  return result;
}

LengthResult solve_length(double length_m, std::optional<double> cu_spacing_m,
                          const StandardOptions& options, const SolverSettings& settings) {
  LengthResult result;
  result.length_m = length_m;
  try {
    const LinkAssembly assembly = standard_assembly(length_m, cu_spacing_m, options);
    AssemblySolution solution = solve_assembly(assembly, settings);
    result.criteria = check_criteria(solution);
    for (int stage = 1; stage <= kNumStages; ++stage) {
      const StageProfile& profile = solution.stage(stage);
      result.extremes[static_cast<std::size_t>(stage - 1)] = {profile.min_temperature_k(),
                                                              profile.max_temperature_k()};
    }
    result.solution = std::move(solution);
  } catch (const infeasible_error& e) {
    result.error = e.what();
  } catch (const convergence_error& e) {
    result.error = e.what();
  }
  return result;
}

}  // namespace

CriteriaReport check_criteria(const AssemblySolution& solution) {
  Worst four_kelvin;
  for (const SinkRecord& sink : solution.stage(3).sinks) {
    if (sink.source != ModuleKind::node) continue;  // condensation happens at the nodes
    four_kelvin.offer(sink.plate_temperature_k, sink.position_m);
  }
  Worst still;
  for (const SinkRecord& sink : solution.stage(2).sinks) {
    if (sink.source != ModuleKind::node) continue;
    still.offer(sink.plate_temperature_k, sink.position_m);
  }
  Worst base;
  for (const ProfileSample& sample : solution.stage(1).samples) {
    base.offer(sample.temperature_k, sample.position_m);
  }

  CriteriaReport report;
  report.criteria[0] =
      make_result("node-4k-plate", kFourKelvinPlateLimitK, /*inclusive=*/true, four_kelvin);
  report.criteria[1] = make_result("still-plate", kStillPlateLimitK, /*inclusive=*/false, still);
  report.criteria[2] = make_result("base-profile", kBaseProfileLimitK, /*inclusive=*/false, base);
  return report;
}

LengthSweepResult sweep_lengths(const std::vector<double>& lengths_m,
                                std::optional<double> cu_spacing_m,
                                const StandardOptions& options, const SolverSettings& settings,
                                int jobs) {
  if (jobs < 1) throw validation_error("jobs must be at least 1");
  for (std::size_t i = 1; i < lengths_m.size(); ++i) {
    if (!(lengths_m[i] > lengths_m[i - 1])) {
      throw validation_error("sweep lengths must be strictly increasing");
    }
  }

  LengthSweepResult sweep;
  sweep.entries.resize(lengths_m.size());
  if (lengths_m.empty()) return sweep;

  const int workers = std::min<int>(jobs, static_cast<int>(lengths_m.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < lengths_m.size(); ++i) {
      sweep.entries[i] = solve_length(lengths_m[i], cu_spacing_m, options, settings);
    }
  } else {
    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
      while (true) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= lengths_m.size()) break;
        sweep.entries[i] = solve_length(lengths_m[i], cu_spacing_m, options, settings);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  for (const LengthResult& entry : sweep.entries) {
    if (entry.feasible()) continue;
    sweep.first_violation =
        FirstViolation{entry.length_m, entry.solved() ? entry.criteria.first_failure()
                                                      : std::string("error")};
    break;
  }
  return sweep;
}

double max_feasible_length(double lo_m, double hi_m, std::optional<double> cu_spacing_m,
                           const StandardOptions& options, const SolverSettings& settings,
                           double tolerance_m) {
  if (!(lo_m > 0.0) || !(hi_m > lo_m)) {
    throw validation_error("length bracket must satisfy 0 < lo < hi");
  }
  if (!(tolerance_m > 0.0)) throw validation_error("length tolerance must be positive");

  auto feasible = [&](double length) {
    return solve_length(length, cu_spacing_m, options, settings).feasible();
  };
  if (!feasible(lo_m)) {
    std::ostringstream msg;
    msg << "bracket error: the lower end " << lo_m << " m is already infeasible";
    throw infeasible_error(msg.str());
  }
  if (feasible(hi_m)) {
    std::ostringstream msg;
    msg << "bracket error: the upper end " << hi_m
        << " m is still feasible; the maximum lies beyond the bracket";
    throw infeasible_error(msg.str());
  }

  double lo = lo_m;
  double hi = hi_m;
  while (hi - lo > tolerance_m) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double channel_loss_db(double length_m, double db_per_km) {
  if (!(length_m >= 0.0)) throw std::domain_error("length must be non-negative");
  if (!(db_per_km >= 0.0)) throw std::domain_error("attenuation must be non-negative");
  return length_m * db_per_km / 1000.0;
}

}  // namespace cryolink
