#include <benchmark/benchmark.h>

#include <functional>
#include <optional>

#include "cryolink/geometry.hpp"
#include "cryolink/materials.hpp"
#include "cryolink/solver.hpp"

namespace {

using namespace cryolink;

void BM_ConductivityEval(benchmark::State& state) {
  const ConductivityModel copper = ConductivityModel::nist_rrr_copper(150.0);
  double t = 4.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(copper.conductivity(t));
    t = t < 290.0 ? t + 1.0 : 4.0;
  }
}
BENCHMARK(BM_ConductivityEval);

void BM_ConductivityIntegral(benchmark::State& state) {
  const ConductivityModel copper = ConductivityModel::nist_rrr_copper(150.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(copper.integral(4.0, 290.0));
  }
}
BENCHMARK(BM_ConductivityIntegral);

void BM_ContactJump(benchmark::State& state) {
  const ResistanceCurve contact = ResistanceCurve::power_law(10.0, 1.0, -1.7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(contact_jump(contact, 0.05, 1.0));
  }
}
BENCHMARK(BM_ContactJump);

void BM_BuildStandardAssembly(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(standard_assembly(30.0, 10.0));
  }
}
BENCHMARK(BM_BuildStandardAssembly);

void BM_SolveOuterStage30m(benchmark::State& state) {
  const LinkAssembly assembly = standard_assembly(30.0, 15.0);
  const std::function<double(double)> can = [&](double) {
    return assembly.vacuum_can.temperature_k;
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_stage(assembly, kNumStages, can));
  }
}
BENCHMARK(BM_SolveOuterStage30m)->Unit(benchmark::kMillisecond);

void BM_SolveAssembly5m(benchmark::State& state) {
  const LinkAssembly assembly = standard_assembly(5.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_assembly(assembly));
  }
}
BENCHMARK(BM_SolveAssembly5m)->Unit(benchmark::kMillisecond);

void BM_SolveAssembly30mCooled(benchmark::State& state) {
  const LinkAssembly assembly = standard_assembly(30.0, 15.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_assembly(assembly));
  }
}
BENCHMARK(BM_SolveAssembly30mCooled)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
