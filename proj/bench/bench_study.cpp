#include <benchmark/benchmark.h>

#include "wlecv/sim.hpp"

namespace {

wlecv::StudyConfig config(std::size_t reps) {
  wlecv::StudyConfig cfg = wlecv::preset_table1(42);
  cfg.replications = reps;
  return cfg;
}

void BM_StudySerial(benchmark::State& state) {
  const auto cfg = config(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(wlecv::run_study_serial(cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 6);
}

void BM_StudyParallel(benchmark::State& state) {
  const auto cfg = config(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(wlecv::run_study(cfg, 0));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 6);
}

void BM_PoissonStudyParallel(benchmark::State& state) {
  auto cfg = wlecv::preset_table3(42);
  cfg.replications = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(wlecv::run_study(cfg, 0));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 6);
}

}  // namespace

BENCHMARK(BM_StudySerial)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StudyParallel)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PoissonStudyParallel)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
