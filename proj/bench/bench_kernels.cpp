// Serial reference vs OpenMP kernel, pairwise per kernel.
// Run: ./build/bench/bench_kernels [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include <filesystem>

#include "rcd/calibration.hpp"
#include "rcd/experiments.hpp"
#include "rcd/geo.hpp"
#include "rcd/random.hpp"
#include "rcd/similarity.hpp"
#include "rcd/stats.hpp"
#include "rcd/synthetic.hpp"

using namespace rcd;

namespace {

const RegimeLibrary& library() {
  static const auto lib = generate_synthetic_library(default_profiles(), 100, 7);
  return lib;
}

template <bool Parallel>
void BM_LibraryScan(benchmark::State& state) {
  const auto& lib = library();
  const auto scale = FeatureScale::from_library(lib);
  const auto w = SimilarityWeights::preset("full");
  const auto& q = lib.records.front();
  const auto qc = QueryContext::from_block(q);
  for (auto _ : state) {
    auto r = Parallel ? score_library(qc, lib, w, scale, {q.block_id})
                      : score_library_serial(qc, lib, w, scale, {q.block_id});
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(lib.records.size()));
}

template <bool Parallel>
void BM_Consistency(benchmark::State& state) {
  const auto& lib = library();
  const auto w = SimilarityWeights::preset("full");
  const auto& q = lib.records.front();
  for (auto _ : state) {
    auto r = Parallel ? consistency_check(lib, q, w) : consistency_check_serial(lib, q, w);
    benchmark::DoNotOptimize(r);
  }
}

template <bool Parallel>
void BM_Bootstrap(benchmark::State& state) {
  Rng rng(3);
  HierarchicalSample sample;
  for (int s = 0; s < 8; ++s)
    for (int k = 0; k < 5; ++k) sample["s" + std::to_string(s)].push_back(rng.uniform(0.1, 0.4));
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto ci = Parallel ? bootstrap_ci(sample, n) : bootstrap_ci_serial(sample, n);
    benchmark::DoNotOptimize(ci);
  }
}

template <bool Parallel>
void BM_TravelMatrix(benchmark::State& state) {
  const HexGrid grid(8);
  const auto zones = grid.cover(kManhattanBox);
  RouterConfig cfg;
  int i = 0;
  for (auto _ : state) {
    // Perturb the speed so the parallel kernel's matrix cache never hits.
    cfg.speed_kmh = 30.0 + 1e-9 * ++i;
    const Router router(cfg);
    auto m = Parallel ? zone_travel_matrix(zones, grid, router)
                      : zone_travel_matrix_serial(zones, grid, router);
    benchmark::DoNotOptimize(m);
  }
  state.counters["zones"] = static_cast<double>(zones.size());
}

template <bool Parallel>
void BM_ExperimentGrid(benchmark::State& state) {
  auto spec = suite_spec();
  spec.policies = {Policy::replay_batch, Policy::cal_lp};
  spec.write_traces = false;
  spec.stats.bootstrap_resamples = 200;
  const auto out = std::filesystem::temp_directory_path() /
                   (Parallel ? "rcd_bench_grid_par" : "rcd_bench_grid_ser");
  for (auto _ : state) {
    std::filesystem::remove_all(out);
    auto r = run_experiment(spec, out, Parallel);
    benchmark::DoNotOptimize(r);
  }
  std::filesystem::remove_all(out);
}

}  // namespace

BENCHMARK(BM_LibraryScan<false>)->Name("library_scan/serial")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LibraryScan<true>)->Name("library_scan/omp")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Consistency<false>)->Name("consistency/serial")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Consistency<true>)->Name("consistency/omp")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Bootstrap<false>)->Name("bootstrap/serial")->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Bootstrap<true>)->Name("bootstrap/omp")->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TravelMatrix<false>)->Name("travel_matrix/serial")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TravelMatrix<true>)->Name("travel_matrix/omp")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ExperimentGrid<false>)->Name("experiment_grid/serial")->Iterations(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExperimentGrid<true>)->Name("experiment_grid/omp")->Iterations(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
