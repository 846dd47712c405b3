// Serial reference against the OpenMP path for each data-parallel kernel.
// Run with --benchmark_filter to pick one kernel.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "gjalloc/cdga.hpp"
#include "gjalloc/feasibility.hpp"
#include "gjalloc/harness.hpp"
#include "gjalloc/kernels.hpp"

namespace {

using namespace gja;

Exec mode(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::parallel; }

GdcnTopology loaded_complete(int dcs, std::uint64_t seed) {
  std::vector<DataCenter> v;
  for (int i = 0; i < dcs; ++i) v.push_back(DataCenter::make(i, 15 + 3 * (i % 5)));
  auto t = GdcnTopology::complete(std::move(v));
  std::mt19937_64 rng(seed);
  std::vector<int> loads;
  for (const auto& dc : t.dcs()) loads.push_back(static_cast<int>(rng() % (dc.slots / 5 + 1)));
  t.set_loads(loads);
  return t;
}

std::vector<MappingVector> random_candidates(std::size_t count, std::size_t dcs, int nodes) {
  std::mt19937_64 rng(1);
  std::vector<MappingVector> out;
  for (std::size_t k = 0; k < count; ++k) {
    MappingVector m(dcs);
    for (int v = 0; v < nodes; ++v) ++m[rng() % dcs];
    out.push_back(m);
  }
  return out;
}

void BM_WeightedDistances(benchmark::State& state) {
  const auto cands = random_candidates(static_cast<std::size_t>(state.range(1)), 15, 7);
  const std::vector<double> target(15, 0.4);
  const std::vector<double> weights(15, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(weighted_sq_distances(cands, target, weights, mode(state)));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_CandidateCosts(benchmark::State& state) {
  const auto t = loaded_complete(15, 2);
  const auto cands = random_candidates(static_cast<std::size_t>(state.range(1)), 15, 7);
  for (auto _ : state) benchmark::DoNotOptimize(candidate_costs(t, cands, mode(state)));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_Enumerate(benchmark::State& state) {
  const auto t = loaded_complete(static_cast<int>(state.range(1)), 3);
  const auto job = build_jobs(small_scenario(3))[4];
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_feasible_mappings(t, job, {}, mode(state)));
}

void BM_Cdga(benchmark::State& state) {
  const auto t = loaded_complete(static_cast<int>(state.range(1)), 4);
  const auto job = build_jobs(small_scenario(3))[2];
  CdgaConfig cfg;
  cfg.exec = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(run_cdga(t, job, nullptr, cfg));
}

}  // namespace

BENCHMARK(BM_WeightedDistances)->ArgsProduct({{0, 1}, {10'000, 1'000'000}})->ArgNames({"parallel", "n"});
BENCHMARK(BM_CandidateCosts)->ArgsProduct({{0, 1}, {10'000, 1'000'000}})->ArgNames({"parallel", "n"});
BENCHMARK(BM_Enumerate)->ArgsProduct({{0, 1}, {5, 8}})->ArgNames({"parallel", "dcs"})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Cdga)->ArgsProduct({{0, 1}, {6, 15}})->ArgNames({"parallel", "dcs"})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
