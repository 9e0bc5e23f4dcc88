#include <benchmark/benchmark.h>

#include "layerscope/encoding.hpp"
#include "layerscope/intrinsic_dim.hpp"
#include "layerscope/neighbors.hpp"
#include "layerscope/synth.hpp"

namespace ls = layerscope;

static void BM_Knn(benchmark::State& state) {
  const auto x = ls::hypercube(static_cast<std::size_t>(state.range(0)), 5, 50, 0.0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(ls::knn(x.values(), 32));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Knn)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

static void BM_GrideProfile(benchmark::State& state) {
  const auto x = ls::hypercube(static_cast<std::size_t>(state.range(0)), 5, 50, 0.0, 2);
  ls::ProfileOptions opt;
  opt.bootstraps = 0;
  for (auto _ : state) benchmark::DoNotOptimize(ls::gride_scale_profile(x, opt));
}
BENCHMARK(BM_GrideProfile)->Arg(4000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_RidgeCv(benchmark::State& state) {
  const auto t = state.range(0);
  const ls::Matrix x = ls::Matrix::Random(t, 256);
  const ls::Matrix y = ls::Matrix::Random(t, 64);
  const auto alphas = ls::default_alpha_grid();
  for (auto _ : state) benchmark::DoNotOptimize(ls::ridge_cv(x, y, alphas));
}
BENCHMARK(BM_RidgeCv)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
