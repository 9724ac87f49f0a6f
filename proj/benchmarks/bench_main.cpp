#include <benchmark/benchmark.h>

#include <random>

#include "octopath/octree_map.hpp"
#include "octopath/planners.hpp"
#include "octopath/random.hpp"
#include "octopath/seq2seq.hpp"

using namespace octopath;

namespace {

std::vector<Vec3> ring(int n, double r) {
  std::vector<Vec3> pts;
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * 3.141592653589793 * k / n;
    pts.push_back({r * std::cos(a), r * std::sin(a), 0.0});
  }
  return pts;
}

SampleSequence sample_for(const ModelSpec& spec) {
  Rng rng(1);
  SampleSequence s;
  for (int t = 0; t <= spec.tau_i; ++t) {
    std::vector<std::int8_t> w(static_cast<std::size_t>(spec.grid.n_classes()));
    for (auto& v : w) v = static_cast<std::int8_t>(static_cast<int>(rng.index(3)) - 1);
    s.windows.push_back(std::move(w));
  }
  s.ref_window.assign(static_cast<std::size_t>(spec.tau_i + spec.tau_o + 1), Vec2{1.0, 0.0});
  s.labels.assign(static_cast<std::size_t>(spec.tau_o), 20);
  s.future.assign(static_cast<std::size_t>(spec.tau_o), Vec2{1.0, 0.0});
  return s;
}

}  // namespace

static void BM_OctreeIntegrateScan(benchmark::State& state) {
  const auto pts = ring(static_cast<int>(state.range(0)), 8.0);
  for (auto _ : state) {
    OctreeMap map({-25.6, -25.6, -25.6}, 51.2, 0.2);
    map.integrate_scan({0.0, 0.0, 0.0}, pts);
    benchmark::DoNotOptimize(map.leaf_count());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_OctreeIntegrateScan)->Arg(360)->Arg(1440);

static void BM_HybridAStar(benchmark::State& state) {
  TriStateGrid g({0.0, 0.0}, 100, 100, 0.2, CellState::Free);
  for (int iy = 0; iy < 80; ++iy) {
    g.set(50, iy, CellState::Occupied);
    g.set(51, iy, CellState::Occupied);
  }
  const auto prims = motion_primitives(KinematicParams{}, 1.0, 5, 0.4, 1.0);
  for (auto _ : state) {
    const auto plan = hybrid_astar(g, {2.0, 4.0, 0.0}, {18.0, 4.0}, prims);
    benchmark::DoNotOptimize(plan.cost);
  }
}
BENCHMARK(BM_HybridAStar)->Unit(benchmark::kMillisecond);

static void BM_PredictGreedy(benchmark::State& state) {
  ModelSpec spec;
  spec.hidden_dim = static_cast<int>(state.range(0));
  const ModelParams params = init_params(spec, 1);
  const SampleSequence s = sample_for(spec);
  for (auto _ : state) benchmark::DoNotOptimize(predict(params, s).classes);
}
BENCHMARK(BM_PredictGreedy)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_TrainStep(benchmark::State& state) {
  ModelSpec spec;
  const ModelParams params = init_params(spec, 1);
  const SampleSequence s = sample_for(spec);
  std::vector<const SampleSequence*> batch(static_cast<std::size_t>(state.range(0)), &s);
  Gradients g;
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients(params, batch, true, &g));
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
