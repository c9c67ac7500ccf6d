#include <benchmark/benchmark.h>

#include "hybridpair/mlcp.hpp"
#include "hybridpair/rng.hpp"

using namespace hybridpair;

namespace {

const ScenarioConfig& scenario() {
  static const ScenarioConfig cfg = [] {
    ScenarioConfig c;
    c.horizon = 12.0;
    return c;
  }();
  return cfg;
}

/// Small archive of rudimentary and colliding records for the feature and forest benches.
const Archive& archive() {
  static const Archive a = [] {
    Archive out;
    Rng rng(1);
    const auto& cfg = scenario();
    const auto params = cfg.adversary_params();
    const auto ind = cfg.independent_params();
    std::size_t ones = 0, zeros = 0;
    while (ones < 60 || zeros < 200) {
      PathRecord r;
      r.path = sample_path(params, rng.next_u64());
      r.independent = sample_path(ind, rng.next_u64());
      r.trace = run_scenario(cfg, r.path, r.independent);
      if (r.trace.off_road()) continue;
      const bool hit = r.trace.collision && *r.trace.t_collision >= 4.0;
      if (r.trace.collision && !hit) continue;
      if (hit ? ones >= 60 : zeros >= 200) continue;
      r.kind = hit ? PathKind::perturbed : PathKind::rudimentary;
      r.label = hit ? 1 : 0;
      out.add(std::move(r));
      (hit ? ones : zeros)++;
    }
    return out;
  }();
  return a;
}

std::vector<std::size_t> ids() {
  std::vector<std::size_t> out;
  for (const auto& r : archive().records()) out.push_back(r.id);
  return out;
}

const FeatureMatrix& matrix() {
  static const FeatureMatrix m = build_matrix(archive(), ids(), {1.0, 2.0, 0.2});
  return m;
}

void BM_SamplePath(benchmark::State& state) {
  const auto params = scenario().adversary_params();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_path(params, ++seed));
}
BENCHMARK(BM_SamplePath);

void BM_RunScenario(benchmark::State& state) {
  const auto& cfg = scenario();
  const auto adv = sample_path(cfg.adversary_params(), 7);
  const auto ind = sample_path(cfg.independent_params(), 8);
  for (auto _ : state) benchmark::DoNotOptimize(run_scenario(cfg, adv, ind));
}
BENCHMARK(BM_RunScenario);

void BM_TotalCost(benchmark::State& state) {
  const auto& cfg = scenario();
  const auto ind = sample_path(cfg.independent_params(), 3);
  const auto a = sample_path(cfg.adversary_params(), 1);
  const auto b = sample_path(cfg.adversary_params(), 2);
  const PairCandidate pair{{a, run_scenario(cfg, a, ind)}, {b, run_scenario(cfg, b, ind)}};
  DatasetStats stats;
  for (auto& e : stats.entries) e = ShellStats{0.2, 0.5};
  for (auto _ : state) benchmark::DoNotOptimize(total_cost(pair, stats));
}
BENCHMARK(BM_TotalCost);

void BM_BuildMatrix(benchmark::State& state) {
  const auto all = ids();
  for (auto _ : state) benchmark::DoNotOptimize(build_matrix(archive(), all, {1.0, 2.0, 0.2}));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * all.size()));
}
BENCHMARK(BM_BuildMatrix)->Unit(benchmark::kMillisecond);

void BM_TrainForest(benchmark::State& state) {
  ForestConfig cfg;
  cfg.n_trees = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(train(matrix(), cfg));
}
BENCHMARK(BM_TrainForest)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  ForestConfig cfg;
  const auto model = train(matrix(), cfg);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto row = std::span<const double>(matrix().row(i % matrix().rows()), matrix().cols());
    benchmark::DoNotOptimize(predict(model, row));
    ++i;
  }
}
BENCHMARK(BM_Predict);

}  // namespace

BENCHMARK_MAIN();
