#include <random>

#include <benchmark/benchmark.h>

#include "pnp/datagen.hpp"
#include "pnp/evaluation.hpp"
#include "pnp/fastcluster.hpp"

namespace {

pnp::Matrix mixture_features(std::size_t n) {
  pnp::MixtureParams p;
  p.per_class = n / p.num_classes;
  p.seed = 7;
  return pnp::l2_normalize_rows(pnp::generate_mixture(p).x);
}

void BM_KnnGraph(benchmark::State& state) {
  const auto x = mixture_features(static_cast<std::size_t>(state.range(0)));
  const pnp::EstimateKOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(pnp::knn_similarity_graph(x, opts));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KnnGraph)->RangeMultiplier(2)->Range(500, 4000)->Unit(benchmark::kMillisecond)->Complexity();

void BM_Infomap(benchmark::State& state) {
  const auto x = mixture_features(static_cast<std::size_t>(state.range(0)));
  const pnp::EstimateKOptions opts;
  const auto g = pnp::knn_similarity_graph(x, opts);
  for (auto _ : state) benchmark::DoNotOptimize(pnp::infomap(g, opts.infomap));
  state.counters["edges"] = static_cast<double>(g.edges.size());
}
BENCHMARK(BM_Infomap)->RangeMultiplier(2)->Range(500, 4000)->Unit(benchmark::kMillisecond);

void BM_EstimateK(benchmark::State& state) {
  const auto x = mixture_features(static_cast<std::size_t>(state.range(0)));
  const pnp::EstimateKOptions opts;
  std::size_t k = 0;
  for (auto _ : state) k = pnp::estimate_k(x, opts).num_clusters;
  state.counters["k"] = static_cast<double>(k);
}
BENCHMARK(BM_EstimateK)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  pnp::Matrix cost(n, n);
  for (double& v : cost.values()) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(pnp::hungarian(cost));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Hungarian)->RangeMultiplier(4)->Range(8, 512)->Complexity(benchmark::oNCubed);

}  // namespace

BENCHMARK_MAIN();
