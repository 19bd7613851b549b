#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "climsom/compare.hpp"
#include "climsom/distribution.hpp"
#include "climsom/embed.hpp"
#include "climsom/som.hpp"
#include "climsom/transport.hpp"

using namespace climsom;

namespace {

SomGrid random_grid(int side, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  std::vector<float> w(static_cast<std::size_t>(side * side) * dim);
  for (auto& v : w) v = g(rng);
  SomConfig c;
  c.rows = side;
  c.cols = side;
  return SomGrid(c, dim, std::move(w));
}

std::vector<Vec2> cloud(std::size_t n, std::uint64_t seed, double snap = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Vec2> p(n);
  for (auto& q : p) {
    q = {g(rng), g(rng)};
    if (snap > 0) q = {std::round(q.x / snap) * snap, std::round(q.y / snap) * snap};
  }
  return p;
}

void BM_Bmu(benchmark::State& state) {
  auto const dim = static_cast<std::size_t>(state.range(0));
  auto const grid = random_grid(30, dim, 1);
  std::vector<float> x(dim, 0.25f);
  for (auto _ : state) benchmark::DoNotOptimize(bmu(grid, x));
  state.SetItemsProcessed(state.iterations() * 900);
}
BENCHMARK(BM_Bmu)->Arg(100)->Arg(1000)->Arg(5000);

void BM_TrainSom(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> g;
  SampleMatrix s;
  s.dim = 400;
  s.rows = 500;
  s.data.resize(s.dim * s.rows);
  for (auto& v : s.data) v = g(rng);
  s.refs.resize(s.rows);
  SomConfig c;
  c.rows = 10;
  c.cols = 10;
  c.iterations = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(train_som(s, c));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainSom)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Mde(benchmark::State& state) {
  auto const side = static_cast<int>(state.range(0));
  auto const graph = build_node_graph(random_grid(side, 50, 3));
  for (auto _ : state) benchmark::DoNotOptimize(mde_project(graph, {}));
}
BENCHMARK(BM_Mde)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_AssignmentTransport(benchmark::State& state) {
  auto const n = static_cast<std::size_t>(state.range(0));
  auto const a = cloud(n, 4), b = cloud(n, 5);
  for (auto _ : state) benchmark::DoNotOptimize(optimal_transport(a, b));
}
BENCHMARK(BM_AssignmentTransport)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_LatticeTransport(benchmark::State& state) {
  auto const n = static_cast<std::size_t>(state.range(0));
  auto const a = cloud(n, 6, 0.25), b = cloud(n + 7, 7, 0.25);
  for (auto _ : state) benchmark::DoNotOptimize(optimal_transport(a, b));
}
BENCHMARK(BM_LatticeTransport)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Kde(benchmark::State& state) {
  auto const p = cloud(static_cast<std::size_t>(state.range(0)), 8);
  KdeParams params;
  params.grid_res = 128;
  for (auto _ : state) benchmark::DoNotOptimize(kde(p, params));
}
BENCHMARK(BM_Kde)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_VectorField(benchmark::State& state) {
  auto const a = cloud(1000, 9, 0.25), b = cloud(1000, 10, 0.25);
  FieldParams params;
  params.k = 20;
  params.threads = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_vector_field(a, b, params));
}
BENCHMARK(BM_VectorField)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace
BENCHMARK_MAIN();
