#include <benchmark/benchmark.h>

#include <random>

#include "trapcc/metrics.hpp"
#include "trapcc/spatial_index.hpp"

using namespace trapcc;

namespace {

PointCloud cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  PointCloud c(Frame::Object);
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

void BM_BuildIndex(benchmark::State& state) {
  const auto c = cloud(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(SpatialIndex(c).size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildIndex)->RangeMultiplier(4)->Range(256, 16384);

void BM_Chamfer(benchmark::State& state) {
  const auto a = cloud(static_cast<std::size_t>(state.range(0)), 2);
  const auto b = cloud(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer(a, b));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 2);
}
BENCHMARK(BM_Chamfer)->RangeMultiplier(4)->Range(256, 16384);

void BM_ChamferPrebuilt(benchmark::State& state) {
  const SpatialIndex a(cloud(static_cast<std::size_t>(state.range(0)), 2));
  const SpatialIndex b(cloud(static_cast<std::size_t>(state.range(0)), 3));
  for (auto _ : state) benchmark::DoNotOptimize(chamfer(a, b));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 2);
}
BENCHMARK(BM_ChamferPrebuilt)->RangeMultiplier(4)->Range(256, 16384);

void BM_ChamferWithGrad(benchmark::State& state) {
  const SpatialIndex a(cloud(static_cast<std::size_t>(state.range(0)), 4));
  const SpatialIndex b(cloud(static_cast<std::size_t>(state.range(0)), 5));
  for (auto _ : state) benchmark::DoNotOptimize(chamfer_with_grad(a, b).value);
}
BENCHMARK(BM_ChamferWithGrad)->Arg(256)->Arg(1024)->Arg(4096);

}  // namespace
