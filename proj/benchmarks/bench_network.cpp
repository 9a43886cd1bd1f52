#include <benchmark/benchmark.h>

#include <random>

#include "trapcc/network.hpp"

using namespace trapcc::nn;

namespace {

Matrix random_points(int rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(rows, 3);
  for (int i = 0; i < rows; ++i) {
    for (int k = 0; k < 3; ++k) m(i, k) = u(rng);
  }
  return m;
}

NetInput make_input(const ArchitectureConfig& a, int neighbors) {
  NetInput in;
  in.front = random_points(a.partial_input_points, 1);
  in.back = random_points(a.partial_input_points, 2);
  in.whole = random_points(a.coarse_input_points, 3);
  for (int i = 0; i < neighbors; ++i) in.neighbors.push_back(random_points(a.neighbor_input_points, 10 + i));
  return in;
}

void BM_ForwardDesk(benchmark::State& state) {
  const auto params = NetworkParams::initialize(ArchitectureConfig::desk(), 1);
  const auto in = make_input(params.arch, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, in, nullptr).detailed.data());
}
BENCHMARK(BM_ForwardDesk)->Arg(0)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_ForwardBackwardDesk(benchmark::State& state) {
  const auto params = NetworkParams::initialize(ArchitectureConfig::desk(), 1);
  const auto in = make_input(params.arch, 4);
  auto grads = params.zeros_like();
  for (auto _ : state) {
    ForwardCache cache;
    const NetOutput out = forward(params, in, &cache);
    OutputGrad g;
    g.coarse_front = Matrix::Ones(out.coarse_front->rows(), 3);
    g.coarse_back = Matrix::Ones(out.coarse_back->rows(), 3);
    g.detailed = Matrix::Ones(out.detailed.rows(), 3);
    backward(params, cache, g, grads);
  }
}
BENCHMARK(BM_ForwardBackwardDesk)->Unit(benchmark::kMillisecond);

void BM_ForwardStandard(benchmark::State& state) {
  const auto params = NetworkParams::initialize(ArchitectureConfig::standard(), 1);
  const auto in = make_input(params.arch, 4);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, in, nullptr).detailed.data());
}
BENCHMARK(BM_ForwardStandard)->Unit(benchmark::kMillisecond);

}  // namespace
