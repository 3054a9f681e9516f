// Serial vs OpenMP kernels. Arg = batch size (rows for pairwise).

#include <benchmark/benchmark.h>

#include "daband/kernels.hpp"
#include "daband/rng.hpp"

using namespace daband;

namespace {

MlpParams encoder() {
  Rng rng(1);
  return MlpParams::glorot({50, 64, 32, 10}, Activation::Tanh, rng);
}

std::vector<Vector> batch(std::size_t n, std::size_t d = 50) {
  Rng rng(2);
  std::vector<Vector> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(rng.normal_vector(d));
  return out;
}

template <bool Parallel>
void BM_Forward(benchmark::State& state) {
  const MlpParams p = encoder();
  const auto xs = batch(static_cast<std::size_t>(state.range(0)));
  std::vector<Vector> raw;
  std::vector<ForwardCache> caches;
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::forward_batch(p, xs, raw, caches);
    else
      kernels::serial::forward_batch(p, xs, raw, caches);
    benchmark::DoNotOptimize(raw.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Backprop(benchmark::State& state) {
  const MlpParams p = encoder();
  const auto xs = batch(static_cast<std::size_t>(state.range(0)));
  std::vector<Vector> raw;
  std::vector<ForwardCache> caches;
  kernels::serial::forward_batch(p, xs, raw, caches);
  std::vector<Vector> grads = raw;
  for (auto _ : state) {
    GradientBundle g = Parallel ? kernels::backprop_batch(p, caches, grads)
                                : kernels::serial::backprop_batch(p, caches, grads);
    benchmark::DoNotOptimize(g.weights.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Pairwise(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<std::vector<double>> rows(n, std::vector<double>(1000));
  for (auto& r : rows)
    for (double& v : r) v = rng.uniform(0.0, 1.0);
  for (auto _ : state) {
    Matrix m = Parallel ? kernels::pairwise_l1_distances(rows) : kernels::serial::pairwise_l1_distances(rows);
    benchmark::DoNotOptimize(m.values().data());
  }
}

}  // namespace

BENCHMARK(BM_Forward<false>)->Arg(64)->Arg(640);
BENCHMARK(BM_Forward<true>)->Arg(64)->Arg(640);
BENCHMARK(BM_Backprop<false>)->Arg(64)->Arg(640);
BENCHMARK(BM_Backprop<true>)->Arg(64)->Arg(640);
BENCHMARK(BM_Pairwise<false>)->Arg(16)->Arg(64);
BENCHMARK(BM_Pairwise<true>)->Arg(16)->Arg(64);

BENCHMARK_MAIN();
