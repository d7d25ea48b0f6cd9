// Serial reference kernels against the tiled OpenMP kernels.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "par/kernels.hpp"

namespace {

std::vector<double> random_values(std::size_t count, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(count);
  for (auto& x : v) x = dist(rng);
  return v;
}

void gemm_args(benchmark::internal::Benchmark* b) {
  b->Args({64, 64, 64})->Args({512, 80, 200})->Args({512, 200, 80})->Args({1280, 32, 16});
}

void BM_GemmReference(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const auto q = static_cast<std::size_t>(state.range(1));
  const auto r = static_cast<std::size_t>(state.range(2));
  const auto a = random_values(p * q, 1), b = random_values(q * r, 2);
  std::vector<double> c(p * r);
  for (auto _ : state) {
    par::kernels::reference::gemm(a, b, c, {p, q, r, false, false});
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * p * q * r, benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}

void BM_GemmTiled(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const auto q = static_cast<std::size_t>(state.range(1));
  const auto r = static_cast<std::size_t>(state.range(2));
  const auto a = random_values(p * q, 1), b = random_values(q * r, 2);
  std::vector<double> c(p * r);
  par::kernels::set_num_threads(par::kernels::threads_from_env());
  for (auto _ : state) {
    par::kernels::gemm(a, b, c, {p, q, r, false, false});
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * p * q * r, benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}

void BM_SoftmaxReference(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto cols = static_cast<std::size_t>(state.range(1));
  const auto x = random_values(rows * cols, 3);
  std::vector<double> y(x.size());
  for (auto _ : state) {
    par::kernels::reference::softmax_rows(x, y, rows, cols);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_SoftmaxParallel(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto cols = static_cast<std::size_t>(state.range(1));
  const auto x = random_values(rows * cols, 3);
  std::vector<double> y(x.size());
  par::kernels::set_num_threads(par::kernels::threads_from_env());
  for (auto _ : state) {
    par::kernels::softmax_rows(x, y, rows, cols);
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(BM_GemmReference)->Apply(gemm_args);
BENCHMARK(BM_GemmTiled)->Apply(gemm_args);
BENCHMARK(BM_SoftmaxReference)->Args({5120, 40});
BENCHMARK(BM_SoftmaxParallel)->Args({5120, 40});

BENCHMARK_MAIN();
