// SPDX-License-Identifier: Apache-2.0
#include <vector>

#include <benchmark/benchmark.h>

#include "dta/kernels.hpp"
#include "dta/rng.hpp"

namespace {

std::vector<double> random_vec(size_t n, uint64_t seed) {
  dta::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.next_double(-1.0, 1.0);
  return v;
}

void BM_GemmNN(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  const int n = static_cast<int>(state.range(2));
  auto a = random_vec(static_cast<size_t>(m) * k, 1);
  auto b = random_vec(static_cast<size_t>(k) * n, 2);
  std::vector<double> c(static_cast<size_t>(m) * n, 0.0);
  for (auto _ : state) {
    dta::kernels::gemm_nn_acc(a.data(), b.data(), c.data(), m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(
      2.0 * m * k * n * static_cast<double>(state.iterations()) * 1e-9,
      benchmark::Counter::kIsRate);
}

void BM_Conv1d(benchmark::State& state) {
  const int cin = static_cast<int>(state.range(0));
  const int l = static_cast<int>(state.range(1));
  const int cout = static_cast<int>(state.range(2));
  const int k = 8;
  auto x = random_vec(static_cast<size_t>(cin) * l, 3);
  auto w = random_vec(static_cast<size_t>(cout) * cin * k, 4);
  std::vector<double> y(static_cast<size_t>(cout) * (l - k + 1), 0.0);
  for (auto _ : state) {
    dta::kernels::conv1d_acc(x.data(), w.data(), y.data(), cin, l, cout, k);
    benchmark::DoNotOptimize(y.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(
      2.0 * cout * cin * k * (l - k + 1) * static_cast<double>(state.iterations()) * 1e-9,
      benchmark::Counter::kIsRate);
}

}  // namespace

BENCHMARK(BM_GemmNN)->Args({512, 256, 128})->Args({70, 128, 128});
BENCHMARK(BM_Conv1d)->Args({128, 1000, 32})->Args({32, 993, 64})->Args({64, 986, 96});
