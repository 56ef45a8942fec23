// Serial vs OpenMP kernel throughput at training-typical sizes.
// Run: ./bench/kernel_bench [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "flowcast/kernels.hpp"

using flowcast::kern::Backend;
using flowcast::kern::set_backend;

namespace {

std::vector<double> random_vec(size_t n, uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(g);
  return v;
}

void bm_matmul(benchmark::State& state, Backend backend) {
  const int64_t M = state.range(0), K = state.range(1), N = state.range(2);
  const auto a = random_vec(static_cast<size_t>(M * K), 1);
  const auto b = random_vec(static_cast<size_t>(K * N), 2);
  std::vector<double> c(static_cast<size_t>(M * N));
  set_backend(backend);
  for (auto _ : state) {
    flowcast::kern::matmul(a.data(), b.data(), c.data(), M, K, N);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * M * K * N);
  set_backend(Backend::openmp);
}

void bm_graph_mix(benchmark::State& state, Backend backend) {
  const int64_t n = state.range(0), batch = state.range(1), f = state.range(2);
  const auto ahat = random_vec(static_cast<size_t>(n * n), 3);
  const auto h = random_vec(static_cast<size_t>(batch * n * f), 4);
  std::vector<double> out(static_cast<size_t>(batch * n * f));
  set_backend(backend);
  for (auto _ : state) {
    flowcast::kern::graph_mix(ahat.data(), h.data(), out.data(), n, batch, f);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * batch * n * n * f);
  set_backend(Backend::openmp);
}

void bm_conv_time(benchmark::State& state, Backend backend) {
  const int64_t rows = state.range(0), C = state.range(1), T = state.range(2);
  const int64_t O = C, K = 3;
  const auto in = random_vec(static_cast<size_t>(rows * C * T), 5);
  const auto w = random_vec(static_cast<size_t>(O * C * K), 6);
  const auto bias = random_vec(static_cast<size_t>(O), 7);
  std::vector<double> out(static_cast<size_t>(rows * O * (T - K + 1)));
  set_backend(backend);
  for (auto _ : state) {
    flowcast::kern::conv_time(in.data(), w.data(), bias.data(), out.data(), rows, C, T, O, K);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * rows * O * C * K * (T - K + 1));
  set_backend(Backend::openmp);
}

}  // namespace

// Shapes match one training minibatch of the synthetic benchmark
// (batch 64, 17 nodes, 26-wide GRU input, hidden 24) and a larger setting.
BENCHMARK_CAPTURE(bm_matmul, serial, Backend::serial)->Args({1088, 26, 24})->Args({4096, 64, 64});
BENCHMARK_CAPTURE(bm_matmul, openmp, Backend::openmp)->Args({1088, 26, 24})->Args({4096, 64, 64});
BENCHMARK_CAPTURE(bm_graph_mix, serial, Backend::serial)->Args({17, 64, 26})->Args({170, 64, 64});
BENCHMARK_CAPTURE(bm_graph_mix, openmp, Backend::openmp)->Args({17, 64, 26})->Args({170, 64, 64});
BENCHMARK_CAPTURE(bm_conv_time, serial, Backend::serial)->Args({1088, 24, 6})->Args({4096, 32, 12});
BENCHMARK_CAPTURE(bm_conv_time, openmp, Backend::openmp)->Args({1088, 24, 6})->Args({4096, 32, 12});

BENCHMARK_MAIN();
