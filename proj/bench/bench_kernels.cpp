// Serial reference kernels against their OpenMP versions, at the shapes one
// desk-scale training step uses (batch 8 x seq 128 tokens, d_model 128,
// d_hidden 512). Set OMP_NUM_THREADS to vary the thread count.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "relu_sparsity/kernels.hpp"

namespace kernels = relu_sparsity::kernels;

namespace {

std::vector<float> random_values(std::size_t n, double p_zero = 0.0) {
  std::mt19937_64 rng(n);
  std::normal_distribution<float> normal;
  std::bernoulli_distribution zero(p_zero);
  std::vector<float> v(n);
  for (auto& x : v) x = zero(rng) ? 0.0f : std::abs(normal(rng));
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = random_values(m * k), b = random_values(k * n);
  std::vector<float> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::gemm<float>(m, k, n, a, b, c);
    } else {
      kernels::serial::gemm<float>(m, k, n, a, b, c);
    }
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * static_cast<double>(m * k * n), benchmark::Counter::kIsIterationInvariantRate,
                         benchmark::Counter::kIs1000);
}

// Rows x depth x cols: the MLP input projection, the MLP output projection
// and the unembedding of one 1024-token batch.
void gemm_shapes(benchmark::internal::Benchmark* b) {
  b->Args({1024, 128, 512})->Args({1024, 512, 128})->Args({1024, 128, 256});
}

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Apply(gemm_shapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Gemm<true>)->Name("gemm/openmp")->Apply(gemm_shapes)->Unit(benchmark::kMicrosecond);

template <bool Parallel>
void BM_PositiveCounts(benchmark::State& state) {
  const std::size_t groups = 8, rows = 128, cols = static_cast<std::size_t>(state.range(0));
  const auto values = random_values(groups * rows * cols, 0.8);
  std::vector<std::uint32_t> counts(groups * cols);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::positive_counts<float>(groups, rows, cols, values, counts);
    } else {
      kernels::serial::positive_counts<float>(groups, rows, cols, values, counts);
    }
    benchmark::DoNotOptimize(counts.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(values.size()));
}

BENCHMARK(BM_PositiveCounts<false>)->Name("positive_counts/serial")->Arg(512)->Arg(2048);
BENCHMARK(BM_PositiveCounts<true>)->Name("positive_counts/openmp")->Arg(512)->Arg(2048);

template <bool Parallel>
void BM_Transpose(benchmark::State& state) {
  const std::size_t rows = 1024, cols = static_cast<std::size_t>(state.range(0));
  const auto src = random_values(rows * cols);
  std::vector<float> dst(rows * cols);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::transpose<float>(rows, cols, src, dst);
    } else {
      kernels::serial::transpose<float>(rows, cols, src, dst);
    }
    benchmark::DoNotOptimize(dst.data());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(2 * src.size() * sizeof(float)));
}

BENCHMARK(BM_Transpose<false>)->Name("transpose/serial")->Arg(512);
BENCHMARK(BM_Transpose<true>)->Name("transpose/openmp")->Arg(512);

}  // namespace

BENCHMARK_MAIN();
