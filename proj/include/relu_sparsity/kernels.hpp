#pragma once

// Dense inner loops shared by the autograd ops and the sparsity metrics.
//
// Every kernel exists twice: the OpenMP version in `kernels` and a plain
// single-threaded version in `kernels::serial`. Both perform the same
// arithmetic in the same order for every output element (parallelism is only
// over independent output rows), so their results are bitwise identical for
// any thread count. The serial versions are kept for tests and benchmarks.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>

#include <omp.h>

namespace relu_sparsity::kernels {

namespace detail {

inline constexpr std::size_t kRowBlock = 8;     // micro-tile rows
inline constexpr std::size_t kColBlock = 64;    // micro-tile columns
inline constexpr std::size_t kDepthTile = 128;

// acc(MR x NR) held in registers across one depth tile. Each output element
// still accumulates its products in increasing k order.
template <typename T, std::size_t MR, std::size_t NR>
inline void micro_tile(std::size_t p0, std::size_t p1, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  T acc[MR][NR];
  for (std::size_t i = 0; i < MR; ++i)
    for (std::size_t j = 0; j < NR; ++j) acc[i][j] = c[i * n + j];
  for (std::size_t p = p0; p < p1; ++p) {
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < MR; ++i) {
      const T av = a[i * k + p];
      for (std::size_t j = 0; j < NR; ++j) acc[i][j] += av * brow[j];
    }
  }
  for (std::size_t i = 0; i < MR; ++i)
    for (std::size_t j = 0; j < NR; ++j) c[i * n + j] = acc[i][j];
}

// Ragged edge version of micro_tile.
template <typename T>
inline void edge_tile(std::size_t rows, std::size_t cols, std::size_t p0, std::size_t p1, std::size_t k,
                      std::size_t n, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < rows; ++i) {
    T* cr = c + i * n;
    for (std::size_t p = p0; p < p1; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < cols; ++j) cr[j] += av * brow[j];
    }
  }
}

// c[i0..i1, :] (+)= a[i0..i1, :] * b for a contiguous row range. The depth
// tiling keeps a (depth x 64) panel of b in L1 while rows stream past it;
// how rows are split between threads does not change any result.
template <typename T>
inline void gemm_rows(std::size_t i0, std::size_t i1, std::size_t k, std::size_t n, const T* a, const T* b, T* c,
                      bool accumulate) {
  if (!accumulate) std::fill(c + i0 * n, c + i1 * n, T{0});
  for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
    const std::size_t cols = std::min(kColBlock, n - j0);
    for (std::size_t p0 = 0; p0 < k; p0 += kDepthTile) {
      const std::size_t p1 = std::min(k, p0 + kDepthTile);
      for (std::size_t i = i0; i < i1; i += kRowBlock) {
        const std::size_t rows = std::min(kRowBlock, i1 - i);
        const T* ai = a + i * k;
        T* ci = c + i * n + j0;
        if (rows == kRowBlock && cols == kColBlock) {
          micro_tile<T, kRowBlock, kColBlock>(p0, p1, k, n, ai, b + j0, ci);
        } else {
          edge_tile<T>(rows, cols, p0, p1, k, n, ai, b + j0, ci);
        }
      }
    }
  }
}

}  // namespace detail

namespace serial {

// c[m,n] = a[m,k] * b[k,n]  (or += when accumulate).
template <typename T>
void gemm(std::size_t m, std::size_t k, std::size_t n, std::span<const T> a, std::span<const T> b,
          std::span<T> c, bool accumulate = false) {
  detail::gemm_rows(0, m, k, n, a.data(), b.data(), c.data(), accumulate);
}

// dst[cols,rows] = src[rows,cols]^T
template <typename T>
void transpose(std::size_t rows, std::size_t cols, std::span<const T> src, std::span<T> dst) {
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) dst[j * rows + i] = src[i * cols + j];
}

// counts[g, u] = number of rows r in group g with values[g, r, u] > 0.
// values is (groups, rows, cols) row-major.
template <typename T>
void positive_counts(std::size_t groups, std::size_t rows, std::size_t cols, std::span<const T> values,
                     std::span<std::uint32_t> counts) {
  for (std::size_t g = 0; g < groups; ++g) {
    std::uint32_t* out = counts.data() + g * cols;
    std::fill(out, out + cols, 0u);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* row = values.data() + (g * rows + r) * cols;
      for (std::size_t u = 0; u < cols; ++u) out[u] += row[u] > T{0} ? 1u : 0u;
    }
  }
}

}  // namespace serial

template <typename T>
void gemm(std::size_t m, std::size_t k, std::size_t n, std::span<const T> a, std::span<const T> b,
          std::span<T> c, bool accumulate = false) {
  const std::size_t blocks = (m + detail::kRowBlock - 1) / detail::kRowBlock;
#pragma omp parallel
  {
    // Contiguous, row-block aligned share of the output rows per thread.
    const auto threads = static_cast<std::size_t>(omp_get_num_threads());
    const auto tid = static_cast<std::size_t>(omp_get_thread_num());
    const std::size_t b0 = blocks * tid / threads, b1 = blocks * (tid + 1) / threads;
    const std::size_t i0 = std::min(m, b0 * detail::kRowBlock), i1 = std::min(m, b1 * detail::kRowBlock);
    if (i0 < i1) detail::gemm_rows(i0, i1, k, n, a.data(), b.data(), c.data(), accumulate);
  }
}

template <typename T>
void transpose(std::size_t rows, std::size_t cols, std::span<const T> src, std::span<T> dst) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(cols); ++j)
    for (std::size_t i = 0; i < rows; ++i)
      dst[static_cast<std::size_t>(j) * rows + i] = src[i * cols + static_cast<std::size_t>(j)];
}

template <typename T>
void positive_counts(std::size_t groups, std::size_t rows, std::size_t cols, std::span<const T> values,
                     std::span<std::uint32_t> counts) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t gi = 0; gi < static_cast<std::ptrdiff_t>(groups); ++gi) {
    const std::size_t g = static_cast<std::size_t>(gi);
    serial::positive_counts(1, rows, cols, values.subspan(g * rows * cols, rows * cols),
                            counts.subspan(g * cols, cols));
  }
}

}  // namespace relu_sparsity::kernels
