#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "relu_sparsity/lifecycle.hpp"
#include "relu_sparsity/metrics.hpp"

namespace relu_sparsity {

// "Converged" values are means over the last 5% of logged steps (at least one step).
inline constexpr double kConvergenceWindowFraction = 0.05;

struct UseRow {
  std::size_t layer = 0;
  double token_use = 0.0, seq_use = 0.0, batch_use = 0.0;
  double token_over_seq = 0.0, seq_over_batch = 0.0;
};

// Percent-free fractions of the layer width.
struct LifecycleRow {
  std::size_t layer = 0;
  std::size_t hidden = 0;
  double on_first = 0.0, turned_on = 0.0, turned_off = 0.0, final_use = 0.0;
  double transient_off = 0.0, transient_on = 0.0;
};

struct PercentileRow {
  std::size_t layer = 0;
  std::array<double, 4> values{};  // p50, p65, p75, p90
};

struct SummaryTables {
  std::vector<UseRow> use;
  std::vector<LifecycleRow> lifecycle;
  std::vector<PercentileRow> percentiles;
  // Pearson correlation across layers of converged token vs batch use; NaN
  // with fewer than two layers or zero variance.
  double token_batch_correlation = 0.0;
  std::int64_t window_first_step = 0;
  std::size_t window_steps = 0;
};

// Per-layer means over the convergence window, sorted by layer.
std::vector<SparsityRecord> converged_records(std::span<const SparsityRecord> records,
                                              std::int64_t* window_first_step = nullptr,
                                              std::size_t* window_steps = nullptr);

double pearson_correlation(std::span<const double> x, std::span<const double> y);

SummaryTables summarize(std::span<const SparsityRecord> records, std::span<const NeuronLifecycle> lifecycles);

}  // namespace relu_sparsity
