#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "relu_sparsity/activation_tap.hpp"

namespace relu_sparsity {

// Percentiles reported for within-sequence use frequency.
inline constexpr std::array<double, 4> kReportedPercentiles = {50.0, 65.0, 75.0, 90.0};

// Use fractions of one layer at one logged step. Percentile entries are NaN
// when no sequence in the batch had any active unit.
struct SparsityRecord {
  std::int64_t step = 0;
  std::size_t layer = 0;
  double token_use = 0.0;  // mean over positions of (#units > 0) / hidden
  double seq_use = 0.0;    // mean over sequences of (#units > 0 anywhere in the sequence) / hidden
  double batch_use = 0.0;  // (#units > 0 anywhere in the batch) / hidden
  std::array<double, 4> percentile_use{};  // p50, p65, p75, p90 as fractions of the sequence

  bool operator==(const SparsityRecord&) const = default;
};

// Mean over all (batch, seq) positions of the number of strictly positive
// units, divided by the hidden width.
double token_use(const ActivationTap& tap);

// Number of hidden units whose activation summed over the sequence is > 0.
// values is (seq, hidden). Negative entries throw PreconditionError: the sum
// test is only equivalent to "used anywhere" for nonnegative inputs.
std::size_t sequence_dimensions_used(std::span<const float> values, std::size_t seq, std::size_t hidden);

// sequence_dimensions_used over the (batch*seq, hidden) flattening of the tap.
std::size_t batch_dimensions_used(const ActivationTap& tap);

// Mean over sequences of sequence_dimensions_used / hidden.
double sequence_use(const ActivationTap& tap);

// Maps a percentile over the nonzero subset onto the full vector in which
// zeros sort lowest: p * f + 100 * (1 - f). ArgumentError outside f in [0,1],
// p in [0,100].
double rescaled_percentile(double fract_nonzero, double desired_percentile);

// Nearest-rank percentile of an unsorted vector: the ceil(p/100 * n)-th
// smallest value (rank clamped to [1, n]).
double nearest_rank_percentile(std::span<const double> values, double percentile);

// Per-unit use counts over the sequence (entries > 0), the desired percentile
// among units used at least once, expressed as a fraction of the sequence
// length. Throws UndefinedPercentileError when no unit is used.
double percentile_used_dimension_count(std::span<const float> values, std::size_t seq, std::size_t hidden,
                                       double percentile);

// All metrics of one tap. Throws InvariantViolation if token <= seq <= batch fails.
SparsityRecord measure(const ActivationTap& tap, std::int64_t step);

// Boolean vector of units with any strictly positive activation in the tap.
std::vector<bool> batch_active_units(const ActivationTap& tap);

void check_chain_inequality(const SparsityRecord& record);

}  // namespace relu_sparsity
