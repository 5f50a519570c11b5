#include "relu_sparsity/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "relu_sparsity/errors.hpp"
#include "relu_sparsity/kernels.hpp"

namespace relu_sparsity {

namespace {

void require_nonnegative(std::span<const float> values) {
  for (float v : values) {
    if (!(v >= 0.0f)) throw PreconditionError("activation metrics require nonnegative, non-NaN values");
  }
}

void require_tap(const ActivationTap& tap) {
  if (tap.values.rank() != 3) throw DimensionError("activation tap must be (batch, sequence, hidden)");
}

// Percentile among units with nonzero count, evaluated on the full count
// vector at the rescaled percentile, divided by the sequence length.
double percentile_from_counts(std::span<const double> counts, std::size_t seq, double percentile) {
  const auto nonzero = static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](double c) {
    return c > 0.0;
  }));
  if (nonzero == 0) throw UndefinedPercentileError("no hidden unit is used in the sequence");
  const double fract = static_cast<double>(nonzero) / static_cast<double>(counts.size());
  const double rescaled = rescaled_percentile(fract, percentile);
  return nearest_rank_percentile(counts, rescaled) / static_cast<double>(seq);
}

}  // namespace

double token_use(const ActivationTap& tap) {
  require_tap(tap);
  require_nonnegative(tap.values.data());
  const std::size_t hidden = tap.hidden();
  const std::size_t positions = tap.values.size() / hidden;
  std::vector<std::uint32_t> counts(hidden);
  kernels::positive_counts<float>(1, positions, hidden, tap.values.data(), counts);
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  return static_cast<double>(total) / (static_cast<double>(positions) * static_cast<double>(hidden));
}

std::size_t sequence_dimensions_used(std::span<const float> values, std::size_t seq, std::size_t hidden) {
  if (values.size() != seq * hidden) throw DimensionError("sequence values must be (seq, hidden)");
  require_nonnegative(values);
  std::vector<float> summed(hidden, 0.0f);
  for (std::size_t t = 0; t < seq; ++t)
    for (std::size_t u = 0; u < hidden; ++u) summed[u] += values[t * hidden + u];
  return static_cast<std::size_t>(std::count_if(summed.begin(), summed.end(), [](float s) { return s > 0.0f; }));
}

std::size_t batch_dimensions_used(const ActivationTap& tap) {
  require_tap(tap);
  return sequence_dimensions_used(tap.values.data(), tap.batch() * tap.sequence(), tap.hidden());
}

double sequence_use(const ActivationTap& tap) {
  require_tap(tap);
  const std::size_t seq = tap.sequence(), hidden = tap.hidden();
  std::size_t total = 0;
  for (std::size_t b = 0; b < tap.batch(); ++b)
    total += sequence_dimensions_used(tap.values.data().subspan(b * seq * hidden, seq * hidden), seq, hidden);
  return static_cast<double>(total) / (static_cast<double>(tap.batch()) * static_cast<double>(hidden));
}

double rescaled_percentile(double fract_nonzero, double desired_percentile) {
  if (!(fract_nonzero >= 0.0 && fract_nonzero <= 1.0)) {
    throw ArgumentError("fract_nonzero must lie in [0, 1]");
  }
  if (!(desired_percentile >= 0.0 && desired_percentile <= 100.0)) {
    throw ArgumentError("desired_percentile must lie in [0, 100]");
  }
  const double fract_zero = 1.0 - fract_nonzero;
  return desired_percentile * fract_nonzero + 100.0 * fract_zero;
}

double nearest_rank_percentile(std::span<const double> values, double percentile) {
  if (values.empty()) throw ArgumentError("percentile of an empty vector");
  if (!(percentile >= 0.0 && percentile <= 100.0)) throw ArgumentError("percentile must lie in [0, 100]");
  const double n = static_cast<double>(values.size());
  // Snap away float noise so that e.g. 75.000000000001% of 4 stays rank 3.
  const double exact = percentile / 100.0 * n;
  auto rank = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  std::vector<double> v(values.begin(), values.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end());
  return v[rank - 1];
}

double percentile_used_dimension_count(std::span<const float> values, std::size_t seq, std::size_t hidden,
                                       double percentile) {
  if (seq == 0) throw DimensionError("sequence must have at least one token");
  if (values.size() != seq * hidden) throw DimensionError("sequence values must be (seq, hidden)");
  require_nonnegative(values);
  std::vector<std::uint32_t> counts(hidden);
  kernels::serial::positive_counts<float>(1, seq, hidden, values, counts);
  std::vector<double> c(counts.begin(), counts.end());
  return percentile_from_counts(c, seq, percentile);
}

std::vector<bool> batch_active_units(const ActivationTap& tap) {
  require_tap(tap);
  const std::size_t hidden = tap.hidden();
  std::vector<std::uint32_t> counts(hidden);
  kernels::positive_counts<float>(1, tap.values.size() / hidden, hidden, tap.values.data(), counts);
  std::vector<bool> active(hidden);
  for (std::size_t u = 0; u < hidden; ++u) active[u] = counts[u] > 0;
  return active;
}

void check_chain_inequality(const SparsityRecord& r) {
  if (!(r.token_use <= r.seq_use && r.seq_use <= r.batch_use && r.batch_use <= 1.0)) {
    std::ostringstream os;
    os.precision(17);
    os << "chain inequality token <= seq <= batch <= 1 violated at step " << r.step << " layer " << r.layer
       << ": " << r.token_use << ", " << r.seq_use << ", " << r.batch_use;
    throw InvariantViolation(os.str());
  }
}

SparsityRecord measure(const ActivationTap& tap, std::int64_t step) {
  require_tap(tap);
  require_nonnegative(tap.values.data());
  const std::size_t batch = tap.batch(), seq = tap.sequence(), hidden = tap.hidden();

  // counts[b, u]: tokens of sequence b on which unit u is positive.
  std::vector<std::uint32_t> counts(batch * hidden);
  kernels::positive_counts<float>(batch, seq, hidden, tap.values.data(), counts);

  std::uint64_t token_total = 0, seq_total = 0;
  std::vector<bool> any(hidden, false);
  std::array<double, 4> pct_sum{};
  std::size_t pct_defined = 0;
  std::vector<double> c(hidden);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t used = 0;
    for (std::size_t u = 0; u < hidden; ++u) {
      const std::uint32_t k = counts[b * hidden + u];
      token_total += k;
      used += k > 0 ? 1 : 0;
      if (k > 0) any[u] = true;
      c[u] = static_cast<double>(k);
    }
    seq_total += used;
    if (used == 0) continue;
    ++pct_defined;
    for (std::size_t i = 0; i < kReportedPercentiles.size(); ++i)
      pct_sum[i] += percentile_from_counts(c, seq, kReportedPercentiles[i]);
  }

  SparsityRecord r;
  r.step = step;
  r.layer = tap.layer;
  const double h = static_cast<double>(hidden);
  r.token_use = static_cast<double>(token_total) / (static_cast<double>(batch * seq) * h);
  r.seq_use = static_cast<double>(seq_total) / (static_cast<double>(batch) * h);
  r.batch_use = static_cast<double>(std::count(any.begin(), any.end(), true)) / h;
  for (std::size_t i = 0; i < pct_sum.size(); ++i) {
    r.percentile_use[i] = pct_defined == 0 ? std::nan("") : pct_sum[i] / static_cast<double>(pct_defined);
  }
  check_chain_inequality(r);
  return r;
}

}  // namespace relu_sparsity
