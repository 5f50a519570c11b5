#include "relu_sparsity/summary.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "relu_sparsity/errors.hpp"

namespace relu_sparsity {

std::vector<SparsityRecord> converged_records(std::span<const SparsityRecord> records,
                                              std::int64_t* window_first_step, std::size_t* window_steps) {
  std::set<std::int64_t> steps;
  for (const auto& r : records) steps.insert(r.step);
  if (steps.empty()) return {};
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(kConvergenceWindowFraction * static_cast<double>(steps.size()))));
  const std::int64_t from = *std::next(steps.begin(), static_cast<std::ptrdiff_t>(steps.size() - k));
  if (window_first_step) *window_first_step = from;
  if (window_steps) *window_steps = k;

  struct Acc {
    double token = 0, seq = 0, batch = 0;
    std::array<double, 4> pct{};
    std::array<std::size_t, 4> pct_n{};
    std::size_t n = 0;
    std::int64_t last = 0;
  };
  std::map<std::size_t, Acc> by_layer;
  for (const auto& r : records) {
    if (r.step < from) continue;
    auto& a = by_layer[r.layer];
    a.token += r.token_use;
    a.seq += r.seq_use;
    a.batch += r.batch_use;
    for (std::size_t i = 0; i < 4; ++i) {
      if (std::isnan(r.percentile_use[i])) continue;
      a.pct[i] += r.percentile_use[i];
      ++a.pct_n[i];
    }
    ++a.n;
    a.last = std::max(a.last, r.step);
  }
  std::vector<SparsityRecord> out;
  for (const auto& [layer, a] : by_layer) {
    SparsityRecord r;
    r.step = a.last;
    r.layer = layer;
    const double n = static_cast<double>(a.n);
    r.token_use = a.token / n;
    r.seq_use = a.seq / n;
    r.batch_use = a.batch / n;
    for (std::size_t i = 0; i < 4; ++i)
      r.percentile_use[i] = a.pct_n[i] == 0 ? std::nan("") : a.pct[i] / static_cast<double>(a.pct_n[i]);
    out.push_back(r);
  }
  return out;
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("pearson_correlation needs equal-length inputs");
  const std::size_t n = x.size();
  if (n < 2) return std::nan("");
  const auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
  };
  if (constant(x) || constant(y)) return std::nan("");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

SummaryTables summarize(std::span<const SparsityRecord> records, std::span<const NeuronLifecycle> lifecycles) {
  SummaryTables t;
  const auto conv = converged_records(records, &t.window_first_step, &t.window_steps);
  std::vector<double> token, batch;
  for (const auto& r : conv) {
    UseRow row;
    row.layer = r.layer;
    row.token_use = r.token_use;
    row.seq_use = r.seq_use;
    row.batch_use = r.batch_use;
    row.token_over_seq = r.seq_use > 0 ? r.token_use / r.seq_use : std::nan("");
    row.seq_over_batch = r.batch_use > 0 ? r.seq_use / r.batch_use : std::nan("");
    t.use.push_back(row);
    t.percentiles.push_back(PercentileRow{r.layer, r.percentile_use});
    token.push_back(r.token_use);
    batch.push_back(r.batch_use);
  }
  t.token_batch_correlation = pearson_correlation(token, batch);
  for (const auto& lc : lifecycles) {
    if (!lc.observed()) continue;
    const double h = static_cast<double>(lc.hidden());
    LifecycleRow row;
    row.layer = lc.layer();
    row.hidden = lc.hidden();
    row.on_first = static_cast<double>(lc.count_first()) / h;
    row.turned_on = static_cast<double>(lc.count_turned_on()) / h;
    row.turned_off = static_cast<double>(lc.count_turned_off()) / h;
    row.final_use = static_cast<double>(lc.count_final()) / h;
    row.transient_off = static_cast<double>(lc.count_transient_off()) / h;
    row.transient_on = static_cast<double>(lc.count_transient_on()) / h;
    t.lifecycle.push_back(row);
  }
  return t;
}

}  // namespace relu_sparsity
