#include "relu_sparsity/lifecycle.hpp"

#include <algorithm>

#include "relu_sparsity/errors.hpp"

namespace relu_sparsity {

namespace {

std::size_t count_where(std::size_t n, auto&& pred) {
  std::size_t c = 0;
  for (std::size_t u = 0; u < n; ++u) c += pred(u) ? 1 : 0;
  return c;
}

}  // namespace

NeuronLifecycle::NeuronLifecycle(std::size_t layer, std::size_t hidden)
    : layer_(layer),
      hidden_(hidden),
      active_first_(hidden, false),
      active_final_(hidden, false),
      ever_on_after_off_(hidden, false),
      ever_off_after_on_(hidden, false) {}

void NeuronLifecycle::update(const std::vector<bool>& active, std::int64_t step) {
  if (active.size() != hidden_) {
    throw ArgumentError("lifecycle update with " + std::to_string(active.size()) + " units, tracker has " +
                        std::to_string(hidden_));
  }
  if (!first_step_) {
    first_step_ = step;
    active_first_ = active;
  } else {
    if (step <= final_step_) throw ArgumentError("lifecycle observations must have increasing steps");
    for (std::size_t u = 0; u < hidden_; ++u) {
      if (active_final_[u] && !active[u]) ever_off_after_on_[u] = true;
      if (!active_final_[u] && active[u]) ever_on_after_off_[u] = true;
    }
  }
  active_final_ = active;
  final_step_ = step;
}

std::int64_t NeuronLifecycle::first_step() const {
  if (!first_step_) throw ArgumentError("lifecycle has no observations");
  return *first_step_;
}

std::int64_t NeuronLifecycle::final_step() const {
  if (!first_step_) throw ArgumentError("lifecycle has no observations");
  return final_step_;
}

std::size_t NeuronLifecycle::count_first() const {
  return static_cast<std::size_t>(std::count(active_first_.begin(), active_first_.end(), true));
}

std::size_t NeuronLifecycle::count_final() const {
  return static_cast<std::size_t>(std::count(active_final_.begin(), active_final_.end(), true));
}

std::size_t NeuronLifecycle::count_turned_on() const {
  return count_where(hidden_, [&](std::size_t u) { return !active_first_[u] && active_final_[u]; });
}

std::size_t NeuronLifecycle::count_turned_off() const {
  return count_where(hidden_, [&](std::size_t u) { return active_first_[u] && !active_final_[u]; });
}

std::size_t NeuronLifecycle::count_transient_off() const {
  return count_where(hidden_,
                     [&](std::size_t u) { return active_first_[u] && active_final_[u] && ever_off_after_on_[u]; });
}

std::size_t NeuronLifecycle::count_transient_on() const {
  return count_where(hidden_,
                     [&](std::size_t u) { return !active_first_[u] && !active_final_[u] && ever_on_after_off_[u]; });
}

NeuronLifecycle NeuronLifecycle::restore(std::size_t layer, std::int64_t first_step, std::int64_t final_step,
                                         std::vector<bool> active_first, std::vector<bool> active_final,
                                         std::vector<bool> ever_on_after_off, std::vector<bool> ever_off_after_on) {
  const std::size_t n = active_first.size();
  if (active_final.size() != n || ever_on_after_off.size() != n || ever_off_after_on.size() != n) {
    throw ArgumentError("lifecycle vectors must share one length");
  }
  NeuronLifecycle t(layer, n);
  t.first_step_ = first_step;
  t.final_step_ = final_step;
  t.active_first_ = std::move(active_first);
  t.active_final_ = std::move(active_final);
  t.ever_on_after_off_ = std::move(ever_on_after_off);
  t.ever_off_after_on_ = std::move(ever_off_after_on);
  return t;
}

}  // namespace relu_sparsity
