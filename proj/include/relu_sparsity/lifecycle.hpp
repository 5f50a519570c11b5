#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace relu_sparsity {

// Streaming per-layer record of which hidden units were batch-active at the
// first and latest observation, plus whether any unit flipped on->off or
// off->on between consecutive observations.
class NeuronLifecycle {
 public:
  NeuronLifecycle() = default;
  NeuronLifecycle(std::size_t layer, std::size_t hidden);

  // Observations must arrive with strictly increasing steps.
  void update(const std::vector<bool>& batch_active, std::int64_t step);

  std::size_t layer() const noexcept { return layer_; }
  std::size_t hidden() const noexcept { return hidden_; }
  bool observed() const noexcept { return first_step_.has_value(); }
  std::int64_t first_step() const;
  std::int64_t final_step() const;

  const std::vector<bool>& active_first() const noexcept { return active_first_; }
  const std::vector<bool>& active_final() const noexcept { return active_final_; }
  const std::vector<bool>& ever_on_after_off() const noexcept { return ever_on_after_off_; }
  const std::vector<bool>& ever_off_after_on() const noexcept { return ever_off_after_on_; }

  std::size_t count_first() const;
  std::size_t count_final() const;
  std::size_t count_turned_on() const;   // !first && final
  std::size_t count_turned_off() const;  // first && !final
  // Units whose first and final state agree but which flipped in between.
  std::size_t count_transient_off() const;  // on ... off ... on
  std::size_t count_transient_on() const;   // off ... on ... off

  // Rebuilds a tracker from persisted fields.
  static NeuronLifecycle restore(std::size_t layer, std::int64_t first_step, std::int64_t final_step,
                                 std::vector<bool> active_first, std::vector<bool> active_final,
                                 std::vector<bool> ever_on_after_off, std::vector<bool> ever_off_after_on);

  bool operator==(const NeuronLifecycle&) const = default;

 private:
  std::size_t layer_ = 0;
  std::size_t hidden_ = 0;
  std::optional<std::int64_t> first_step_;
  std::int64_t final_step_ = 0;
  std::vector<bool> active_first_;
  std::vector<bool> active_final_;
  std::vector<bool> ever_on_after_off_;
  std::vector<bool> ever_off_after_on_;
};

}  // namespace relu_sparsity
