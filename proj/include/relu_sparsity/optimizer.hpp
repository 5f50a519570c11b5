#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relu_sparsity/model.hpp"

namespace relu_sparsity {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
  bool operator==(const AdamWConfig&) const = default;
};

// Linear warmup from 0 to peak_lr, then cosine decay to final_lr_fraction * peak_lr.
struct ScheduleConfig {
  std::int64_t warmup_steps = 100;
  double peak_lr = 3e-3;
  std::int64_t total_steps = 20000;
  double final_lr_fraction = 0.0;

  void validate() const;
  bool operator==(const ScheduleConfig&) const = default;
};

// Defined for 0 <= step <= total_steps; ArgumentError otherwise.
double lr_at(const ScheduleConfig& schedule, std::int64_t step);

struct OptimizerState {
  AdamWConfig hyper;
  std::vector<Tensor> first_moment;   // one per parameter tensor, visit() order
  std::vector<Tensor> second_moment;
  std::int64_t step = 0;              // number of updates applied so far

  bool operator==(const OptimizerState&) const = default;
};

OptimizerState make_optimizer_state(const Params& params, const AdamWConfig& hyper);

// One decoupled-weight-decay Adam update. Weight decay applies to rank >= 2
// tensors (kernels and embeddings); gains and biases are not decayed.
void adamw_update(Params& params, OptimizerState& state, std::span<const Tensor> grads, double lr);

}  // namespace relu_sparsity
