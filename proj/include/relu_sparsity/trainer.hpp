#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relu_sparsity/model.hpp"
#include "relu_sparsity/optimizer.hpp"

namespace relu_sparsity {

struct TrainState {
  ModelConfig model;
  ScheduleConfig schedule;
  Params params;
  OptimizerState optimizer;

  std::int64_t step() const noexcept { return optimizer.step; }
  bool operator==(const TrainState&) const = default;
};

TrainState make_train_state(const ModelConfig& model, const ScheduleConfig& schedule, const AdamWConfig& hyper);

struct GradientResult {
  double loss = 0.0;
  std::vector<Tensor> grads;  // visit() order
  std::vector<ActivationTap> taps;
};

// Forward + backward without touching the parameters.
GradientResult compute_gradients(const ModelConfig& config, const Params& params, const TokenBatch& batch,
                                 const MaskSpec* mask = nullptr);

struct StepResult {
  double loss = 0.0;
  double lr = 0.0;
  std::vector<ActivationTap> taps;  // post-mask values
};

// Forward with the optional mask, backward, then an AdamW update at
// lr_at(schedule, step). Throws DivergenceError (state untouched) on a
// non-finite loss.
StepResult train_step(TrainState& state, const TokenBatch& batch, const MaskSpec* mask = nullptr);

struct EvalResult {
  double loss = 0.0;      // mean next-token cross-entropy
  double accuracy = 0.0;  // top-1
  std::size_t tokens = 0;
};

EvalResult evaluate(const ModelConfig& config, const Params& params, std::span<const TokenBatch> batches,
                    const MaskSpec* mask = nullptr);

}  // namespace relu_sparsity
