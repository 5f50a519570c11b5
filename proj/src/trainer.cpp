#include "relu_sparsity/trainer.hpp"

#include <cmath>

#include "relu_sparsity/errors.hpp"
#include "relu_sparsity/ops.hpp"

namespace relu_sparsity {

TrainState make_train_state(const ModelConfig& model, const ScheduleConfig& schedule, const AdamWConfig& hyper) {
  TrainState st;
  st.model = model;
  st.schedule = schedule;
  st.params = init_params<float>(model);
  st.optimizer = make_optimizer_state(st.params, hyper);
  return st;
}

GradientResult compute_gradients(const ModelConfig& config, const Params& params, const TokenBatch& batch,
                                 const MaskSpec* mask) {
  Graph g;
  const ParamVars pv = bind_params(g, params);
  const auto fv = forward<float>(g, config, pv, batch, mask);
  const Var loss = ops::softmax_cross_entropy(g, fv.logits, std::span<const std::int32_t>(batch.targets));
  GradientResult out;
  out.loss = g.value(loss)[0];
  out.taps = extract_taps(g, fv, batch);
  if (!std::isfinite(out.loss)) return out;
  g.backward(loss);
  out.grads.reserve(pv.all.size());
  for (Var v : pv.all) out.grads.push_back(g.grad(v));
  return out;
}

StepResult train_step(TrainState& state, const TokenBatch& batch, const MaskSpec* mask) {
  const std::int64_t step = state.step();
  const double lr = lr_at(state.schedule, step);
  auto result = compute_gradients(state.model, state.params, batch, mask);
  if (!std::isfinite(result.loss)) throw DivergenceError(step);
  adamw_update(state.params, state.optimizer, result.grads, lr);
  return StepResult{result.loss, lr, std::move(result.taps)};
}

EvalResult evaluate(const ModelConfig& config, const Params& params, std::span<const TokenBatch> batches,
                    const MaskSpec* mask) {
  double loss_sum = 0.0;
  std::size_t correct = 0, tokens = 0;
  for (const auto& batch : batches) {
    const auto out = run_forward(config, params, batch, mask);
    const std::size_t v = out.logits.last_dim();
    for (std::size_t r = 0; r < batch.targets.size(); ++r) {
      const float* row = out.logits.raw() + r * v;
      float mx = row[0];
      std::size_t arg = 0;
      for (std::size_t j = 1; j < v; ++j)
        if (row[j] > mx) mx = row[j], arg = j;
      double z = 0.0;
      for (std::size_t j = 0; j < v; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
      const auto t = static_cast<std::size_t>(batch.targets[r]);
      if (t >= v) throw IndexError("target id outside vocabulary");
      loss_sum += std::log(z) - (static_cast<double>(row[t]) - mx);
      correct += arg == t ? 1 : 0;
      ++tokens;
    }
  }
  if (tokens == 0) throw ArgumentError("evaluate needs at least one token");
  return EvalResult{loss_sum / static_cast<double>(tokens), static_cast<double>(correct) / static_cast<double>(tokens),
                    tokens};
}

}  // namespace relu_sparsity
