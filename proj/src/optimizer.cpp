#include "relu_sparsity/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "relu_sparsity/errors.hpp"

namespace relu_sparsity {

void AdamWConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("AdamW betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("AdamW eps must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
}

void ScheduleConfig::validate() const {
  if (!(warmup_steps > 0 && warmup_steps < total_steps)) {
    throw ConfigError("schedule requires 0 < warmup_steps (" + std::to_string(warmup_steps) +
                      ") < total_steps (" + std::to_string(total_steps) + ")");
  }
  if (!(peak_lr > 0.0) || !std::isfinite(peak_lr)) throw ConfigError("peak_lr must be positive");
  if (!(final_lr_fraction >= 0.0 && final_lr_fraction <= 1.0)) {
    throw ConfigError("final_lr_fraction must lie in [0, 1]");
  }
}

double lr_at(const ScheduleConfig& s, std::int64_t step) {
  if (step < 0 || step > s.total_steps) {
    throw ArgumentError("step " + std::to_string(step) + " outside [0, " + std::to_string(s.total_steps) + "]");
  }
  if (step < s.warmup_steps) {
    return s.peak_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  }
  const double progress =
      static_cast<double>(step - s.warmup_steps) / static_cast<double>(s.total_steps - s.warmup_steps);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return s.peak_lr * (s.final_lr_fraction + (1.0 - s.final_lr_fraction) * cosine);
}

OptimizerState make_optimizer_state(const Params& params, const AdamWConfig& hyper) {
  hyper.validate();
  OptimizerState st;
  st.hyper = hyper;
  params.visit([&](const std::string&, const Tensor& t) {
    st.first_moment.emplace_back(t.shape());
    st.second_moment.emplace_back(t.shape());
  });
  return st;
}

void adamw_update(Params& params, OptimizerState& state, std::span<const Tensor> grads, double lr) {
  if (grads.size() != state.first_moment.size()) {
    throw DimensionError("gradient count does not match optimizer state");
  }
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step + 1);
  const double bias1 = 1.0 - std::pow(h.beta1, t);
  const double bias2 = 1.0 - std::pow(h.beta2, t);
  std::size_t i = 0;
  params.visit([&](const std::string&, Tensor& p) {
    const Tensor& g = grads[i];
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    ++i;
    if (g.size() != p.size()) throw DimensionError("gradient shape does not match parameter");
    const double decay = p.rank() >= 2 ? h.weight_decay : 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = h.beta1 * m[j] + (1.0 - h.beta1) * gj;
      const double vj = h.beta2 * v[j] + (1.0 - h.beta2) * gj * gj;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double step = (mj / bias1) / (std::sqrt(vj / bias2) + h.eps) + decay * p[j];
      p[j] = static_cast<float>(p[j] - lr * step);
    }
  });
  ++state.step;
}

}  // namespace relu_sparsity
