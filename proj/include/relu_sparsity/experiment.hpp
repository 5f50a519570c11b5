#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relu_sparsity/config.hpp"
#include "relu_sparsity/session.hpp"

namespace relu_sparsity {

enum class SweepAxis { kPeakLr, kDHidden, kNLayers };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view text);  // ConfigError if unknown

// Copy of `base` with one axis set to `value` (d_hidden applies to every
// layer; n_layers keeps the first layer's width for all layers).
ExperimentConfig with_axis_value(const ExperimentConfig& base, SweepAxis axis, double value);

struct SweepArm {
  double value = 0.0;
  std::filesystem::path dir;
  RunResult run;
  std::string error;
  std::vector<std::size_t> hidden;
  std::vector<double> token_use;  // converged, per layer
  std::vector<double> batch_use;  // converged, per layer
  // Converged used units over available units across all layers.
  double total_batch_use = 0.0;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::kPeakLr;
  std::vector<SweepArm> arms;
};

// Runs one arm per value (same seed for all) in <output_dir>/sweep_<axis>_<value>.
// A failing arm is recorded and the sweep continues. Writes
// table5_sweep_<axis>.csv (converged batch use per layer plus a Total row),
// table5_sweep_<axis>_token_use.csv and fig_sweep_<axis>_batch_use.svg.
SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values);

}  // namespace relu_sparsity
