#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relu_sparsity/config.hpp"
#include "relu_sparsity/session.hpp"

namespace relu_sparsity {

// Desk-scale thresholds for the masking experiment: the activity-masked arm
// should end within 2% (relative) of the baseline validation loss, the
// random-masked arm at least 10% worse.
inline constexpr double kActivityMaskTolerance = 0.02;
inline constexpr double kRandomMaskPenalty = 0.10;

struct MaskArm {
  std::string name;  // "baseline", "activity", "random"
  std::filesystem::path dir;
  RunResult run;
  std::vector<std::size_t> mask_cardinality;  // empty for the baseline
  std::string error;                          // non-divergence failure, if any
};

struct MaskExperimentResult {
  std::int64_t mask_step = 0;
  std::vector<MaskArm> arms;

  const MaskArm& arm(const std::string& name) const;
  // Relative change of an arm's final validation loss against the baseline;
  // nullopt when either arm did not complete.
  std::optional<double> relative_loss(const std::string& name) const;
};

// Trains a shared prefix through the mask step, then continues three arms
// in <output_dir>/{baseline,activity,random}: no mask, the activity mask of
// the mask-step batch, and a random mask of the same per-layer cardinality.
// A diverging arm is recorded and the others still run. Writes
// mask_experiment.csv and mask_experiment.json into output_dir.
MaskExperimentResult run_mask_experiment(const ExperimentConfig& config);

// Per-layer hidden widths for a round-2 run.
struct CapacityPlan {
  std::vector<std::size_t> hidden;
};

// Round-2 widths equal to the round-1 used-unit counts. PlanError when a layer
// used no units or a count exceeds its width.
CapacityPlan capacity_plan_from_counts(std::span<const std::size_t> round1_hidden,
                                       std::span<const std::size_t> used_counts);

// Used counts from converged batch-use fractions: round(fraction * width).
CapacityPlan capacity_plan_from_usage(std::span<const std::size_t> round1_hidden,
                                      std::span<const double> converged_batch_use);

struct CapacityRow {
  std::size_t layer = 0;
  std::size_t round1_hidden = 0, round1_used = 0;
  double round1_fraction = 0.0;
  std::size_t round2_hidden = 0, round2_used = 0;
  double round2_fraction = 0.0;
};

struct CapacityResult {
  CapacityPlan plan;
  std::vector<CapacityRow> rows;
  std::optional<EvalResult> round1_eval;
  RunResult round2;
  std::filesystem::path round2_dir;
};

// Reads a completed round-1 run, plans the widths, and trains a fresh model
// (seed + capacity_seed_offset) with them in <config.output_dir>/round2.
// Writes table4_capacity_rerun.csv into config.output_dir.
CapacityResult run_capacity_rerun(const ExperimentConfig& config, const std::filesystem::path& round1_dir);

}  // namespace relu_sparsity
