#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "relu_sparsity/corpus.hpp"
#include "relu_sparsity/model.hpp"
#include "relu_sparsity/optimizer.hpp"

namespace relu_sparsity {

// Which mask, if any, a plain `train` run applies at the mask step.
enum class MaskControl { kNone, kActivity, kRandom };

std::string_view to_string(MaskControl control);
MaskControl parse_mask_control(std::string_view text);

struct CorpusConfig {
  std::string path;
  TokenizationMode mode = TokenizationMode::kByte;
  bool operator==(const CorpusConfig&) const = default;
};

struct InterventionPlan {
  MaskControl mask = MaskControl::kNone;
  double mask_step_fraction = 0.05;
  std::size_t mask_union_batches = 1;     // 1 = the single batch at the mask step
  std::uint64_t random_mask_seed = 1;
  std::uint64_t capacity_seed_offset = 1000;  // round-2 seed = seed + offset

  bool operator==(const InterventionPlan&) const = default;
};

// One run. The model seed, weight init and data order all derive from `seed`.
// vocab_size is taken from the corpus at run time when left at 0.
struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  ModelConfig model;
  AdamWConfig optimizer;
  double peak_lr = 3e-3;
  double warmup_fraction = 0.005;
  double final_lr_fraction = 0.0;
  std::int64_t total_steps = 20000;
  std::size_t batch_size = 8;
  CorpusConfig corpus;
  std::int64_t metric_every = 50;
  std::int64_t checkpoint_every = 1000;
  std::size_t eval_windows = 64;
  InterventionPlan intervention;
  std::string output_dir = "runs/default";
  std::uint64_t seed = 0;

  // Throws ConfigError on inconsistent settings.
  void validate() const;

  // Model config with the run seed applied.
  ModelConfig model_config() const;
  // warmup = round(warmup_fraction * total), clamped to [1, total - 1].
  ScheduleConfig schedule() const;
  // round(mask_step_fraction * total), clamped to [1, total - 1].
  std::int64_t mask_step() const;

  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& config);
// Missing keys take defaults; unknown keys, wrong types or a different
// schema_version throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

// FNV-1a 64 of the canonical JSON with output_dir removed, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace relu_sparsity
