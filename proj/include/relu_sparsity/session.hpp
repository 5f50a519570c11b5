#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "relu_sparsity/config.hpp"
#include "relu_sparsity/corpus.hpp"
#include "relu_sparsity/lifecycle.hpp"
#include "relu_sparsity/masks.hpp"
#include "relu_sparsity/metrics.hpp"
#include "relu_sparsity/record_stream.hpp"
#include "relu_sparsity/trainer.hpp"

namespace relu_sparsity {

// File names inside a run directory.
namespace artifacts {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kMetrics = "metrics.jsonl";
inline constexpr const char* kLosses = "train_loss.jsonl";
inline constexpr const char* kLifecycle = "lifecycle.json";
inline constexpr const char* kEval = "eval.json";
inline constexpr const char* kStatus = "status.json";
inline constexpr const char* kCheckpoint = "checkpoint.bin";
inline constexpr const char* kMask = "mask.bin";
}  // namespace artifacts

struct RunResult {
  std::string status;  // "complete" or "diverged"
  std::int64_t final_step = 0;
  std::optional<std::int64_t> failed_step;
  std::optional<EvalResult> eval;
  std::string config_hash;
};

// Corpus of a config, with vocab_size resolved (0 in the config means "from the corpus").
std::shared_ptr<const Corpus> load_corpus(ExperimentConfig& config);

// One training run writing its artifacts into config.output_dir.
//
// Training step s uses the batch of step s; its pre-update taps are measured
// when s is a multiple of metric_every. finish() adds one measurement at
// step total_steps with the trained parameters, so a run with total_steps = 0
// logs only the initialization. The intervention plan's mask (if any) is
// computed from the taps of the mask step and applied from the next step on.
class TrainingSession {
 public:
  // resume=true continues from checkpoint.bin when it exists (else starts fresh).
  TrainingSession(ExperimentConfig config, std::shared_ptr<const Corpus> corpus, bool resume = false);
  TrainingSession(TrainingSession&&) = default;
  TrainingSession& operator=(TrainingSession&&) = default;

  const ExperimentConfig& config() const noexcept { return config_; }
  const std::string& hash() const noexcept { return hash_; }
  std::int64_t step() const noexcept { return state_.step(); }
  bool finished() const noexcept { return finished_; }
  const TrainState& state() const noexcept { return state_; }
  const std::vector<SparsityRecord>& records() const noexcept { return records_; }
  const std::vector<LossPoint>& losses() const noexcept { return losses_; }
  const std::vector<NeuronLifecycle>& lifecycles() const noexcept { return lifecycles_; }
  const std::optional<MaskSpec>& mask() const noexcept { return mask_; }
  // Taps of the most recent training steps, newest last.
  const std::deque<std::vector<ActivationTap>>& recent_taps() const noexcept { return recent_taps_; }

  // Trains steps [step(), target). DivergenceError is rethrown after the
  // status file records the failing step.
  void advance_to(std::int64_t target);

  // Masks every later training step, evaluation and measurement.
  void set_mask(MaskSpec mask);
  // Builds the mask of the intervention plan from recent_taps() and applies it.
  const MaskSpec& apply_planned_mask();

  // Continues this run under another config (same model, schedule, data and
  // seed) in a new directory, rewriting the streams recorded so far.
  TrainingSession fork(ExperimentConfig config) const;

  void save_checkpoint() const;

  // Trains to total_steps, takes the final measurement, evaluates on the
  // held-out split and writes lifecycle, eval and status files.
  RunResult finish();

 private:
  TrainingSession(const TrainingSession&) = default;

  void open_streams(bool truncate);
  void log_measurement(std::int64_t step, const std::vector<ActivationTap>& taps);
  void write_status(const std::string& status, std::optional<std::int64_t> failed_step,
                    const std::string& message) const;
  void write_lifecycles() const;
  std::string trailer() const;
  void restore(const std::filesystem::path& checkpoint);
  std::filesystem::path dir() const { return config_.output_dir; }

  ExperimentConfig config_;
  std::string hash_;
  std::shared_ptr<const Corpus> corpus_;
  TrainState state_;
  std::optional<MaskSpec> mask_;
  std::vector<SparsityRecord> records_;
  std::vector<LossPoint> losses_;
  std::vector<NeuronLifecycle> lifecycles_;
  std::deque<std::vector<ActivationTap>> recent_taps_;
  std::shared_ptr<JsonlWriter> metrics_out_;
  std::shared_ptr<JsonlWriter> losses_out_;
  bool finished_ = false;
  std::optional<EvalResult> eval_;
};

// Fresh (or resumed) run to completion. Divergence is reported in the result, not thrown.
RunResult run_experiment(const ExperimentConfig& config, bool resume = false);

}  // namespace relu_sparsity
