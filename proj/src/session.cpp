#include "relu_sparsity/session.hpp"

#include <fstream>

#include "relu_sparsity/checkpoint.hpp"
#include "relu_sparsity/errors.hpp"

namespace relu_sparsity {

using nlohmann::json;

namespace {

void write_json_file(const std::filesystem::path& path, const json& j) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

json eval_to_json(const EvalResult& e) {
  return json{{"val_loss", e.loss}, {"val_accuracy", e.accuracy}, {"tokens", e.tokens}};
}

EvalResult eval_from_json(const json& j) {
  return EvalResult{j.at("val_loss").get<double>(), j.at("val_accuracy").get<double>(),
                    j.at("tokens").get<std::size_t>()};
}

}  // namespace

std::shared_ptr<const Corpus> load_corpus(ExperimentConfig& config) {
  auto corpus = std::make_shared<const Corpus>(
      ingest_corpus(config.corpus.path, config.corpus.mode, config.model.seq_len));
  if (config.model.vocab_size == 0) config.model.vocab_size = corpus->vocab_size();
  return corpus;
}

TrainingSession::TrainingSession(ExperimentConfig config, std::shared_ptr<const Corpus> corpus, bool resume)
    : config_(std::move(config)), corpus_(std::move(corpus)) {
  config_.validate();
  hash_ = config_hash(config_);
  if (!corpus_) throw ArgumentError("training session needs a corpus");
  if (corpus_->vocab_size() > config_.model.vocab_size) {
    throw ConfigError("corpus vocabulary (" + std::to_string(corpus_->vocab_size()) + ") exceeds model vocab_size (" +
                      std::to_string(config_.model.vocab_size) + ")");
  }
  if (corpus_->seq_len() != config_.model.seq_len) throw ConfigError("corpus windows do not match model seq_len");

  std::filesystem::create_directories(dir());
  const auto checkpoint = dir() / artifacts::kCheckpoint;
  if (resume && std::filesystem::exists(checkpoint)) {
    restore(checkpoint);
    return;
  }
  for (const char* stale : {artifacts::kLifecycle, artifacts::kEval, artifacts::kCheckpoint, artifacts::kMask})
    std::filesystem::remove(dir() / stale);
  state_ = make_train_state(config_.model_config(), config_.schedule(), config_.optimizer);
  for (std::size_t l = 0; l < config_.model.n_layers; ++l) lifecycles_.emplace_back(l, config_.model.d_hidden[l]);
  save_config(config_, dir() / artifacts::kConfig);
  open_streams(true);
  write_status("running", std::nullopt, "");
}

void TrainingSession::restore(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  json t;
  try {
    t = json::parse(ck.trailer);
  } catch (const json::parse_error&) {
    throw FormatError("checkpoint " + path.string() + " has a malformed trailer");
  }
  const auto saved_hash = t.at("config_hash").get<std::string>();
  if (saved_hash != hash_) {
    throw ConfigError("checkpoint in " + dir().string() + " was written under config " + saved_hash +
                      ", current config is " + hash_);
  }
  if (!(ck.state.model == config_.model_config())) throw ConfigError("checkpoint model does not match config");
  state_ = std::move(ck.state);
  finished_ = t.at("finished").get<bool>();
  lifecycles_.clear();
  for (const auto& lj : t.at("lifecycles")) lifecycles_.push_back(lifecycle_from_json(lj));
  if (t.at("mask").get<bool>()) mask_ = load_mask(dir() / artifacts::kMask);
  if (t.contains("eval") && !t["eval"].is_null()) eval_ = eval_from_json(t["eval"]);

  // Keep exactly what the checkpointed state had produced.
  const std::int64_t at = state_.step();
  if (std::filesystem::exists(dir() / artifacts::kMetrics)) {
    for (const auto& r : read_records(dir() / artifacts::kMetrics))
      if (r.step < at || (finished_ && r.step == at)) records_.push_back(r);
  }
  if (std::filesystem::exists(dir() / artifacts::kLosses)) {
    for (const auto& p : read_losses(dir() / artifacts::kLosses))
      if (p.step < at) losses_.push_back(p);
  }
  save_config(config_, dir() / artifacts::kConfig);
  open_streams(true);
  if (!finished_) write_status("running", std::nullopt, "");
}

void TrainingSession::open_streams(bool truncate) {
  metrics_out_ = std::make_shared<JsonlWriter>(dir() / artifacts::kMetrics, truncate);
  losses_out_ = std::make_shared<JsonlWriter>(dir() / artifacts::kLosses, truncate);
  if (!truncate) return;
  for (const auto& r : records_) metrics_out_->write(record_to_json(r, hash_));
  for (const auto& p : losses_) losses_out_->write(json{{"step", p.step}, {"loss", p.loss}, {"lr", p.lr}});
}

void TrainingSession::write_status(const std::string& status, std::optional<std::int64_t> failed_step,
                                   const std::string& message) const {
  json j{{"status", status}, {"step", state_.step()}, {"config_hash", hash_}};
  j["failed_step"] = failed_step ? json(*failed_step) : json(nullptr);
  if (!message.empty()) j["message"] = message;
  write_json_file(dir() / artifacts::kStatus, j);
}

void TrainingSession::write_lifecycles() const {
  json layers = json::array();
  for (const auto& lc : lifecycles_) layers.push_back(lifecycle_to_json(lc));
  write_json_file(dir() / artifacts::kLifecycle, json{{"config_hash", hash_}, {"layers", layers}});
}

std::string TrainingSession::trailer() const {
  json layers = json::array();
  for (const auto& lc : lifecycles_) layers.push_back(lifecycle_to_json(lc));
  return json{{"config_hash", hash_},
              {"finished", finished_},
              {"mask", mask_.has_value()},
              {"lifecycles", layers},
              {"eval", eval_ ? eval_to_json(*eval_) : json(nullptr)}}
      .dump();
}

void TrainingSession::save_checkpoint() const {
  relu_sparsity::save_checkpoint(state_, trailer(), dir() / artifacts::kCheckpoint);
}

void TrainingSession::log_measurement(std::int64_t step, const std::vector<ActivationTap>& taps) {
  for (const auto& tap : taps) {
    const SparsityRecord rec = measure(tap, step);
    const auto active = batch_active_units(tap);
    if (mask_) {
      const auto& keep = mask_->layers[tap.layer];
      for (std::size_t u = 0; u < active.size(); ++u) {
        if (active[u] && !keep[u]) {
          throw InvariantViolation("masked unit " + std::to_string(u) + " of layer " + std::to_string(tap.layer) +
                                   " active at step " + std::to_string(step));
        }
      }
    }
    lifecycles_[tap.layer].update(active, step);
    records_.push_back(rec);
    metrics_out_->write(record_to_json(rec, hash_));
  }
}

void TrainingSession::advance_to(std::int64_t target) {
  if (finished_) throw ArgumentError("run in " + dir().string() + " is already finished");
  if (target > config_.total_steps) {
    throw ArgumentError("cannot advance to step " + std::to_string(target) + " beyond total_steps " +
                        std::to_string(config_.total_steps));
  }
  const bool planned = config_.intervention.mask != MaskControl::kNone;
  while (step() < target) {
    const std::int64_t s = step();
    try {
      const TokenBatch batch = corpus_->train_batch(config_.seed, s, config_.batch_size);
      StepResult r = train_step(state_, batch, mask_ ? &*mask_ : nullptr);
      losses_.push_back(LossPoint{s, r.loss, r.lr});
      losses_out_->write(json{{"step", s}, {"loss", r.loss}, {"lr", r.lr}});
      if (s % config_.metric_every == 0) log_measurement(s, r.taps);
      recent_taps_.push_back(std::move(r.taps));
      while (recent_taps_.size() > config_.intervention.mask_union_batches) recent_taps_.pop_front();
      if (planned && !mask_ && s == config_.mask_step()) apply_planned_mask();
      if (step() % config_.checkpoint_every == 0) save_checkpoint();
    } catch (const DivergenceError& e) {
      write_lifecycles();
      write_status("diverged", e.step(), e.what());
      throw;
    } catch (const std::exception& e) {
      write_status("failed", s, e.what());
      throw;
    }
  }
}

void TrainingSession::set_mask(MaskSpec mask) {
  mask.check_dims(config_.model.d_hidden);
  mask_ = std::move(mask);
  save_mask(*mask_, dir() / artifacts::kMask);
}

const MaskSpec& TrainingSession::apply_planned_mask() {
  const auto& plan = config_.intervention;
  if (plan.mask == MaskControl::kNone) throw ArgumentError("the intervention plan has no mask");
  if (recent_taps_.size() < plan.mask_union_batches) {
    throw ArgumentError("mask needs taps of " + std::to_string(plan.mask_union_batches) + " recent batches, have " +
                        std::to_string(recent_taps_.size()));
  }
  const std::int64_t mask_step = step() - 1;
  MaskSpec activity;
  if (plan.mask_union_batches == 1) {
    activity = activity_mask(recent_taps_.back(), mask_step);
  } else {
    const std::vector<std::vector<ActivationTap>> window(recent_taps_.end() - static_cast<std::ptrdiff_t>(plan.mask_union_batches),
                                                         recent_taps_.end());
    activity = activity_mask_union(window, mask_step);
  }
  if (plan.mask == MaskControl::kActivity) {
    set_mask(std::move(activity));
  } else {
    set_mask(random_mask(activity.cardinalities(), config_.model.d_hidden, plan.random_mask_seed, mask_step));
  }
  return *mask_;
}

TrainingSession TrainingSession::fork(ExperimentConfig config) const {
  config.validate();
  if (!(config.model_config() == config_.model_config()) || !(config.schedule() == config_.schedule()) ||
      config.batch_size != config_.batch_size || !(config.corpus == config_.corpus) ||
      config.metric_every != config_.metric_every || !(config.optimizer == config_.optimizer)) {
    throw ArgumentError("a fork must keep the model, schedule, data and metric cadence of its parent");
  }
  if (std::filesystem::path(config.output_dir) == dir()) throw ArgumentError("a fork needs its own output_dir");
  TrainingSession s(*this);
  s.config_ = std::move(config);
  s.hash_ = config_hash(s.config_);
  std::filesystem::create_directories(s.dir());
  for (const char* stale : {artifacts::kLifecycle, artifacts::kEval, artifacts::kCheckpoint, artifacts::kMask})
    std::filesystem::remove(s.dir() / stale);
  save_config(s.config_, s.dir() / artifacts::kConfig);
  s.open_streams(true);
  if (s.mask_) save_mask(*s.mask_, s.dir() / artifacts::kMask);
  s.write_status("running", std::nullopt, "");
  return s;
}

RunResult TrainingSession::finish() {
  RunResult result;
  result.config_hash = hash_;
  if (!finished_) {
    try {
      advance_to(config_.total_steps);
    } catch (const DivergenceError& e) {
      result.status = "diverged";
      result.failed_step = e.step();
      result.final_step = step();
      return result;
    }
    const std::int64_t total = config_.total_steps;
    const MaskSpec* m = mask_ ? &*mask_ : nullptr;
    const auto out = run_forward(state_.model, state_.params, corpus_->train_batch(config_.seed, total, config_.batch_size), m);
    log_measurement(total, out.taps);
    const auto val = corpus_->val_batches(config_.eval_windows, config_.batch_size);
    eval_ = evaluate(state_.model, state_.params, val, m);
    finished_ = true;
    json ej = eval_to_json(*eval_);
    ej["step"] = total;
    ej["masked"] = mask_.has_value();
    ej["config_hash"] = hash_;
    write_json_file(dir() / artifacts::kEval, ej);
    write_lifecycles();
    save_checkpoint();
    write_status("complete", std::nullopt, "");
  }
  result.status = "complete";
  result.final_step = step();
  result.eval = eval_;
  return result;
}

RunResult run_experiment(const ExperimentConfig& config, bool resume) {
  ExperimentConfig c = config;
  auto corpus = load_corpus(c);
  TrainingSession session(std::move(c), std::move(corpus), resume);
  return session.finish();
}

}  // namespace relu_sparsity
