#include "relu_sparsity/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "relu_sparsity/errors.hpp"

namespace relu_sparsity {

using nlohmann::json;

std::string_view to_string(MaskControl control) {
  switch (control) {
    case MaskControl::kNone: return "none";
    case MaskControl::kActivity: return "activity";
    case MaskControl::kRandom: return "random";
  }
  return "none";
}

MaskControl parse_mask_control(std::string_view text) {
  if (text == "none") return MaskControl::kNone;
  if (text == "activity") return MaskControl::kActivity;
  if (text == "random") return MaskControl::kRandom;
  throw ConfigError("unknown mask control '" + std::string(text) + "' (expected none, activity or random)");
}

void ExperimentConfig::validate() const {
  ModelConfig m = model_config();
  if (m.vocab_size == 0) m.vocab_size = 1;  // filled from the corpus at run time
  m.validate();
  optimizer.validate();
  if (!(peak_lr > 0.0) || !std::isfinite(peak_lr)) throw ConfigError("peak_lr must be positive");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) throw ConfigError("warmup_fraction must lie in (0, 1)");
  if (!(final_lr_fraction >= 0.0 && final_lr_fraction <= 1.0)) {
    throw ConfigError("final_lr_fraction must lie in [0, 1]");
  }
  if (total_steps < 0) throw ConfigError("total_steps must be >= 0");
  if (total_steps == 1) throw ConfigError("total_steps must be 0 (measure only) or >= 2");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (metric_every <= 0) throw ConfigError("metric_every must be >= 1");
  if (checkpoint_every <= 0) throw ConfigError("checkpoint_every must be >= 1");
  if (eval_windows == 0) throw ConfigError("eval_windows must be >= 1");
  if (corpus.path.empty()) throw ConfigError("corpus.path is required");
  if (!(intervention.mask_step_fraction > 0.0 && intervention.mask_step_fraction < 1.0)) {
    throw ConfigError("intervention.mask_step_fraction must lie in (0, 1)");
  }
  if (intervention.mask_union_batches == 0) throw ConfigError("intervention.mask_union_batches must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir is required");
}

ModelConfig ExperimentConfig::model_config() const {
  ModelConfig m = model;
  m.seed = seed;
  return m;
}

namespace {

std::int64_t clamp_fraction_step(double fraction, std::int64_t total) {
  const auto s = static_cast<std::int64_t>(std::llround(fraction * static_cast<double>(total)));
  return std::clamp<std::int64_t>(s, 1, std::max<std::int64_t>(1, total - 1));
}

}  // namespace

ScheduleConfig ExperimentConfig::schedule() const {
  ScheduleConfig s;
  s.total_steps = total_steps;
  s.warmup_steps = clamp_fraction_step(warmup_fraction, total_steps);
  s.peak_lr = peak_lr;
  s.final_lr_fraction = final_lr_fraction;
  return s;
}

std::int64_t ExperimentConfig::mask_step() const {
  return clamp_fraction_step(intervention.mask_step_fraction, total_steps);
}

json to_json(const ExperimentConfig& c) {
  const ModelConfig& m = c.model;
  return json{
      {"schema_version", ExperimentConfig::kSchemaVersion},
      {"model",
       {{"n_layers", m.n_layers},
        {"d_model", m.d_model},
        {"n_heads", m.n_heads},
        {"d_hidden", m.d_hidden},
        {"vocab_size", m.vocab_size},
        {"seq_len", m.seq_len},
        {"init", m.init == InitScheme::kLecunAll ? "lecun_all" : "lecun_mlp_only"}}},
      {"optimizer",
       {{"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"eps", c.optimizer.eps},
        {"weight_decay", c.optimizer.weight_decay}}},
      {"schedule",
       {{"peak_lr", c.peak_lr}, {"warmup_fraction", c.warmup_fraction}, {"final_lr_fraction", c.final_lr_fraction}}},
      {"total_steps", c.total_steps},
      {"batch_size", c.batch_size},
      {"corpus", {{"path", c.corpus.path}, {"mode", std::string(to_string(c.corpus.mode))}}},
      {"metric_every", c.metric_every},
      {"checkpoint_every", c.checkpoint_every},
      {"eval_windows", c.eval_windows},
      {"intervention",
       {{"mask", std::string(to_string(c.intervention.mask))},
        {"mask_step_fraction", c.intervention.mask_step_fraction},
        {"mask_union_batches", c.intervention.mask_union_batches},
        {"random_mask_seed", c.intervention.random_mask_seed},
        {"capacity_seed_offset", c.intervention.capacity_seed_offset}}},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
  };
}

namespace {

// Reads known keys of one JSON object and rejects anything else.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key '" + prefix() + k + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("'" + prefix() + key + "' has the wrong type");
    }
  }

  const json* object(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string child(const char* key) const { return prefix() + key; }

 private:
  std::string prefix() const { return where_.empty() ? "" : where_ + "."; }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Reader top(j, "");
  int version = 0;
  top.get("schema_version", version);
  if (version != ExperimentConfig::kSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(version) + " (expected " +
                      std::to_string(ExperimentConfig::kSchemaVersion) + ")");
  }
  if (const json* m = top.object("model")) {
    Reader r(*m, "model");
    r.get("n_layers", c.model.n_layers);
    r.get("d_model", c.model.d_model);
    r.get("n_heads", c.model.n_heads);
    if (m->contains("d_hidden") && (*m)["d_hidden"].is_number()) {
      // A single width applies to every layer.
      std::size_t h = 0;
      r.get("d_hidden", h);
      c.model.d_hidden.assign(c.model.n_layers, h);
    } else {
      c.model.d_hidden.assign(c.model.n_layers, 512);
      r.get("d_hidden", c.model.d_hidden);
    }
    r.get("vocab_size", c.model.vocab_size);
    r.get("seq_len", c.model.seq_len);
    std::string init = "lecun_all";
    r.get("init", init);
    if (init == "lecun_all") {
      c.model.init = InitScheme::kLecunAll;
    } else if (init == "lecun_mlp_only") {
      c.model.init = InitScheme::kLecunMlpOnly;
    } else {
      throw ConfigError("model.init must be lecun_all or lecun_mlp_only");
    }
  }
  if (const json* o = top.object("optimizer")) {
    Reader r(*o, "optimizer");
    r.get("beta1", c.optimizer.beta1);
    r.get("beta2", c.optimizer.beta2);
    r.get("eps", c.optimizer.eps);
    r.get("weight_decay", c.optimizer.weight_decay);
  }
  if (const json* s = top.object("schedule")) {
    Reader r(*s, "schedule");
    r.get("peak_lr", c.peak_lr);
    r.get("warmup_fraction", c.warmup_fraction);
    r.get("final_lr_fraction", c.final_lr_fraction);
  }
  top.get("total_steps", c.total_steps);
  top.get("batch_size", c.batch_size);
  if (const json* s = top.object("corpus")) {
    Reader r(*s, "corpus");
    r.get("path", c.corpus.path);
    std::string mode = "byte";
    r.get("mode", mode);
    c.corpus.mode = parse_tokenization_mode(mode);
  }
  top.get("metric_every", c.metric_every);
  top.get("checkpoint_every", c.checkpoint_every);
  top.get("eval_windows", c.eval_windows);
  if (const json* s = top.object("intervention")) {
    Reader r(*s, "intervention");
    std::string mask = "none";
    r.get("mask", mask);
    c.intervention.mask = parse_mask_control(mask);
    r.get("mask_step_fraction", c.intervention.mask_step_fraction);
    r.get("mask_union_batches", c.intervention.mask_union_batches);
    r.get("random_mask_seed", c.intervention.random_mask_seed);
    r.get("capacity_seed_offset", c.intervention.capacity_seed_offset);
  }
  top.get("output_dir", c.output_dir);
  top.get("seed", c.seed);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path.string());
  out << to_json(config).dump(2) << '\n';
}

std::string config_hash(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("output_dir");
  const std::string canonical = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace relu_sparsity
