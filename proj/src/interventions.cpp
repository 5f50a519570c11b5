#include "relu_sparsity/interventions.hpp"

#include <cmath>
#include <fstream>

#include "relu_sparsity/errors.hpp"
#include "relu_sparsity/report.hpp"
#include "relu_sparsity/summary.hpp"

namespace relu_sparsity {

using nlohmann::json;

const MaskArm& MaskExperimentResult::arm(const std::string& name) const {
  for (const auto& a : arms)
    if (a.name == name) return a;
  throw ArgumentError("no arm named " + name);
}

std::optional<double> MaskExperimentResult::relative_loss(const std::string& name) const {
  const auto& base = arm("baseline");
  const auto& other = arm(name);
  if (!base.run.eval || !other.run.eval) return std::nullopt;
  return (other.run.eval->loss - base.run.eval->loss) / base.run.eval->loss;
}

MaskExperimentResult run_mask_experiment(const ExperimentConfig& config) {
  ExperimentConfig base_cfg = config;
  auto corpus = load_corpus(base_cfg);
  base_cfg.validate();
  if (base_cfg.total_steps < 2) throw ConfigError("the mask experiment needs total_steps >= 2");
  const std::filesystem::path root = base_cfg.output_dir;

  MaskExperimentResult result;
  result.mask_step = base_cfg.mask_step();

  ExperimentConfig prefix_cfg = base_cfg;
  prefix_cfg.intervention.mask = MaskControl::kNone;
  prefix_cfg.output_dir = (root / "prefix").string();
  std::optional<TrainingSession> prefix;
  std::string prefix_error;
  std::optional<std::int64_t> prefix_failed;
  try {
    prefix.emplace(prefix_cfg, corpus);
    // Steps 0..mask_step are shared; the mask step's own update is unmasked.
    prefix->advance_to(result.mask_step + 1);
  } catch (const DivergenceError& e) {
    prefix_failed = e.step();
  }

  for (MaskControl control : {MaskControl::kNone, MaskControl::kActivity, MaskControl::kRandom}) {
    MaskArm arm;
    arm.name = control == MaskControl::kNone ? "baseline" : std::string(to_string(control));
    arm.dir = root / arm.name;
    if (prefix_failed) {
      arm.run.status = "diverged";
      arm.run.failed_step = prefix_failed;
      result.arms.push_back(std::move(arm));
      continue;
    }
    ExperimentConfig arm_cfg = base_cfg;
    arm_cfg.intervention.mask = control;
    arm_cfg.output_dir = arm.dir.string();
    try {
      TrainingSession s = prefix->fork(arm_cfg);
      if (control != MaskControl::kNone) arm.mask_cardinality = s.apply_planned_mask().cardinalities();
      arm.run = s.finish();
    } catch (const std::exception& e) {
      arm.run.status = "failed";
      arm.error = e.what();
    }
    result.arms.push_back(std::move(arm));
  }
  std::filesystem::remove_all(root / "prefix");

  CsvTable table({"arm", "status", "val_loss", "val_accuracy", "relative_loss_vs_baseline", "mask_units",
                  "threshold", "meets_threshold"});
  json summary{{"mask_step", result.mask_step},
               {"activity_tolerance", kActivityMaskTolerance},
               {"random_penalty", kRandomMaskPenalty},
               {"note", "thresholds are desk-scale operationalizations"},
               {"arms", json::array()}};
  for (const auto& a : result.arms) {
    std::size_t units = 0;
    for (auto c : a.mask_cardinality) units += c;
    const auto rel = a.name == "baseline" ? std::optional<double>(0.0) : result.relative_loss(a.name);
    std::string threshold = "-", meets = "-";
    if (a.name == "activity") {
      threshold = "|rel| <= 0.02";
      if (rel) meets = std::abs(*rel) <= kActivityMaskTolerance ? "yes" : "no";
    } else if (a.name == "random") {
      threshold = "rel >= 0.10";
      if (rel) meets = *rel >= kRandomMaskPenalty ? "yes" : "no";
    }
    table.add_row({a.name, a.run.status, a.run.eval ? CsvTable::cell(a.run.eval->loss) : "nan",
                   a.run.eval ? CsvTable::cell(a.run.eval->accuracy) : "nan", rel ? CsvTable::cell(*rel) : "nan",
                   a.name == "baseline" ? "-" : CsvTable::cell(units), threshold, meets});
    json aj{{"name", a.name}, {"dir", a.dir.string()}, {"status", a.run.status}, {"mask_cardinality", a.mask_cardinality}};
    aj["val_loss"] = a.run.eval ? json(a.run.eval->loss) : json(nullptr);
    aj["val_accuracy"] = a.run.eval ? json(a.run.eval->accuracy) : json(nullptr);
    aj["relative_loss"] = rel ? json(*rel) : json(nullptr);
    aj["failed_step"] = a.run.failed_step ? json(*a.run.failed_step) : json(nullptr);
    if (!a.error.empty()) aj["error"] = a.error;
    summary["arms"].push_back(aj);
  }
  std::filesystem::create_directories(root);
  table.write(root / "mask_experiment.csv");
  std::ofstream(root / "mask_experiment.json") << summary.dump(2) << '\n';
  return result;
}

CapacityPlan capacity_plan_from_counts(std::span<const std::size_t> round1_hidden,
                                       std::span<const std::size_t> used_counts) {
  if (round1_hidden.size() != used_counts.size()) throw PlanError("one used count per layer is required");
  CapacityPlan plan;
  for (std::size_t l = 0; l < used_counts.size(); ++l) {
    if (used_counts[l] == 0) throw PlanError("layer " + std::to_string(l) + " used no hidden units in round 1");
    if (used_counts[l] > round1_hidden[l]) {
      throw PlanError("layer " + std::to_string(l) + " used " + std::to_string(used_counts[l]) + " of only " +
                      std::to_string(round1_hidden[l]) + " units");
    }
    plan.hidden.push_back(used_counts[l]);
  }
  return plan;
}

CapacityPlan capacity_plan_from_usage(std::span<const std::size_t> round1_hidden,
                                      std::span<const double> converged_batch_use) {
  if (round1_hidden.size() != converged_batch_use.size()) throw PlanError("one usage value per layer is required");
  std::vector<std::size_t> used;
  for (std::size_t l = 0; l < round1_hidden.size(); ++l) {
    const double f = converged_batch_use[l];
    if (!(f >= 0.0 && f <= 1.0)) throw PlanError("batch-use fraction of layer " + std::to_string(l) + " outside [0, 1]");
    used.push_back(static_cast<std::size_t>(std::llround(f * static_cast<double>(round1_hidden[l]))));
  }
  return capacity_plan_from_counts(round1_hidden, used);
}

namespace {

std::vector<double> converged_batch_use(const std::vector<SparsityRecord>& records, std::size_t n_layers) {
  const auto conv = converged_records(records);
  if (conv.size() != n_layers) throw PlanError("run lacks converged records for every layer");
  std::vector<double> out;
  for (const auto& r : conv) out.push_back(r.batch_use);
  return out;
}

}  // namespace

CapacityResult run_capacity_rerun(const ExperimentConfig& config, const std::filesystem::path& round1_dir) {
  const RunArtifacts round1 = load_artifacts(round1_dir);
  if (round1.status != "complete") throw PlanError("round-1 run in " + round1_dir.string() + " is not complete");
  const auto& h1 = round1.config.model.d_hidden;
  const auto use1 = converged_batch_use(round1.records, h1.size());

  CapacityResult result;
  result.plan = capacity_plan_from_usage(h1, use1);
  result.round1_eval = round1.eval;

  ExperimentConfig cfg = config;
  if (cfg.model.n_layers != h1.size()) throw ConfigError("round-2 config must have the round-1 layer count");
  cfg.model.d_hidden = result.plan.hidden;
  cfg.seed = config.seed + config.intervention.capacity_seed_offset;
  cfg.intervention.mask = MaskControl::kNone;
  result.round2_dir = std::filesystem::path(config.output_dir) / "round2";
  cfg.output_dir = result.round2_dir.string();
  result.round2 = run_experiment(cfg);

  std::vector<double> use2;
  if (result.round2.status == "complete") use2 = converged_batch_use(load_artifacts(result.round2_dir).records, h1.size());

  CsvTable table({"layer", "round1_hidden", "round1_used", "round1_used_pct", "round2_hidden", "round2_used",
                  "round2_used_pct"});
  for (std::size_t l = 0; l < h1.size(); ++l) {
    CapacityRow row;
    row.layer = l;
    row.round1_hidden = h1[l];
    row.round1_used = result.plan.hidden[l];
    row.round1_fraction = static_cast<double>(row.round1_used) / static_cast<double>(h1[l]);
    row.round2_hidden = result.plan.hidden[l];
    if (!use2.empty()) {
      row.round2_used = static_cast<std::size_t>(std::llround(use2[l] * static_cast<double>(row.round2_hidden)));
      row.round2_fraction = static_cast<double>(row.round2_used) / static_cast<double>(row.round2_hidden);
    } else {
      row.round2_fraction = std::nan("");
    }
    result.rows.push_back(row);
    table.add_row({CsvTable::cell(l), CsvTable::cell(row.round1_hidden), CsvTable::cell(row.round1_used),
                   CsvTable::cell(100.0 * row.round1_fraction), CsvTable::cell(row.round2_hidden),
                   use2.empty() ? "nan" : CsvTable::cell(row.round2_used), CsvTable::cell(100.0 * row.round2_fraction)});
  }
  std::filesystem::create_directories(config.output_dir);
  table.write(std::filesystem::path(config.output_dir) / "table4_capacity_rerun.csv");

  json summary{{"round1_dir", round1_dir.string()},
               {"round2_dir", result.round2_dir.string()},
               {"round2_status", result.round2.status},
               {"plan", result.plan.hidden}};
  summary["round1_val_loss"] = result.round1_eval ? json(result.round1_eval->loss) : json(nullptr);
  summary["round2_val_loss"] = result.round2.eval ? json(result.round2.eval->loss) : json(nullptr);
  std::ofstream(std::filesystem::path(config.output_dir) / "capacity_rerun.json") << summary.dump(2) << '\n';
  return result;
}

}  // namespace relu_sparsity
