// Command-line front end: training runs, sweeps, the masking and capacity
// interventions, reports, and corpus/config scaffolding.
//
// Exit codes: 0 success, 2 configuration error, 3 training divergence,
// 4 report error, 1 anything else.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relu_sparsity/config.hpp"
#include "relu_sparsity/corpus.hpp"
#include "relu_sparsity/errors.hpp"
#include "relu_sparsity/experiment.hpp"
#include "relu_sparsity/interventions.hpp"
#include "relu_sparsity/report.hpp"
#include "relu_sparsity/runtime.hpp"
#include "relu_sparsity/session.hpp"
#include "relu_sparsity/svg_chart.hpp"

namespace rs = relu_sparsity;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitReport = 4;

rs::ExperimentConfig load(const std::string& path, const std::string& output_dir) {
  auto c = rs::load_config(path);
  if (!output_dir.empty()) c.output_dir = output_dir;
  return c;
}

void print_run(const rs::RunResult& r, const std::string& dir) {
  std::cout << dir << ": " << r.status << " at step " << r.final_step;
  if (r.failed_step) std::cout << " (diverged at step " << *r.failed_step << ")";
  if (r.eval) std::cout << ", val_loss " << r.eval->loss << ", val_accuracy " << r.eval->accuracy;
  std::cout << " [config " << r.config_hash << "]\n";
}

}  // namespace

int main(int argc, char** argv) {
  rs::tune_allocator_for_training();
  CLI::App app{"Activation-sparsity instrumented training for small ReLU transformers"};
  app.require_subcommand(1);

  std::string config_path, output_dir, round1_dir, run_dir, axis, corpus_path;
  std::vector<double> values;
  bool resume = false;
  std::optional<std::int64_t> stop_after;
  std::size_t corpus_bytes = 1000000;
  std::uint64_t corpus_seed = 0;

  auto* train = app.add_subcommand("train", "Train one run and write its artifacts and report");
  train->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--output-dir", output_dir, "Override the config's output_dir");
  train->add_flag("--resume", resume, "Continue from the run directory's checkpoint if present");
  train->add_option("--stop-after", stop_after, "Train up to this step, checkpoint and exit");

  auto* sweep = app.add_subcommand("sweep", "Run one arm per value along an axis");
  sweep->add_option("config", config_path, "Base experiment config")->required()->check(CLI::ExistingFile);
  sweep->add_option("--axis", axis, "peak_lr, d_hidden or n_layers")->required();
  sweep->add_option("--values", values, "Axis values")->required()->delimiter(',');
  sweep->add_option("--output-dir", output_dir, "Override the config's output_dir");

  auto* mask = app.add_subcommand("mask-experiment", "Baseline, activity-mask and random-mask arms");
  mask->add_option("config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  mask->add_option("--output-dir", output_dir, "Override the config's output_dir");

  auto* capacity = app.add_subcommand("capacity-rerun", "Retrain with widths set to round-1 used units");
  capacity->add_option("config", config_path, "Round-2 experiment config")->required()->check(CLI::ExistingFile);
  capacity->add_option("round1", round1_dir, "Round-1 run directory")->required()->check(CLI::ExistingDirectory);
  capacity->add_option("--output-dir", output_dir, "Override the config's output_dir");

  auto* report = app.add_subcommand("report", "Tables and figures from a run directory");
  report->add_option("artifacts", run_dir, "Run directory")->required();
  std::string report_out;
  report->add_option("--out", report_out, "Output directory (default <artifacts>/report)");

  auto* make_corpus = app.add_subcommand("make-corpus", "Write a deterministic synthetic English-like corpus");
  make_corpus->add_option("path", corpus_path, "Output text file")->required();
  make_corpus->add_option("--bytes", corpus_bytes, "Corpus size in bytes")->capture_default_str();
  make_corpus->add_option("--seed", corpus_seed, "Generator seed")->capture_default_str();

  auto* init = app.add_subcommand("init-config", "Write a config with the desk-scale defaults");
  std::string init_path;
  init->add_option("path", init_path, "Output config file")->required();
  init->add_option("--corpus", corpus_path, "Corpus path to put in the config")->required();
  init->add_option("--output-dir", output_dir, "Run directory to put in the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) {
      rs::ExperimentConfig c = load(config_path, output_dir);
      auto corpus = rs::load_corpus(c);
      rs::TrainingSession session(c, corpus, resume);
      if (stop_after) {
        if (!session.finished()) {
          session.advance_to(std::min(*stop_after, c.total_steps));
          session.save_checkpoint();
        }
        std::cout << c.output_dir << ": stopped at step " << session.step() << " [config " << session.hash()
                  << "]\n";
        return kExitOk;
      }
      const auto r = session.finish();
      print_run(r, c.output_dir);
      if (r.status == "diverged") return kExitDivergence;
      rs::report(c.output_dir);
      return kExitOk;
    }
    if (*sweep) {
      rs::ExperimentConfig c = load(config_path, output_dir);
      const auto result = rs::run_sweep(c, rs::parse_sweep_axis(axis), values);
      bool any_failed = false;
      for (const auto& a : result.arms) {
        print_run(a.run, a.dir.string());
        if (!a.error.empty()) std::cerr << "  error: " << a.error << "\n";
        any_failed = any_failed || a.run.status != "complete";
        if (a.run.status == "complete") rs::report(a.dir);
      }
      return any_failed ? kExitDivergence : kExitOk;
    }
    if (*mask) {
      rs::ExperimentConfig c = load(config_path, output_dir);
      const auto result = rs::run_mask_experiment(c);
      std::cout << "mask computed at step " << result.mask_step << "\n";
      for (const auto& a : result.arms) {
        print_run(a.run, a.dir.string());
        if (a.run.status == "complete") rs::report(a.dir);
      }
      for (const char* name : {"activity", "random"}) {
        if (auto rel = result.relative_loss(name)) std::cout << name << " vs baseline: " << *rel * 100.0 << "%\n";
      }
      return kExitOk;
    }
    if (*capacity) {
      rs::ExperimentConfig c = load(config_path, output_dir);
      const auto result = rs::run_capacity_rerun(c, round1_dir);
      print_run(result.round2, result.round2_dir.string());
      if (result.round2.status == "diverged") return kExitDivergence;
      rs::report(result.round2_dir);
      for (const auto& row : result.rows) {
        std::cout << "layer " << row.layer << ": round 1 used " << row.round1_used << "/" << row.round1_hidden
                  << ", round 2 used " << row.round2_used << "/" << row.round2_hidden << "\n";
      }
      return kExitOk;
    }
    if (*report) {
      const auto artifacts = rs::load_artifacts(run_dir);
      const auto files = rs::write_report(artifacts, report_out.empty() ? std::filesystem::path(run_dir) / "report"
                                                                        : std::filesystem::path(report_out));
      std::cout << "wrote " << files.tables.size() << " tables, " << files.figures.size() << " figures and "
                << files.summary.string() << "\n";
      return kExitOk;
    }
    if (*make_corpus) {
      rs::write_text_file(corpus_path, rs::synthetic_corpus(corpus_bytes, corpus_seed));
      std::cout << "wrote " << corpus_bytes << " bytes to " << corpus_path << "\n";
      return kExitOk;
    }
    if (*init) {
      rs::ExperimentConfig c;
      c.corpus.path = corpus_path;
      if (!output_dir.empty()) c.output_dir = output_dir;
      rs::save_config(c, init_path);
      std::cout << "wrote " << init_path << "\n";
      return kExitOk;
    }
  } catch (const rs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rs::IngestionError& e) {
    std::cerr << "corpus error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rs::DivergenceError& e) {
    std::cerr << e.what() << "\n";
    return kExitDivergence;
  } catch (const rs::ReportError& e) {
    std::cerr << "report error: " << e.what() << "\n";
    return kExitReport;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
