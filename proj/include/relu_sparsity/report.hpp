#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "relu_sparsity/config.hpp"
#include "relu_sparsity/lifecycle.hpp"
#include "relu_sparsity/metrics.hpp"
#include "relu_sparsity/record_stream.hpp"
#include "relu_sparsity/summary.hpp"
#include "relu_sparsity/trainer.hpp"

namespace relu_sparsity {

// Comma-separated table with a header row. Numbers are written with 17
// significant digits so every cell parses back to the exact double.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells);
  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }
  std::string str() const;
  void write(const std::filesystem::path& path) const;

  static std::string cell(double v);  // "nan" for NaN
  static std::string cell(std::size_t v);
  static std::string cell(std::int64_t v);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Parses a file written by CsvTable (no quoting).
CsvTable read_csv(const std::filesystem::path& path);

// Everything the reporter reads from a run directory.
struct RunArtifacts {
  std::filesystem::path dir;
  ExperimentConfig config;
  std::string config_hash;
  std::vector<SparsityRecord> records;
  std::vector<LossPoint> losses;
  std::optional<std::vector<NeuronLifecycle>> lifecycles;
  std::optional<EvalResult> eval;
  std::string status;  // empty when status.json is absent
};

// ReportError when config.json is missing or the metric stream is missing,
// empty, or lacks some layer; the message lists every absent series.
RunArtifacts load_artifacts(const std::filesystem::path& run_dir);

// Converged per-layer values of a run (means over the convergence window).
std::vector<SparsityRecord> converged(const RunArtifacts& run);

struct ReportFiles {
  std::vector<std::filesystem::path> tables;
  std::vector<std::filesystem::path> figures;
  std::filesystem::path summary;
  SummaryTables summary_tables;
};

// table1_use_at_convergence.csv, table2_lifecycle.csv and
// table3_percentiles.csv (in percent), summary.txt, and per-metric SVG charts
// over the full run and over the first 10% of steps.
ReportFiles write_report(const RunArtifacts& run, const std::filesystem::path& out_dir);

// load_artifacts + write_report into run_dir/report.
ReportFiles report(const std::filesystem::path& run_dir);

}  // namespace relu_sparsity
