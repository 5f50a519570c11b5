#include "relu_sparsity/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "relu_sparsity/errors.hpp"
#include "relu_sparsity/session.hpp"
#include "relu_sparsity/svg_chart.hpp"

namespace relu_sparsity {

using nlohmann::json;

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw ArgumentError("CSV row width does not match header");
  rows_.push_back(std::move(cells));
}

std::string CsvTable::str() const {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return os.str();
}

void CsvTable::write(const std::filesystem::path& path) const { write_text_file(path, str()); }

std::string CsvTable::cell(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string CsvTable::cell(std::size_t v) { return std::to_string(v); }
std::string CsvTable::cell(std::int64_t v) { return std::to_string(v); }

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ReportError("cannot read table " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw ReportError("table " + path.string() + " is empty");
  CsvTable t(split(line));
  while (std::getline(in, line))
    if (!line.empty()) t.add_row(split(line));
  return t;
}

namespace {

constexpr const char* kSeriesNames[] = {"token_use", "seq_use", "batch_use", "p50", "p65", "p75", "p90"};

double series_value(const SparsityRecord& r, std::size_t series) {
  switch (series) {
    case 0: return r.token_use;
    case 1: return r.seq_use;
    case 2: return r.batch_use;
    default: return r.percentile_use[series - 3];
  }
}

std::string all_series(std::size_t layer) {
  std::string s;
  for (const char* name : kSeriesNames) s += (s.empty() ? "" : ", ") + std::string("layer ") + std::to_string(layer) + " " + name;
  return s;
}

}  // namespace

RunArtifacts load_artifacts(const std::filesystem::path& run_dir) {
  RunArtifacts run;
  run.dir = run_dir;
  const auto config_path = run_dir / artifacts::kConfig;
  if (!std::filesystem::exists(config_path)) throw ReportError("no " + config_path.string() + " in run directory");
  try {
    run.config = load_config(config_path);
  } catch (const ConfigError& e) {
    throw ReportError(std::string("unreadable run config: ") + e.what());
  }
  run.config_hash = config_hash(run.config);
  const std::size_t n_layers = run.config.model.n_layers;

  const auto metrics_path = run_dir / artifacts::kMetrics;
  if (std::filesystem::exists(metrics_path)) {
    try {
      run.records = read_records(metrics_path);
    } catch (const FormatError& e) {
      throw ReportError(std::string("unreadable metric stream: ") + e.what());
    }
  }
  std::set<std::size_t> present;
  for (const auto& r : run.records) present.insert(r.layer);
  std::vector<std::string> absent;
  for (std::size_t l = 0; l < n_layers; ++l)
    if (!present.count(l)) absent.push_back(all_series(l));
  if (!absent.empty()) {
    std::string msg = run.records.empty() ? "metric stream " + metrics_path.string() + " is missing or empty"
                                          : "metric stream " + metrics_path.string() + " is incomplete";
    msg += "; absent series: ";
    for (std::size_t i = 0; i < absent.size(); ++i) msg += (i ? "; " : "") + absent[i];
    throw ReportError(msg);
  }

  if (std::filesystem::exists(run_dir / artifacts::kLosses)) run.losses = read_losses(run_dir / artifacts::kLosses);
  if (std::filesystem::exists(run_dir / artifacts::kLifecycle)) {
    std::ifstream in(run_dir / artifacts::kLifecycle);
    const json j = json::parse(in);
    std::vector<NeuronLifecycle> lcs;
    for (const auto& lj : j.at("layers")) lcs.push_back(lifecycle_from_json(lj));
    run.lifecycles = std::move(lcs);
  }
  if (std::filesystem::exists(run_dir / artifacts::kEval)) {
    std::ifstream in(run_dir / artifacts::kEval);
    const json j = json::parse(in);
    run.eval = EvalResult{j.at("val_loss").get<double>(), j.at("val_accuracy").get<double>(),
                          j.at("tokens").get<std::size_t>()};
  }
  if (std::filesystem::exists(run_dir / artifacts::kStatus)) {
    std::ifstream in(run_dir / artifacts::kStatus);
    run.status = json::parse(in).at("status").get<std::string>();
  }
  return run;
}

std::vector<SparsityRecord> converged(const RunArtifacts& run) { return converged_records(run.records); }

ReportFiles write_report(const RunArtifacts& run, const std::filesystem::path& out_dir) {
  if (run.records.empty()) throw ReportError("cannot report an empty metric stream");
  std::filesystem::create_directories(out_dir);
  ReportFiles files;
  const std::span<const NeuronLifecycle> lcs =
      run.lifecycles ? std::span<const NeuronLifecycle>(*run.lifecycles) : std::span<const NeuronLifecycle>();
  files.summary_tables = summarize(run.records, lcs);
  const SummaryTables& t = files.summary_tables;
  const auto& hash = run.config_hash;
  auto pct = [](double v) { return CsvTable::cell(100.0 * v); };

  CsvTable t1({"layer", "token_use_pct", "seq_use_pct", "batch_use_pct", "token_over_seq", "seq_over_batch",
               "config_hash"});
  for (const auto& r : t.use) {
    t1.add_row({CsvTable::cell(r.layer), pct(r.token_use), pct(r.seq_use), pct(r.batch_use),
                CsvTable::cell(r.token_over_seq), CsvTable::cell(r.seq_over_batch), hash});
  }
  files.tables.push_back(out_dir / "table1_use_at_convergence.csv");
  t1.write(files.tables.back());

  if (run.lifecycles) {
    CsvTable t2({"layer", "hidden", "on_first_pct", "turned_on_pct", "turned_off_pct", "final_use_pct",
                 "transient_off_pct", "transient_on_pct", "config_hash"});
    for (const auto& r : t.lifecycle) {
      t2.add_row({CsvTable::cell(r.layer), CsvTable::cell(r.hidden), pct(r.on_first), pct(r.turned_on),
                  pct(r.turned_off), pct(r.final_use), pct(r.transient_off), pct(r.transient_on), hash});
    }
    files.tables.push_back(out_dir / "table2_lifecycle.csv");
    t2.write(files.tables.back());
  }

  CsvTable t3({"layer", "p50_pct", "p65_pct", "p75_pct", "p90_pct", "config_hash"});
  for (const auto& r : t.percentiles)
    t3.add_row({CsvTable::cell(r.layer), pct(r.values[0]), pct(r.values[1]), pct(r.values[2]), pct(r.values[3]), hash});
  files.tables.push_back(out_dir / "table3_percentiles.csv");
  t3.write(files.tables.back());

  // Figures: per-layer series for every metric, full run and first 10%.
  std::int64_t last_step = 0;
  for (const auto& r : run.records) last_step = std::max(last_step, r.step);
  const std::int64_t horizon = run.config.total_steps > 0 ? run.config.total_steps : last_step;
  std::map<std::size_t, std::vector<const SparsityRecord*>> by_layer;
  for (const auto& r : run.records) by_layer[r.layer].push_back(&r);
  for (std::size_t s = 0; s < std::size(kSeriesNames); ++s) {
    for (bool early : {false, true}) {
      const double x_max = std::max(1.0, early ? 0.1 * static_cast<double>(horizon) : static_cast<double>(horizon));
      std::vector<ChartSeries> series;
      for (const auto& [layer, recs] : by_layer) {
        ChartSeries cs;
        cs.label = "layer " + std::to_string(layer);
        for (const auto* r : recs)
          if (static_cast<double>(r->step) <= x_max) cs.points.emplace_back(static_cast<double>(r->step), series_value(*r, s));
        series.push_back(std::move(cs));
      }
      ChartSpec spec;
      spec.title = std::string(kSeriesNames[s]) + (early ? " (first 10% of training)" : "") + " per layer";
      spec.y_label = s < 3 ? "fraction of hidden units" : "fraction of sequence";
      spec.x_max = x_max;
      const auto path = out_dir / ("fig_" + std::string(kSeriesNames[s]) + (early ? "_early" : "") + ".svg");
      write_text_file(path, render_line_chart(spec, series));
      files.figures.push_back(path);
    }
  }

  std::ostringstream os;
  os << "run: " << run.dir.string() << "\n";
  os << "config_hash: " << hash << "\n";
  if (!run.status.empty()) os << "status: " << run.status << "\n";
  os << "tokens per metric batch: " << run.config.batch_size * run.config.model.seq_len
     << " (batch " << run.config.batch_size << " x seq " << run.config.model.seq_len
     << "; per-batch fractions depend on this count)\n";
  if (run.eval) {
    os << "validation loss: " << CsvTable::cell(run.eval->loss) << "\n";
    os << "validation top-1 accuracy: " << CsvTable::cell(run.eval->accuracy) << "\n";
  }
  os << "token/batch use correlation across layers (Pearson): " << CsvTable::cell(t.token_batch_correlation) << "\n";
  if (!run.lifecycles) os << "lifecycle table omitted: no lifecycle.json in the run directory\n";
  os << "convergence: values are means over the last 5% of logged steps (" << t.window_steps
     << " logged steps from step " << t.window_first_step << ")\n";
  files.summary = out_dir / "summary.txt";
  write_text_file(files.summary, os.str());
  return files;
}

ReportFiles report(const std::filesystem::path& run_dir) {
  return write_report(load_artifacts(run_dir), run_dir / "report");
}

}  // namespace relu_sparsity
