#include "relu_sparsity/experiment.hpp"

#include <cmath>
#include <cstdio>

#include "relu_sparsity/errors.hpp"
#include "relu_sparsity/report.hpp"
#include "relu_sparsity/svg_chart.hpp"

namespace relu_sparsity {

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kPeakLr: return "peak_lr";
    case SweepAxis::kDHidden: return "d_hidden";
    case SweepAxis::kNLayers: return "n_layers";
  }
  return "peak_lr";
}

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "peak_lr") return SweepAxis::kPeakLr;
  if (text == "d_hidden") return SweepAxis::kDHidden;
  if (text == "n_layers") return SweepAxis::kNLayers;
  throw ConfigError("unknown sweep axis '" + std::string(text) + "' (expected peak_lr, d_hidden or n_layers)");
}

namespace {

std::size_t positive_integer(double value, SweepAxis axis) {
  if (!(value >= 1.0) || value != std::floor(value)) {
    throw ConfigError(std::string(to_string(axis)) + " sweep values must be positive integers");
  }
  return static_cast<std::size_t>(value);
}

std::string value_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

ExperimentConfig with_axis_value(const ExperimentConfig& base, SweepAxis axis, double value) {
  ExperimentConfig c = base;
  switch (axis) {
    case SweepAxis::kPeakLr:
      c.peak_lr = value;
      break;
    case SweepAxis::kDHidden:
      c.model.d_hidden.assign(c.model.n_layers, positive_integer(value, axis));
      break;
    case SweepAxis::kNLayers: {
      const std::size_t width = c.model.d_hidden.empty() ? 512 : c.model.d_hidden.front();
      c.model.n_layers = positive_integer(value, axis);
      c.model.d_hidden.assign(c.model.n_layers, width);
      break;
    }
  }
  c.validate();
  return c;
}

SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("a sweep needs at least one value");
  SweepResult result;
  result.axis = axis;
  const std::filesystem::path root = base.output_dir;
  const std::string axis_name(to_string(axis));
  for (double v : values) {
    SweepArm arm;
    arm.value = v;
    arm.dir = root / ("sweep_" + axis_name + "_" + value_label(v));
    try {
      ExperimentConfig c = with_axis_value(base, axis, v);
      c.output_dir = arm.dir.string();
      arm.hidden = c.model.d_hidden;
      arm.run = run_experiment(c);
      if (arm.run.status == "complete") {
        double used = 0.0, available = 0.0;
        for (const auto& r : converged(load_artifacts(arm.dir))) {
          arm.token_use.push_back(r.token_use);
          arm.batch_use.push_back(r.batch_use);
          used += r.batch_use * static_cast<double>(arm.hidden[r.layer]);
          available += static_cast<double>(arm.hidden[r.layer]);
        }
        arm.total_batch_use = used / available;
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      arm.run.status = "failed";
      arm.error = e.what();
    }
    result.arms.push_back(std::move(arm));
  }

  std::size_t max_layers = 0;
  for (const auto& a : result.arms) max_layers = std::max(max_layers, a.hidden.size());
  std::vector<std::string> header{"layer"};
  for (const auto& a : result.arms) header.push_back(axis_name + "=" + value_label(a.value));
  CsvTable batch(header), token(header);
  auto pct_cell = [](const std::vector<double>& v, std::size_t l) {
    return l < v.size() ? CsvTable::cell(100.0 * v[l]) : std::string("nan");
  };
  for (std::size_t l = 0; l < max_layers; ++l) {
    std::vector<std::string> brow{CsvTable::cell(l)}, trow{CsvTable::cell(l)};
    for (const auto& a : result.arms) {
      brow.push_back(pct_cell(a.batch_use, l));
      trow.push_back(pct_cell(a.token_use, l));
    }
    batch.add_row(std::move(brow));
    token.add_row(std::move(trow));
  }
  std::vector<std::string> total{"Total"}, status{"status"};
  for (const auto& a : result.arms) {
    total.push_back(a.batch_use.empty() ? "nan" : CsvTable::cell(100.0 * a.total_batch_use));
    status.push_back(a.run.status);
  }
  batch.add_row(std::move(total));
  batch.add_row(std::move(status));
  std::filesystem::create_directories(root);
  batch.write(root / ("table5_sweep_" + axis_name + ".csv"));
  token.write(root / ("table5_sweep_" + axis_name + "_token_use.csv"));

  std::vector<ChartSeries> series;
  double x_min = values.front(), x_max = values.front();
  for (double v : values) x_min = std::min(x_min, v), x_max = std::max(x_max, v);
  if (x_max == x_min) x_max = x_min + 1.0;
  for (std::size_t l = 0; l < max_layers; ++l) {
    ChartSeries s;
    s.label = "layer " + std::to_string(l);
    for (const auto& a : result.arms)
      if (l < a.batch_use.size()) s.points.emplace_back(a.value, a.batch_use[l]);
    series.push_back(std::move(s));
  }
  ChartSpec spec;
  spec.title = "converged batch use vs " + axis_name;
  spec.x_label = axis_name;
  spec.y_label = "fraction of hidden units";
  spec.x_min = x_min;
  spec.x_max = x_max;
  write_text_file(root / ("fig_sweep_" + axis_name + "_batch_use.svg"), render_line_chart(spec, series));
  return result;
}

}  // namespace relu_sparsity
