#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace relu_sparsity {

struct ChartSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y); NaN y values are skipped
};

struct ChartSpec {
  std::string title;
  std::string x_label = "step";
  std::string y_label = "fraction";
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
  int width = 720, height = 440;
};

// Standalone SVG line chart: one polyline per series plus a legend entry
// with the series label. Besides the drawn (pixel) coordinates, each
// polyline carries its data coordinates in a data-points attribute and the
// root element carries the axis ranges as data-x-min/-x-max/-y-min/-y-max,
// so the figure can be checked by parsing.
std::string render_line_chart(const ChartSpec& spec, std::span<const ChartSeries> series);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace relu_sparsity
