#include "relu_sparsity/svg_chart.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "relu_sparsity/errors.hpp"

namespace relu_sparsity {

namespace {

constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string render_line_chart(const ChartSpec& spec, std::span<const ChartSeries> series) {
  if (!(spec.x_max > spec.x_min) || !(spec.y_max > spec.y_min)) throw ArgumentError("chart axis range is empty");
  const double left = 70, right = 150, top = 40, bottom = 55;
  const double pw = spec.width - left - right, ph = spec.height - top - bottom;
  auto px = [&](double x) { return left + (x - spec.x_min) / (spec.x_max - spec.x_min) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - spec.y_min) / (spec.y_max - spec.y_min)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
     << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\" data-x-min=\"" << exact(spec.x_min)
     << "\" data-x-max=\"" << exact(spec.x_max) << "\" data-y-min=\"" << exact(spec.y_min) << "\" data-y-max=\""
     << exact(spec.y_max) << "\" data-x-label=\"" << escape(spec.x_label) << "\" data-y-label=\""
     << escape(spec.y_label) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << spec.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
     << "font-size=\"15\">" << escape(spec.title) << "</text>\n";

  os << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n";
  os << "</g>\n";

  os << "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = spec.y_min + (spec.y_max - spec.y_min) * i / 5.0;
    os << "<line x1=\"" << left - 4 << "\" y1=\"" << num(py(y)) << "\" x2=\"" << left << "\" y2=\"" << num(py(y))
       << "\" stroke=\"black\"/><line x1=\"" << left << "\" y1=\"" << num(py(y)) << "\" x2=\"" << left + pw
       << "\" y2=\"" << num(py(y)) << "\" stroke=\"#e0e0e0\"/>";
    os << "<text x=\"" << left - 8 << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">" << num(y) << "</text>\n";
    const double x = spec.x_min + (spec.x_max - spec.x_min) * i / 5.0;
    os << "<line x1=\"" << num(px(x)) << "\" y1=\"" << top + ph << "\" x2=\"" << num(px(x)) << "\" y2=\""
       << top + ph + 4 << "\" stroke=\"black\"/>";
    os << "<text x=\"" << num(px(x)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << num(x)
       << "</text>\n";
  }
  os << "</g>\n";
  os << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << spec.height - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(spec.x_label)
     << "</text>\n";
  os << "<text transform=\"translate(18," << num(top + ph / 2)
     << ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(spec.y_label)
     << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    std::string pixels, data;
    for (const auto& [x, y] : s.points) {
      if (std::isnan(y) || std::isnan(x)) continue;
      if (!pixels.empty()) pixels += ' ', data += ' ';
      pixels += num(px(x)) + "," + num(py(y));
      data += exact(x) + "," + exact(y);
    }
    os << "<polyline class=\"series\" data-label=\"" << escape(s.label) << "\" fill=\"none\" stroke=\""
       << kPalette[i % kPalette.size()] << "\" stroke-width=\"1.5\" points=\"" << pixels << "\" data-points=\""
       << data << "\"/>\n";
  }

  os << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = top + 10 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << y << "\" x2=\"" << left + pw + 32 << "\" y2=\"" << y
       << "\" stroke=\"" << kPalette[i % kPalette.size()] << "\" stroke-width=\"2\"/>";
    os << "<text x=\"" << left + pw + 38 << "\" y=\"" << y + 4 << "\">" << escape(series[i].label) << "</text>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

}  // namespace relu_sparsity
