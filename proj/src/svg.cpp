#include "csilab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "csilab/errors.hpp"

namespace csilab::svg {

namespace {

constexpr int kWidth = 800;
constexpr int kHeight = 500;
constexpr int kMarginL = 70, kMarginR = 160, kMarginT = 50, kMarginB = 60;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                         "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

} // namespace

void write_line_chart(const LineChart& chart, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);

  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const Series& s : chart.series) {
    for (const auto& [x, y] : s.points) {
      const double xv = chart.log2_x ? std::log2(x) : x;
      x_lo = std::min(x_lo, xv);
      x_hi = std::max(x_hi, xv);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  }
  if (!(x_lo <= x_hi)) { x_lo = 0.0; x_hi = 1.0; }
  if (!(y_lo <= y_hi)) { y_lo = 0.0; y_hi = 1.0; }
  if (x_hi == x_lo) { x_lo -= 0.5; x_hi += 0.5; }
  if (y_hi == y_lo) { y_lo -= 0.5; y_hi += 0.5; }
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  const double plot_w = kWidth - kMarginL - kMarginR;
  const double plot_h = kHeight - kMarginT - kMarginB;
  auto sx = [&](double x) {
    const double xv = chart.log2_x ? std::log2(x) : x;
    return kMarginL + (xv - x_lo) / (x_hi - x_lo) * plot_w;
  };
  auto sy = [&](double y) { return kMarginT + (y_hi - y) / (y_hi - y_lo) * plot_h; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
      << "font-family=\"sans-serif\">" << chart.title << "</text>\n";

  // axes
  out << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT << "\" x2=\"" << kMarginL
      << "\" y2=\"" << kMarginT + plot_h << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT + plot_h << "\" x2=\""
      << kMarginL + plot_w << "\" y2=\"" << kMarginT + plot_h << "\" stroke=\"black\"/>\n";

  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double fy = y_lo + (y_hi - y_lo) * i / kTicks;
    const double py = sy(fy);
    out << "<line x1=\"" << kMarginL - 4 << "\" y1=\"" << fmt(py) << "\" x2=\"" << kMarginL
        << "\" y2=\"" << fmt(py) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kMarginL - 8 << "\" y=\"" << fmt(py + 4)
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt_tick(fy)
        << "</text>\n";
    const double fxv = x_lo + (x_hi - x_lo) * i / kTicks;
    const double fx = chart.log2_x ? std::exp2(fxv) : fxv;
    const double px = kMarginL + (fxv - x_lo) / (x_hi - x_lo) * plot_w;
    out << "<line x1=\"" << fmt(px) << "\" y1=\"" << kMarginT + plot_h << "\" x2=\"" << fmt(px)
        << "\" y2=\"" << kMarginT + plot_h + 4 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt(px) << "\" y=\"" << kMarginT + plot_h + 18
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
        << fmt_tick(fx) << "</text>\n";
  }
  out << "<text x=\"" << kMarginL + plot_w / 2 << "\" y=\"" << kHeight - 16
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << chart.x_label
      << "</text>\n";
  out << "<text x=\"18\" y=\"" << kMarginT + plot_h / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" transform=\"rotate(-90 18 "
      << kMarginT + plot_h / 2 << ")\">" << chart.y_label << "</text>\n";

  int color = 0;
  int legend_y = kMarginT + 10;
  for (const Series& s : chart.series) {
    const char* c = kColors[color % 8];
    if (!s.points.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
      for (const auto& [x, y] : s.points) out << fmt(sx(x)) << "," << fmt(sy(y)) << " ";
      out << "\"/>\n";
      for (const auto& [x, y] : s.points)
        out << "<circle cx=\"" << fmt(sx(x)) << "\" cy=\"" << fmt(sy(y)) << "\" r=\"3\" fill=\""
            << c << "\"/>\n";
    }
    out << "<rect x=\"" << kMarginL + plot_w + 12 << "\" y=\"" << legend_y - 9
        << "\" width=\"12\" height=\"12\" fill=\"" << c << "\"/>\n";
    out << "<text x=\"" << kMarginL + plot_w + 30 << "\" y=\"" << legend_y + 2
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << s.name << "</text>\n";
    legend_y += 18;
    ++color;
  }
  out << "</svg>\n";
}

} // namespace csilab::svg
