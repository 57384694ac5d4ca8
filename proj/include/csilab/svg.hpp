#pragma once

#include <string>
#include <vector>

namespace csilab::svg {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log2_x = false; // plot x on a log2 axis (ratios 1/2, 1/4, ...)
  std::vector<Series> series;
};

/// Writes a deterministic standalone SVG line chart.
void write_line_chart(const LineChart& chart, const std::string& path);

} // namespace csilab::svg
