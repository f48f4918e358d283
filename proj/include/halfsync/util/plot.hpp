#pragma once

#include <string>
#include <utility>
#include <vector>

namespace halfsync::util {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log2_x = false;
  int width = 640;
  int height = 420;
};

/// Standalone SVG line chart with axes, ticks and a legend.
std::string render_svg(const PlotSpec& spec, const std::vector<Series>& series);

/// Writes render_svg output; throws Error when the file cannot be written.
void write_svg(const std::string& path, const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace halfsync::util
