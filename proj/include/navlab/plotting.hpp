#pragma once

#include <string>
#include <utility>
#include <vector>

#include "navlab/graph.hpp"

namespace navlab {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

// Minimal static SVG line chart with axes and tick labels; deterministic output.
std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series);

// Graph layout (nodes and edges) with one or more node paths drawn on top.
std::string graph_overlay_svg(const std::string& title, const NavGraph& g,
                              const std::vector<std::pair<std::string, std::vector<int>>>& paths);

// The numeric table behind a chart, one row per point.
std::string series_csv(const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series);

}  // namespace navlab
