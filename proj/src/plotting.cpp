#include "navlab/plotting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "navlab/util.hpp"

namespace navlab {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 480;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 30;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  double span() const { return hi - lo; }
};

Range pad_range(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series) {
  if (series.empty()) throw ValidationError("line_chart: no series");
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const Series& s : series) {
    for (const auto& [x, y] : s.points) {
      xlo = std::min(xlo, x);
      xhi = std::max(xhi, x);
      ylo = std::min(ylo, y);
      yhi = std::max(yhi, y);
    }
  }
  const Range xr = pad_range(xlo, xhi);
  const Range yr = pad_range(ylo, yhi);
  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto px = [&](double x) { return kMarginLeft + (x - xr.lo) / xr.span() * plot_w; };
  auto py = [&](double y) { return kMarginTop + plot_h - (y - yr.lo) / yr.span() * plot_h; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << esc(title) << "</text>\n";

  // axes + ticks
  out << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = xr.lo + xr.span() * i / 5.0;
    const double fy = yr.lo + yr.span() * i / 5.0;
    out << "<line x1=\"" << px(fx) << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\"" << px(fx)
        << "\" y2=\"" << kMarginTop + plot_h + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px(fx) << "\" y=\"" << kMarginTop + plot_h + 20
        << "\" text-anchor=\"middle\" font-size=\"11\">" << format_double(std::round(fx * 1000) / 1000)
        << "</text>\n";
    out << "<line x1=\"" << kMarginLeft - 5 << "\" y1=\"" << py(fy) << "\" x2=\"" << kMarginLeft
        << "\" y2=\"" << py(fy) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << py(fy) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << format_double(std::round(fy * 1000) / 1000)
        << "</text>\n";
  }
  out << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\" font-size=\"13\">" << esc(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << kMarginTop + plot_h / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
      << kMarginTop + plot_h / 2 << ")\">" << esc(y_label) << "</text>\n";

  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : series[s].points) out << px(x) << "," << py(y) << " ";
    out << "\"/>\n";
    for (const auto& [x, y] : series[s].points) {
      out << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    out << "<text x=\"" << kMarginLeft + 10 << "\" y=\"" << kMarginTop + 16 + 16 * s
        << "\" font-size=\"12\" fill=\"" << color << "\">" << esc(series[s].name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string graph_overlay_svg(const std::string& title, const NavGraph& g,
                              const std::vector<std::pair<std::string, std::vector<int>>>& paths) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (int i = 0; i < g.node_count(); ++i) {
    xlo = std::min(xlo, g.node(i).x);
    xhi = std::max(xhi, g.node(i).x);
    ylo = std::min(ylo, g.node(i).y);
    yhi = std::max(yhi, g.node(i).y);
  }
  const Range xr = pad_range(xlo, xhi);
  const Range yr = pad_range(ylo, yhi);
  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto px = [&](double x) { return kMarginLeft + (x - xr.lo) / xr.span() * plot_w; };
  auto py = [&](double y) { return kMarginTop + plot_h - (y - yr.lo) / yr.span() * plot_h; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << esc(title) << "</text>\n";
  for (const auto& [a, b] : g.edges()) {
    out << "<line x1=\"" << px(g.node(a).x) << "\" y1=\"" << py(g.node(a).y) << "\" x2=\""
        << px(g.node(b).x) << "\" y2=\"" << py(g.node(b).y)
        << "\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
  }
  for (int i = 0; i < g.node_count(); ++i) {
    out << "<circle cx=\"" << px(g.node(i).x) << "\" cy=\"" << py(g.node(i).y)
        << "\" r=\"4\" fill=\"#888888\"/>\n";
    out << "<text x=\"" << px(g.node(i).x) + 6 << "\" y=\"" << py(g.node(i).y) - 6
        << "\" font-size=\"10\">" << i << "</text>\n";
  }
  for (size_t p = 0; p < paths.size(); ++p) {
    const char* color = kPalette[p % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2.5\" stroke-dasharray=\"" << (p == 0 ? "" : "6,4")
        << "\" points=\"";
    for (int node : paths[p].second) out << px(g.node(node).x) << "," << py(g.node(node).y) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << kMarginLeft + 10 << "\" y=\"" << kMarginTop + 16 + 16 * p
        << "\" font-size=\"12\" fill=\"" << color << "\">" << esc(paths[p].first) << "</text>\n";
    if (!paths[p].second.empty()) {
      const int start = paths[p].second.front();
      const int end = paths[p].second.back();
      out << "<circle cx=\"" << px(g.node(start).x) << "\" cy=\"" << py(g.node(start).y)
          << "\" r=\"6\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      out << "<rect x=\"" << px(g.node(end).x) - 5 << "\" y=\"" << py(g.node(end).y) - 5
          << "\" width=\"10\" height=\"10\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"2\"/>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::string series_csv(const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series) {
  std::ostringstream out;
  out << "series," << x_label << "," << y_label << "\n";
  for (const Series& s : series) {
    for (const auto& [x, y] : s.points) {
      out << s.name << "," << format_double(x) << "," << format_double(y) << "\n";
    }
  }
  return out.str();
}

}  // namespace navlab
