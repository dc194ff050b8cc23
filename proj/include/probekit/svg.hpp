#pragma once

// Minimal deterministic SVG charts. Identical inputs give identical bytes:
// numbers are printed with fixed precision and nothing depends on time or
// locale.

#include <optional>
#include <string>
#include <vector>

namespace probekit::svg {

struct LineSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band;  // optional +-band around y, same length as y
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<LineSeries> series;
  std::optional<double> reference_y;  // dashed horizontal line, e.g. 0 for difference curves
};

struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> categories;    // groups along the x axis
  std::vector<std::string> series_names;  // bars inside each group
  std::vector<std::vector<double>> values;  // [series][category]
  std::vector<std::vector<double>> errors;  // optional, same shape
};

struct ScatterPoint {
  std::string label;
  double x = 0.0;
  double y = 0.0;
};

struct FitLine {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

struct ScatterChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<ScatterPoint> points;
  std::optional<FitLine> fit;
};

std::string render(const LineChart& chart);
std::string render(const BarChart& chart);
std::string render(const ScatterChart& chart);

std::string escape_xml(const std::string& s);

}  // namespace probekit::svg
