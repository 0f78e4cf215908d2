#pragma once

#include <optional>
#include <string>
#include <vector>

#include "unfolder/histogram.hpp"

namespace unfolder::svg {

struct Series {
  std::string label;
  Axis axis;
  Vector<double> values;
  std::optional<Vector<double>> errors;
  std::string color = "#1f77b4";
};

struct PlotOptions {
  std::string title;
  std::string x_label = "x";
  std::string y_label = "density";
  bool log_y = false;
  int width = 900;
  int height = 520;
};

/// Histogram contents divided by bin width, with stat_err as error bars.
Series density_series(const Histogram& h, std::string label, std::string color);

/// Step lines with vertical error bars, axes with ticks, and a legend.
/// Output depends only on the inputs.
std::string render(const std::vector<Series>& series, const PlotOptions& options);

}  // namespace unfolder::svg
