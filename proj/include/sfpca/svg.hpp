#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace sfpca {

/// One plotted series: line or scatter, optionally with a shaded band.
struct PlotSeries {
  Eigen::VectorXd x, y;
  std::string color = "#1f6fb4";
  double width = 1.5;
  bool points = false;                // scatter markers instead of a line
  Eigen::VectorXd band_low, band_high;  // same length as x when present
  std::string band_color = "#c8ddf0";
};

struct PlotSpec {
  std::string title, x_label, y_label;
  std::vector<PlotSeries> series;
  std::vector<double> h_lines;  // dashed horizontal reference lines
};

/**
 * Renders a fixed-layout 720x480 line/scatter plot. Output is fully
 * deterministic: same spec, same bytes. Axis limits come from the data with
 * a 4% margin; ticks at 5 round positions per axis.
 */
std::string render_svg(const PlotSpec& spec);

/// Renders and writes atomically.
void write_svg(const std::string& path, const PlotSpec& spec);

}  // namespace sfpca
