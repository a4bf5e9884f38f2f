#pragma once

#include <string>
#include <vector>

#include "lossland/landscape.hpp"

namespace lossland {

struct PlotStyle {
    int width = 640;
    int height = 480;
    int margin = 56;
    std::string title;
    std::string x_label;
    std::string y_label;
};

struct ScatterSeries {
    std::string label;
    std::string color = "#1f6fb2";
    std::vector<double> xs;
    std::vector<double> ys;
};

struct BarGroup {
    std::string label;
    std::vector<double> values;   // one per series
    std::vector<double> errors;   // error-bar half-lengths; may be empty
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares y = slope*x + intercept; needs >= 2 points with
/// nonzero x spread.
LineFit least_squares_fit(const std::vector<double> &xs, const std::vector<double> &ys);

/// One rect per lattice cell, loss mapped to a blue-to-red ramp. Non-finite
/// cells are drawn in grey.
std::string surface_heatmap_svg(const SurfaceGrid &grid, const PlotStyle &style);

/// Iso-loss contour polylines via marching squares at evenly spaced levels.
std::string surface_contour_svg(const SurfaceGrid &grid, int levels,
                                const PlotStyle &style);

/// Scatter with an OLS fit line per series; slope and intercept are embedded
/// in a <metadata> block.
std::string scatter_svg(const std::vector<ScatterSeries> &series, const PlotStyle &style);

/// Grouped bar chart with optional error bars.
std::string grouped_bars_svg(const std::vector<std::string> &series_labels,
                             const std::vector<BarGroup> &groups, const PlotStyle &style);

void write_svg(const std::string &svg, const std::string &path);

}  // namespace lossland
