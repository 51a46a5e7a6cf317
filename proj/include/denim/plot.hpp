#pragma once

#include <string>
#include <utility>
#include <vector>

namespace denim {

// One named series on a 2-D chart. Points are drawn as markers, connected
// by line segments unless scatter_only is set.
struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
    bool scatter_only = false;
};

// Renders a simple chart (axes, ticks, legend) to a PNG file.
void write_plot_png(const std::vector<PlotSeries>& series, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::string& path);

}  // namespace denim
