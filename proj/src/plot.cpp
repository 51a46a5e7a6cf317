#include "denim/plot.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "denim/common.hpp"

namespace denim {

namespace {

constexpr int kWidth = 800;
constexpr int kHeight = 600;
constexpr int kMarginLeft = 80;
constexpr int kMarginRight = 40;
constexpr int kMarginTop = 50;
constexpr int kMarginBottom = 70;

const cv::Scalar kSeriesColors[] = {
    {180, 60, 30}, {40, 60, 200}, {60, 150, 60}, {30, 140, 220}, {160, 60, 160}, {90, 90, 90},
};

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace

void write_plot_png(const std::vector<PlotSeries>& series, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::string& path) {
    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    std::size_t total_points = 0;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) throw ArgError("plot: non-finite point in series " + s.label);
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
            ++total_points;
        }
    }
    if (total_points == 0) throw ArgError("plot: no points to draw");
    if (x_min == x_max) {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if (y_min == y_max) {
        y_min -= 0.5;
        y_max += 0.5;
    }

    cv::Mat canvas(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
    const int plot_w = kWidth - kMarginLeft - kMarginRight;
    const int plot_h = kHeight - kMarginTop - kMarginBottom;
    const auto to_px = [&](double x, double y) {
        const int px = kMarginLeft + static_cast<int>(std::lround((x - x_min) / (x_max - x_min) * plot_w));
        const int py = kMarginTop + plot_h - static_cast<int>(std::lround((y - y_min) / (y_max - y_min) * plot_h));
        return cv::Point(px, py);
    };

    const cv::Scalar black(0, 0, 0);
    const cv::Scalar grey(210, 210, 210);
    for (int t = 0; t <= 5; ++t) {
        const double fx = x_min + (x_max - x_min) * t / 5.0;
        const double fy = y_min + (y_max - y_min) * t / 5.0;
        const cv::Point px = to_px(fx, y_min);
        const cv::Point py = to_px(x_min, fy);
        cv::line(canvas, cv::Point(px.x, kMarginTop), cv::Point(px.x, kMarginTop + plot_h), grey, 1);
        cv::line(canvas, cv::Point(kMarginLeft, py.y), cv::Point(kMarginLeft + plot_w, py.y), grey, 1);
        cv::putText(canvas, tick_label(fx), cv::Point(px.x - 15, kMarginTop + plot_h + 20), cv::FONT_HERSHEY_SIMPLEX,
                    0.4, black, 1, cv::LINE_AA);
        cv::putText(canvas, tick_label(fy), cv::Point(8, py.y + 4), cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1,
                    cv::LINE_AA);
    }
    cv::rectangle(canvas, cv::Point(kMarginLeft, kMarginTop), cv::Point(kMarginLeft + plot_w, kMarginTop + plot_h),
                  black, 1);
    cv::putText(canvas, title, cv::Point(kMarginLeft, 30), cv::FONT_HERSHEY_SIMPLEX, 0.7, black, 1, cv::LINE_AA);
    cv::putText(canvas, xlabel, cv::Point(kMarginLeft + plot_w / 2 - 40, kHeight - 20), cv::FONT_HERSHEY_SIMPLEX, 0.5,
                black, 1, cv::LINE_AA);
    cv::putText(canvas, ylabel, cv::Point(8, kMarginTop - 12), cv::FONT_HERSHEY_SIMPLEX, 0.5, black, 1, cv::LINE_AA);

    int legend_y = kMarginTop + 18;
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const cv::Scalar color = kSeriesColors[si % (sizeof(kSeriesColors) / sizeof(kSeriesColors[0]))];
        std::vector<std::pair<double, double>> pts = s.points;
        std::sort(pts.begin(), pts.end());
        cv::Point prev;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const cv::Point p = to_px(pts[i].first, pts[i].second);
            cv::circle(canvas, p, 4, color, cv::FILLED, cv::LINE_AA);
            if (!s.scatter_only && i > 0) cv::line(canvas, prev, p, color, 2, cv::LINE_AA);
            prev = p;
        }
        if (!s.label.empty()) {
            const int lx = kMarginLeft + plot_w - 170;
            cv::line(canvas, cv::Point(lx, legend_y - 4), cv::Point(lx + 24, legend_y - 4), color, 3);
            cv::putText(canvas, s.label, cv::Point(lx + 30, legend_y), cv::FONT_HERSHEY_SIMPLEX, 0.45, black, 1,
                        cv::LINE_AA);
            legend_y += 20;
        }
    }

    bool written = false;
    try {
        written = cv::imwrite(path, canvas);
    } catch (const cv::Exception& e) {
        throw IoError("failed to write plot to " + path + ": " + e.what());
    }
    if (!written) throw IoError("failed to write plot to " + path);
}

}  // namespace denim
