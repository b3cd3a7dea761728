#include "plot.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "fpd/common.hpp"

namespace fpd::tools {
namespace {

constexpr int kWidth = 900;
constexpr int kHeight = 620;
constexpr int kMarginL = 80;
constexpr int kMarginR = 40;
constexpr int kMarginT = 50;
constexpr int kMarginB = 60;

const std::vector<cv::Scalar> kPalette = {
    {180, 60, 40},  {40, 110, 200}, {50, 160, 60},  {30, 30, 200},
    {160, 40, 160}, {20, 140, 160}, {100, 100, 40},
};

std::string tick_label(double v) {
  char buf[32];
  if (std::abs(v) >= 1000.0 || (std::abs(v) < 0.01 && v != 0.0)) {
    std::snprintf(buf, sizeof(buf), "%.2g", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.3g", v);
  }
  return buf;
}

}  // namespace

void render_plot(const std::string& path, const std::vector<Series>& series,
                 const std::string& title, const std::string& x_label,
                 const std::string& y_label) {
  if (series.empty()) throw ContractError("render_plot: no series to draw");
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size() || s.x.empty()) {
      throw ContractError("render_plot: series '" + s.label + "' is empty or ragged");
    }
    for (size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y1 = y0 + 1.0;
  const double ypad = 0.05 * (y1 - y0);
  y0 -= ypad;
  y1 += ypad;

  cv::Mat canvas(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
  const int px0 = kMarginL, px1 = kWidth - kMarginR;
  const int py0 = kHeight - kMarginB, py1 = kMarginT;
  auto to_px = [&](double x, double y) {
    const int px = px0 + static_cast<int>(std::lround((x - x0) / (x1 - x0) * (px1 - px0)));
    const int py = py0 - static_cast<int>(std::lround((y - y0) / (y1 - y0) * (py0 - py1)));
    return cv::Point(px, py);
  };

  for (int i = 0; i <= 5; ++i) {
    const double fx = x0 + (x1 - x0) * i / 5.0;
    const double fy = y0 + (y1 - y0) * i / 5.0;
    const cv::Point gx = to_px(fx, y0), gy = to_px(x0, fy);
    cv::line(canvas, cv::Point(gx.x, py0), cv::Point(gx.x, py1),
             cv::Scalar(225, 225, 225), 1, cv::LINE_8);
    cv::line(canvas, cv::Point(px0, gy.y), cv::Point(px1, gy.y),
             cv::Scalar(225, 225, 225), 1, cv::LINE_8);
    cv::putText(canvas, tick_label(fx), cv::Point(gx.x - 15, py0 + 20),
                cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(60, 60, 60), 1);
    cv::putText(canvas, tick_label(fy), cv::Point(8, gy.y + 4),
                cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(60, 60, 60), 1);
  }
  cv::rectangle(canvas, cv::Point(px0, py1), cv::Point(px1, py0),
                cv::Scalar(30, 30, 30), 1);
  cv::putText(canvas, title, cv::Point(kMarginL, 30), cv::FONT_HERSHEY_SIMPLEX,
              0.65, cv::Scalar(20, 20, 20), 1);
  cv::putText(canvas, x_label, cv::Point((px0 + px1) / 2 - 40, kHeight - 18),
              cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(20, 20, 20), 1);
  cv::putText(canvas, y_label, cv::Point(8, kMarginT - 12),
              cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(20, 20, 20), 1);

  for (size_t si = 0; si < series.size(); ++si) {
    const auto color = kPalette[si % kPalette.size()];
    const auto& s = series[si];
    for (size_t i = 1; i < s.x.size(); ++i) {
      cv::line(canvas, to_px(s.x[i - 1], s.y[i - 1]), to_px(s.x[i], s.y[i]),
               color, 2, cv::LINE_8);
    }
    cv::putText(canvas, s.label,
                cv::Point(px1 - 220, py1 + 22 + 20 * static_cast<int>(si)),
                cv::FONT_HERSHEY_SIMPLEX, 0.45, color, 1);
  }

  if (!cv::imwrite(path, canvas)) {
    throw IoError("render_plot: cannot write " + path);
  }
}

}  // namespace fpd::tools
