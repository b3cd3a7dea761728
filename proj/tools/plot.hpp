#pragma once

#include <string>
#include <vector>

namespace fpd::tools {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Renders line series into a PNG. Throws fpd::Error on empty input or
// unwritable path.
void render_plot(const std::string& path, const std::vector<Series>& series,
                 const std::string& title, const std::string& x_label,
                 const std::string& y_label);

}  // namespace fpd::tools
