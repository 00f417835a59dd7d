#pragma once

#include <string>
#include <vector>

namespace optlab {
namespace svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;  // fitted overlays are drawn dashed, data solid
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = true;
  bool log_y = true;
};

// fixed 860x520 canvas, decade ticks on log axes, nice 1/2/5 steps otherwise;
// the output depends only on the inputs, never on locale or clock
std::string line_plot(const std::vector<Series>& series, const PlotOptions& opts);

struct Bar {
  std::string label;
  double value = 0.0;
};

// vertical bars with a dashed parity line at one when it falls in range
std::string bar_chart(const std::vector<Bar>& bars, const std::string& title,
                      const std::string& y_label);

}  // namespace svg
}  // namespace optlab
