#include <optlab/svg.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace optlab {
namespace svg {

namespace {

constexpr double kWidth = 860.0, kHeight = 520.0;
constexpr double kLeft = 72.0, kRight = 24.0, kTop = 40.0, kBottom = 52.0;

const char* kPalette[] = {"#1f6fb2", "#d35f2b", "#3a8f3f", "#b2433e",
                          "#7a5aa6", "#7f6245", "#c66ba6", "#5a5a5a"};
constexpr int kPaletteSize = 8;

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

// locale-free short number strings keep the byte stream reproducible
std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string coord(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Axis {
  double lo = 0.0, hi = 1.0;  // in plot space (log10 when logarithmic)
  bool log = false;
  std::vector<double> ticks;  // plot-space tick positions
};

Axis make_axis(double lo, double hi, bool log) {
  Axis ax;
  ax.log = log;
  if (log) {
    ax.lo = std::log10(lo);
    ax.hi = std::log10(hi);
    if (ax.hi - ax.lo < 1e-9) {
      ax.lo -= 0.5;
      ax.hi += 0.5;
    }
    // decade ticks, thinned to at most eight so labels stay readable
    const int first = static_cast<int>(std::ceil(ax.lo - 1e-9));
    const int last = static_cast<int>(std::floor(ax.hi + 1e-9));
    int stride = 1;
    while ((last - first) / stride + 1 > 8) ++stride;
    for (int e = first; e <= last; e += stride) ax.ticks.push_back(static_cast<double>(e));
    if (ax.ticks.empty()) ax.ticks.push_back(0.5 * (ax.lo + ax.hi));
  } else {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    ax.lo = lo;
    ax.hi = hi;
    // nice 1/2/5 step aiming for about six ticks
    const double raw = (hi - lo) / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double mult : {1.0, 2.0, 5.0, 10.0}) {
      if (mag * mult >= raw) {
        step = mag * mult;
        break;
      }
    }
    for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step)
      ax.ticks.push_back(t);
  }
  return ax;
}

double place(const Axis& ax, double v, double lo_px, double hi_px) {
  const double t = ax.log ? std::log10(v) : v;
  return lo_px + (t - ax.lo) / (ax.hi - ax.lo) * (hi_px - lo_px);
}

std::string tick_label(const Axis& ax, double t) {
  if (!ax.log) return num(t);
  char buf[48];
  std::snprintf(buf, sizeof(buf), "1e%d", static_cast<int>(std::lround(t)));
  return buf;
}

void open_canvas(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"#ffffff\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << escape(title) << "</text>\n";
}

void draw_frame(std::ostringstream& out, const Axis* xa, const Axis& ya,
                const std::string& x_label, const std::string& y_label) {
  const double x0 = kLeft, x1 = kWidth - kRight;
  const double y0 = kHeight - kBottom, y1 = kTop;
  if (xa) {
    for (double t : xa->ticks) {
      const double px = kLeft + (t - xa->lo) / (xa->hi - xa->lo) * (x1 - x0);
      out << "<line x1=\"" << coord(px) << "\" y1=\"" << coord(y0) << "\" x2=\"" << coord(px)
          << "\" y2=\"" << coord(y1) << "\" stroke=\"#e0e0e0\"/>\n";
      out << "<text x=\"" << coord(px) << "\" y=\"" << coord(y0 + 18)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
          << tick_label(*xa, t) << "</text>\n";
    }
  }
  for (double t : ya.ticks) {
    const double py = y0 + (t - ya.lo) / (ya.hi - ya.lo) * (y1 - y0);
    out << "<line x1=\"" << coord(x0) << "\" y1=\"" << coord(py) << "\" x2=\"" << coord(x1)
        << "\" y2=\"" << coord(py) << "\" stroke=\"#e0e0e0\"/>\n";
    out << "<text x=\"" << coord(x0 - 6) << "\" y=\"" << coord(py + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << tick_label(ya, t) << "</text>\n";
  }
  out << "<rect x=\"" << coord(x0) << "\" y=\"" << coord(y1) << "\" width=\""
      << coord(x1 - x0) << "\" height=\"" << coord(y0 - y1)
      << "\" fill=\"none\" stroke=\"#404040\"/>\n";
  out << "<text x=\"" << coord((x0 + x1) / 2) << "\" y=\"" << coord(kHeight - 14)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << escape(x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << coord((y0 + y1) / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "transform=\"rotate(-90 18 " << coord((y0 + y1) / 2) << ")\">" << escape(y_label)
      << "</text>\n";
}

}  // namespace

std::string line_plot(const std::vector<Series>& series, const PlotOptions& opts) {
  if (series.empty()) throw std::invalid_argument("line_plot: no series");
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  bool seen = false;
  for (const Series& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size())
      throw std::invalid_argument("line_plot: series '" + s.label + "' is empty or ragged");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (opts.log_x && !(s.x[i] > 0.0))
        throw std::invalid_argument("line_plot: log x-axis needs positive values");
      if (opts.log_y && !(s.y[i] > 0.0))
        throw std::invalid_argument("line_plot: log y-axis needs positive values");
      if (!seen) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        seen = true;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }

  const Axis xa = make_axis(xmin, xmax, opts.log_x);
  const Axis ya = make_axis(ymin, ymax, opts.log_y);
  const double x0 = kLeft, x1 = kWidth - kRight;
  const double y0 = kHeight - kBottom, y1 = kTop;

  std::ostringstream out;
  open_canvas(out, opts.title);
  draw_frame(out, &xa, ya, opts.x_label, opts.y_label);

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kPalette[si % kPaletteSize];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\"";
    if (s.dashed) out << " stroke-dasharray=\"6 4\"";
    out << " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) out << ' ';
      out << coord(place(xa, s.x[i], x0, x1)) << ',' << coord(place(ya, s.y[i], y0, y1));
    }
    out << "\"/>\n";
    if (!s.dashed && s.x.size() <= 64) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        out << "<circle cx=\"" << coord(place(xa, s.x[i], x0, x1)) << "\" cy=\""
            << coord(place(ya, s.y[i], y0, y1)) << "\" r=\"2.4\" fill=\"" << color << "\"/>\n";
      }
    }
  }

  // legend swatches in input order, top-right corner of the plot area
  for (std::size_t si = 0; si < series.size(); ++si) {
    const double ly = y1 + 14 + 16 * static_cast<double>(si);
    out << "<line x1=\"" << coord(x1 - 150) << "\" y1=\"" << coord(ly) << "\" x2=\""
        << coord(x1 - 126) << "\" y2=\"" << coord(ly) << "\" stroke=\""
        << kPalette[si % kPaletteSize] << "\" stroke-width=\"2\"";
    if (series[si].dashed) out << " stroke-dasharray=\"6 4\"";
    out << "/>\n";
    out << "<text x=\"" << coord(x1 - 120) << "\" y=\"" << coord(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(series[si].label)
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string bar_chart(const std::vector<Bar>& bars, const std::string& title,
                      const std::string& y_label) {
  if (bars.empty()) throw std::invalid_argument("bar_chart: no bars");
  double vmax = 0.0, vmin = 0.0;
  for (const Bar& b : bars) {
    vmax = std::max(vmax, b.value);
    vmin = std::min(vmin, b.value);
  }
  if (vmax == vmin && vmax == 0.0) vmax = 1.0;
  const Axis ya = make_axis(std::min(0.0, vmin), vmax * 1.1, false);
  const double x0 = kLeft, x1 = kWidth - kRight;
  const double y0 = kHeight - kBottom, y1 = kTop;

  std::ostringstream out;
  open_canvas(out, title);
  draw_frame(out, nullptr, ya, "", y_label);

  const double span = x1 - x0;
  const double slot = span / static_cast<double>(bars.size());
  const double width = slot * 0.6;
  auto ypix = [&](double v) { return y0 + (v - ya.lo) / (ya.hi - ya.lo) * (y1 - y0); };

  // parity line at one, where a multiplier stops being a win
  if (ya.lo < 1.0 && 1.0 < ya.hi) {
    out << "<line x1=\"" << coord(x0) << "\" y1=\"" << coord(ypix(1.0)) << "\" x2=\""
        << coord(x1) << "\" y2=\"" << coord(ypix(1.0))
        << "\" stroke=\"#808080\" stroke-dasharray=\"4 4\"/>\n";
  }
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double cx = x0 + slot * (static_cast<double>(i) + 0.5);
    const double top = ypix(std::max(0.0, bars[i].value));
    const double base = ypix(std::min(0.0, bars[i].value)) ;
    out << "<rect x=\"" << coord(cx - width / 2) << "\" y=\"" << coord(top) << "\" width=\""
        << coord(width) << "\" height=\"" << coord(std::abs(base - top)) << "\" fill=\""
        << kPalette[i % kPaletteSize] << "\"/>\n";
    out << "<text x=\"" << coord(cx) << "\" y=\"" << coord(top - 6)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << num(bars[i].value) << "</text>\n";
    out << "<text x=\"" << coord(cx) << "\" y=\"" << coord(y0 + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << escape(bars[i].label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace svg
}  // namespace optlab
