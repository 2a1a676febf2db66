// Figure primitives: locally weighted smoothing (tricube weights, one
// iteration, span as a fraction of points), empirical CDF step data,
// histograms, and a minimal static-SVG line chart. Every figure is emitted
// next to a CSV twin so results stay inspectable without a plotting stack.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "fairdcov/core.hpp"

namespace fairdcov {

// Lowess: weighted linear fit at each sorted x with tricube weights over the
// span-nearest neighbours. Single iteration, no robustness reweighting, so
// output is a deterministic function of the input.
struct LowessPoint {
  double x = 0.0;
  double fitted = 0.0;
};

inline std::vector<LowessPoint> lowess(std::span<const double> x, std::span<const double> y,
                                       double span = 1.0) {
  if (x.size() != y.size()) throw ShapeMismatch("lowess: sizes differ");
  if (x.empty()) throw EmptyInput("lowess: empty input");
  if (!(span > 0.0 && span <= 1.0)) throw ConfigError("lowess: span must be in (0,1]");
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

  const std::size_t window = std::max<std::size_t>(2, static_cast<std::size_t>(
                                                          std::ceil(span * static_cast<double>(n))));
  std::vector<LowessPoint> out(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const double x0 = x[order[pos]];
    // Nearest `window` points by |x - x0| over the sorted order.
    std::size_t lo = pos, hi = pos;
    while (hi - lo + 1 < window) {
      const bool can_left = lo > 0;
      const bool can_right = hi + 1 < n;
      if (!can_left && !can_right) break;
      const double dl = can_left ? x0 - x[order[lo - 1]] : std::numeric_limits<double>::infinity();
      const double dr = can_right ? x[order[hi + 1]] - x0 : std::numeric_limits<double>::infinity();
      if (dl <= dr)
        --lo;
      else
        ++hi;
    }
    double dmax = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) dmax = std::max(dmax, std::abs(x[order[k]] - x0));
    if (dmax == 0.0) dmax = 1.0;

    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (std::size_t k = lo; k <= hi; ++k) {
      const double xi = x[order[k]];
      const double yi = y[order[k]];
      const double u = std::abs(xi - x0) / dmax;
      const double w = u < 1.0 ? std::pow(1.0 - u * u * u, 3.0) : 0.0;
      sw += w;
      swx += w * xi;
      swy += w * yi;
      swxx += w * xi * xi;
      swxy += w * xi * yi;
    }
    const double denom = sw * swxx - swx * swx;
    double fitted;
    if (std::abs(denom) < 1e-12 || sw == 0.0) {
      fitted = sw > 0.0 ? swy / sw : y[order[pos]];
    } else {
      const double slope = (sw * swxy - swx * swy) / denom;
      const double intercept = (swy - slope * swx) / sw;
      fitted = intercept + slope * x0;
    }
    out[pos] = {x0, fitted};
  }
  return out;
}

// Step function through the exact empirical quantiles; no smoothing.
struct EcdfPoint {
  double value = 0.0;
  double fraction = 0.0;
};

inline std::vector<EcdfPoint> ecdf(std::span<const double> values) {
  if (values.empty()) throw EmptyInput("ecdf: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<EcdfPoint> out(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    out[i] = {sorted[i], static_cast<double>(i + 1) / static_cast<double>(sorted.size())};
  return out;
}

// ---------------------------------------------------------------------------
// SVG line charts
// ---------------------------------------------------------------------------

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool step = false;  // render as an ECDF-style step path
};

inline void write_svg_chart(const std::string& path, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            const std::vector<Series>& series) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  const double width = 640, height = 420, ml = 70, mr = 160, mt = 40, mb = 50;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;
  const auto px = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * (width - ml - mr); };
  const auto py = [&](double v) { return height - mb - (v - ymin) / (ymax - ymin) * (height - mt - mb); };

  std::ofstream out(path);
  if (!out) throw ConfigError("write_svg_chart: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << height - mb << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double fx = xmin + (xmax - xmin) * tick / 4.0;
    const double fy = ymin + (ymax - ymin) * tick / 4.0;
    out << "<text x=\"" << px(fx) << "\" y=\"" << height - mb + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fx << "</text>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << py(fy) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fy << "</text>\n";
  }
  out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << (mt + height - mb) / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (mt + height - mb) / 2 << ")\">" << y_label << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    const char* color = kColors[s % 10];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (ser.step && i > 0) out << px(ser.x[i]) << "," << py(ser.y[i - 1]) << " ";
      out << px(ser.x[i]) << "," << py(ser.y[i]) << " ";
    }
    out << "\"/>\n";
    const double ly = mt + 16.0 * static_cast<double>(s);
    out << "<line x1=\"" << width - mr + 10 << "\" y1=\"" << ly << "\" x2=\"" << width - mr + 30
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << width - mr + 34 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
        << ser.name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace fairdcov
