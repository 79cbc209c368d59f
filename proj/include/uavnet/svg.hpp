#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "uavnet/format.hpp"
#include "uavnet/qmix.hpp"

namespace uavnet {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return colors[i % 6];
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Fixed precision keeps the files short and stable.
inline std::string px(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << v;
  return os.str();
}

struct Frame2d {
  double w = 640, h = 400, left = 70, right = 150, top = 40, bottom = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  double sx(double x) const { return left + (x - x0) / (x1 - x0) * (w - left - right); }
  double sy(double y) const { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); }
};

inline void fix_range(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) lo = 0, hi = 1;
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
}

inline void axes(std::ostringstream& os, const Frame2d& f, const std::string& title, const std::string& xlabel,
                 const std::string& ylabel) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.w << "\" height=\"" << f.h << "\" viewBox=\"0 0 "
     << f.w << ' ' << f.h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << px(f.w / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title)
     << "</text>\n";
  const double xa = f.left, xb = f.w - f.right, ya = f.top, yb = f.h - f.bottom;
  os << "<line x1=\"" << px(xa) << "\" y1=\"" << px(yb) << "\" x2=\"" << px(xb) << "\" y2=\"" << px(yb)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << px(xa) << "\" y1=\"" << px(ya) << "\" x2=\"" << px(xa) << "\" y2=\"" << px(yb)
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = f.y0 + (f.y1 - f.y0) * i / 4.0;
    const double y = f.sy(v);
    os << "<line x1=\"" << px(xa - 4) << "\" y1=\"" << px(y) << "\" x2=\"" << px(xa) << "\" y2=\"" << px(y)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px(xa - 6) << "\" y=\"" << px(y + 4) << "\" text-anchor=\"end\">" << format_double(std::round(v * 1000) / 1000)
       << "</text>\n";
  }
  os << "<text x=\"" << px((xa + xb) / 2) << "\" y=\"" << px(f.h - 12) << "\" text-anchor=\"middle\">"
     << xml_escape(xlabel) << "</text>\n";
  os << "<text x=\"16\" y=\"" << px((ya + yb) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << px((ya + yb) / 2) << ")\">" << xml_escape(ylabel) << "</text>\n";
}

inline void legend(std::ostringstream& os, const Frame2d& f, const std::vector<std::string>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = f.top + 10 + 18.0 * i;
    const double x = f.w - f.right + 12;
    os << "<rect x=\"" << px(x) << "\" y=\"" << px(y - 9) << "\" width=\"12\" height=\"10\" fill=\"" << palette(i)
       << "\"/>\n";
    os << "<text x=\"" << px(x + 18) << "\" y=\"" << px(y) << "\">" << xml_escape(labels[i]) << "</text>\n";
  }
}

}  // namespace detail

inline std::string line_chart_svg(const std::vector<SvgSeries>& series, const std::string& title,
                                  const std::string& xlabel, const std::string& ylabel) {
  detail::Frame2d f;
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  detail::fix_range(xlo, xhi);
  detail::fix_range(ylo, yhi);
  f.x0 = xlo, f.x1 = xhi, f.y0 = ylo, f.y1 = yhi;

  std::ostringstream os;
  detail::axes(os, f, title, xlabel, ylabel);
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    labels.push_back(s.label);
    os << "<polyline fill=\"none\" stroke=\"" << detail::palette(k) << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      os << detail::px(f.sx(s.x[i])) << ',' << detail::px(f.sy(s.y[i])) << ' ';
    }
    os << "\"/>\n";
  }
  detail::legend(os, f, labels);
  os << "</svg>\n";
  return os.str();
}

// Groups along x, one bar per series inside a group.
inline std::string bar_chart_svg(const std::vector<std::string>& groups, const std::vector<SvgSeries>& series,
                                 const std::string& title, const std::string& xlabel, const std::string& ylabel) {
  detail::Frame2d f;
  double yhi = 0.0, ylo = 0.0;
  for (const auto& s : series)
    for (double v : s.y)
      if (std::isfinite(v)) yhi = std::max(yhi, v), ylo = std::min(ylo, v);
  detail::fix_range(ylo, yhi);
  f.y0 = ylo;
  f.y1 = yhi * 1.05;
  f.x0 = 0;
  f.x1 = std::max<double>(1, groups.size());

  std::ostringstream os;
  detail::axes(os, f, title, xlabel, ylabel);
  const double group_w = f.sx(1) - f.sx(0);
  const double bar_w = group_w * 0.8 / std::max<std::size_t>(1, series.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = f.sx(static_cast<double>(g));
    os << "<text x=\"" << detail::px(gx + group_w / 2) << "\" y=\"" << detail::px(f.h - f.bottom + 16)
       << "\" text-anchor=\"middle\">" << detail::xml_escape(groups[g]) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
      if (g >= series[k].y.size() || !std::isfinite(series[k].y[g])) continue;
      const double v = series[k].y[g];
      const double top = f.sy(std::max(v, 0.0)), base = f.sy(std::min(v, 0.0));
      os << "<rect x=\"" << detail::px(gx + group_w * 0.1 + bar_w * k) << "\" y=\"" << detail::px(top)
         << "\" width=\"" << detail::px(bar_w) << "\" height=\"" << detail::px(base - top) << "\" fill=\""
         << detail::palette(k) << "\"/>\n";
    }
  }
  std::vector<std::string> labels;
  for (const auto& s : series) labels.push_back(s.label);
  detail::legend(os, f, labels);
  os << "</svg>\n";
  return os.str();
}

// Raw returns plus a trailing 100-episode mean.
inline std::string learning_curve_svg(const std::vector<CurvePoint>& curve, const std::string& label) {
  SvgSeries raw{label + " return", {}, {}}, smooth{"mean of last 100", {}, {}};
  double acc = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    raw.x.push_back(curve[i].episode);
    raw.y.push_back(curve[i].episode_return);
    acc += curve[i].episode_return;
    if (i >= 100) acc -= curve[i - 100].episode_return;
    smooth.x.push_back(curve[i].episode);
    smooth.y.push_back(acc / static_cast<double>(std::min<std::size_t>(i + 1, 100)));
  }
  return line_chart_svg({raw, smooth}, "Learning curve", "episode", "return");
}

}  // namespace uavnet
