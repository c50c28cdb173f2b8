#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "shiftgauge/csv.hpp"
#include "shiftgauge/errors.hpp"

// Self-contained SVG emission: risk curves, predicted-vs-true scatters with
// the y = x dashed reference and a least-squares line, and division U-curves
// with mean +- std error bars. No plotting dependency.

namespace shiftgauge::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> yerr;  // optional, same length as y when present
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LinearFit least_squares(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 2) throw InputError("least_squares: need >= 2 points");
  double mx = 0, my = 0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0) throw InputError("least_squares: x values are constant");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

namespace detail {

constexpr int kWidth = 640;
constexpr int kHeight = 440;
constexpr int kMarginLeft = 64;
constexpr int kMarginRight = 24;
constexpr int kMarginTop = 28;
constexpr int kMarginBottom = 52;

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  return colors[i % 8];
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) { return csv::fmt_double(v); }

struct Frame {
  double x_lo, x_hi, y_lo, y_hi;

  double px(double x) const {
    return kMarginLeft +
           (x - x_lo) / (x_hi - x_lo) * (kWidth - kMarginLeft - kMarginRight);
  }
  double py(double y) const {
    return kHeight - kMarginBottom -
           (y - y_lo) / (y_hi - y_lo) * (kHeight - kMarginTop - kMarginBottom);
  }
};

inline Frame fit_frame(double x_lo, double x_hi, double y_lo, double y_hi) {
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  if (y_hi <= y_lo) y_hi = y_lo + 1.0;
  double xpad = 0.04 * (x_hi - x_lo);
  double ypad = 0.06 * (y_hi - y_lo);
  return Frame{x_lo - xpad, x_hi + xpad, y_lo - ypad, y_hi + ypad};
}

inline void open_svg(std::ofstream& out, const std::string& title) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(title)
      << "</text>\n";
}

inline void draw_axes(std::ofstream& out, const Frame& f,
                      const std::string& x_label, const std::string& y_label) {
  double x0 = f.px(f.x_lo), x1 = f.px(f.x_hi);
  double y0 = f.py(f.y_lo), y1 = f.py(f.y_hi);
  out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\""
      << num(x1) << "\" y2=\"" << num(y0)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\""
      << num(x0) << "\" y2=\"" << num(y1)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double xv = f.x_lo + (f.x_hi - f.x_lo) * i / 4.0;
    double yv = f.y_lo + (f.y_hi - f.y_lo) * i / 4.0;
    out << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(y0 + 16)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"10\">" << num(std::round(xv * 1000) / 1000)
        << "</text>\n";
    out << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(f.py(yv) + 3)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
        << "font-size=\"10\">" << num(std::round(yv * 1000) / 1000)
        << "</text>\n";
  }
  out << "<text x=\"" << (kMarginLeft + (kWidth - kMarginLeft - kMarginRight) / 2)
      << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"12\">" << xml_escape(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << kHeight / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"12\" transform=\"rotate(-90 16 " << kHeight / 2 << ")\">"
      << xml_escape(y_label) << "</text>\n";
}

inline void polyline(std::ofstream& out, const Frame& f,
                     const std::vector<double>& xs,
                     const std::vector<double>& ys, const char* color,
                     const char* dash = nullptr) {
  out << "<polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\"";
  if (dash) out << " stroke-dasharray=\"" << dash << "\"";
  out << " points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out << " ";
    out << num(f.px(xs[i])) << "," << num(f.py(ys[i]));
  }
  out << "\"/>\n";
}

}  // namespace detail

// Epoch-indexed risk curves, one polyline per series, with a legend.
inline void risk_curve(const std::vector<Series>& series,
                       const std::string& path,
                       const std::string& title = "risk curves") {
  if (series.empty()) throw InputError("risk_curve: empty series list");
  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  for (const auto& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size())
      throw InputError(str_cat("risk_curve: bad series '", s.label, "'"));
    for (double v : s.x) {
      x_lo = std::min(x_lo, v);
      x_hi = std::max(x_hi, v);
    }
    for (double v : s.y) {
      y_lo = std::min(y_lo, v);
      y_hi = std::max(y_hi, v);
    }
  }
  detail::Frame f = detail::fit_frame(x_lo, x_hi, y_lo, y_hi);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(str_cat("cannot open for writing: ", path));
  detail::open_svg(out, title);
  detail::draw_axes(out, f, "epoch", "risk");
  for (std::size_t si = 0; si < series.size(); ++si) {
    detail::polyline(out, f, series[si].x, series[si].y, detail::palette(si));
    out << "<text x=\"" << detail::kWidth - detail::kMarginRight - 150
        << "\" y=\"" << detail::kMarginTop + 14 * (si + 1) << "\" fill=\""
        << detail::palette(si)
        << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << detail::xml_escape(series[si].label) << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError(str_cat("write failed: ", path));
}

// Predicted vs true risks with the dashed y = x perfect-prediction line and
// the least-squares regression line.
inline void scatter_pred_vs_true(
    const std::vector<std::pair<double, double>>& pairs,
    const std::string& path, const std::string& title = "predicted vs true") {
  if (pairs.empty()) throw InputError("scatter: empty series");
  double lo = 1e300, hi = -1e300;
  for (const auto& [t, p] : pairs) {
    lo = std::min({lo, t, p});
    hi = std::max({hi, t, p});
  }
  detail::Frame f = detail::fit_frame(lo, hi, lo, hi);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(str_cat("cannot open for writing: ", path));
  detail::open_svg(out, title);
  detail::draw_axes(out, f, "true target risk", "predicted risk");
  // Perfect prediction reference.
  detail::polyline(out, f, {f.x_lo, f.x_hi}, {f.x_lo, f.x_hi}, "#555555",
                   "6,4");
  if (pairs.size() >= 2) {
    std::vector<std::pair<double, double>> as_xy(pairs.begin(), pairs.end());
    try {
      LinearFit fit = least_squares(as_xy);
      detail::polyline(out, f, {f.x_lo, f.x_hi},
                       {fit.intercept + fit.slope * f.x_lo,
                        fit.intercept + fit.slope * f.x_hi},
                       "#d62728");
    } catch (const InputError&) {
      // constant x: no regression line
    }
  }
  for (const auto& [t, p] : pairs)
    out << "<circle cx=\"" << detail::num(f.px(t)) << "\" cy=\""
        << detail::num(f.py(p)) << "\" r=\"3.5\" fill=\"#1f77b4\"/>\n";
  out << "</svg>\n";
  if (!out) throw IoError(str_cat("write failed: ", path));
}

// Division index vs risk with mean +- std error bars per division.
inline void division_ucurve(const Series& mean_std, const std::string& path,
                            const std::string& title = "division sweep") {
  if (mean_std.x.empty() || mean_std.x.size() != mean_std.y.size() ||
      mean_std.yerr.size() != mean_std.y.size())
    throw InputError("division_ucurve: need x, y, yerr of equal length");
  double y_lo = 1e300, y_hi = -1e300;
  for (std::size_t i = 0; i < mean_std.y.size(); ++i) {
    y_lo = std::min(y_lo, mean_std.y[i] - mean_std.yerr[i]);
    y_hi = std::max(y_hi, mean_std.y[i] + mean_std.yerr[i]);
  }
  detail::Frame f = detail::fit_frame(
      *std::min_element(mean_std.x.begin(), mean_std.x.end()),
      *std::max_element(mean_std.x.begin(), mean_std.x.end()), y_lo, y_hi);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(str_cat("cannot open for writing: ", path));
  detail::open_svg(out, title);
  detail::draw_axes(out, f, "division index", mean_std.label.empty()
                                                  ? "risk"
                                                  : mean_std.label);
  detail::polyline(out, f, mean_std.x, mean_std.y, detail::palette(0));
  for (std::size_t i = 0; i < mean_std.x.size(); ++i) {
    double cx = f.px(mean_std.x[i]);
    double y_top = f.py(mean_std.y[i] + mean_std.yerr[i]);
    double y_bot = f.py(mean_std.y[i] - mean_std.yerr[i]);
    out << "<line x1=\"" << detail::num(cx) << "\" y1=\"" << detail::num(y_top)
        << "\" x2=\"" << detail::num(cx) << "\" y2=\"" << detail::num(y_bot)
        << "\" stroke=\"#1f77b4\" stroke-width=\"1\"/>\n";
    for (double ye : {y_top, y_bot})
      out << "<line x1=\"" << detail::num(cx - 4) << "\" y1=\""
          << detail::num(ye) << "\" x2=\"" << detail::num(cx + 4)
          << "\" y2=\"" << detail::num(ye)
          << "\" stroke=\"#1f77b4\" stroke-width=\"1\"/>\n";
    out << "<circle cx=\"" << detail::num(cx) << "\" cy=\""
        << detail::num(f.py(mean_std.y[i]))
        << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError(str_cat("write failed: ", path));
}

}  // namespace shiftgauge::svg
