#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace purcellkit {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct SvgOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 860;
  int height = 520;
};

namespace svg_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
  return colors[i % (sizeof(colors) / sizeof(colors[0]))];
}

struct AxisScale {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;
  double map(double v) const {
    const double t = log ? std::log10(v) : v;
    return (t - lo) / (hi - lo);
  }
  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (double d = std::ceil(lo); d <= std::floor(hi) + 1e-9; d += 1.0)
        out.push_back(std::pow(10.0, d));
      if (out.size() >= 2) return out;
    }
    const int n = 5;
    for (int i = 0; i <= n; ++i) {
      const double t = lo + (hi - lo) * i / n;
      out.push_back(log ? std::pow(10.0, t) : t);
    }
    return out;
  }
};

inline AxisScale fit_scale(const std::vector<SvgSeries>& series, bool use_x,
                           bool log) {
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& s : series) {
    const auto& v = use_x ? s.x : s.y;
    for (double val : v) {
      if (!std::isfinite(val)) continue;
      if (log && !(val > 0.0)) continue;
      const double t = log ? std::log10(val) : val;
      if (!any) {
        lo = hi = t;
        any = true;
      } else {
        lo = std::min(lo, t);
        hi = std::max(hi, t);
      }
    }
  }
  if (!any) throw std::domain_error("svg plot: no finite data to plot");
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  } else {
    const double pad = 0.04 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  return {lo, hi, log};
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

}  // namespace svg_detail

// Line plot with auto-scaled axes, tick labels and a legend. Output bytes
// depend only on the inputs.
inline void write_svg_plot(const std::string& path,
                           const std::vector<SvgSeries>& series,
                           const SvgOptions& opt = {}) {
  using namespace svg_detail;
  if (series.empty()) throw std::domain_error("svg plot: no series");
  for (const auto& s : series)
    if (s.x.size() != s.y.size() || s.x.empty())
      throw std::domain_error("svg plot: series '" + s.label +
                              "' needs matching non-empty x and y");

  const AxisScale sx = fit_scale(series, true, opt.log_x);
  const AxisScale sy = fit_scale(series, false, opt.log_y);

  const double ml = 70, mr = 20, mt = opt.title.empty() ? 16 : 36, mb = 48;
  const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
  auto px = [&](double v) { return ml + pw * sx.map(v); };
  auto py = [&](double v) { return mt + ph * (1.0 - sy.map(v)); };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("svg plot: cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width
      << "\" height=\"" << opt.height << "\" viewBox=\"0 0 " << opt.width << " "
      << opt.height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  if (!opt.title.empty())
    out << "<text x=\"" << opt.width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
        << "font-size=\"15\">" << escape(opt.title) << "</text>\n";

  for (double t : sx.ticks()) {
    const double x = px(t);
    out << "<line x1=\"" << num(x) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(x)
        << "\" y2=\"" << num(mt + ph) << "\" stroke=\"#e0e0e0\"/>\n";
    out << "<text x=\"" << num(x) << "\" y=\"" << num(mt + ph + 16)
        << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
  }
  for (double t : sy.ticks()) {
    const double y = py(t);
    out << "<line x1=\"" << num(ml) << "\" y1=\"" << num(y) << "\" x2=\""
        << num(ml + pw) << "\" y2=\"" << num(y) << "\" stroke=\"#e0e0e0\"/>\n";
    out << "<text x=\"" << num(ml - 6) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  out << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw)
      << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"#404040\"/>\n";
  if (!opt.x_label.empty())
    out << "<text x=\"" << num(ml + pw / 2) << "\" y=\"" << num(mt + ph + 36)
        << "\" text-anchor=\"middle\">" << escape(opt.x_label) << "</text>\n";
  if (!opt.y_label.empty())
    out << "<text transform=\"translate(16," << num(mt + ph / 2)
        << ") rotate(-90)\" text-anchor=\"middle\">" << escape(opt.y_label)
        << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    out << "<polyline fill=\"none\" stroke=\"" << palette(k)
        << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (opt.log_x && !(s.x[i] > 0.0)) continue;
      if (opt.log_y && !(s.y[i] > 0.0)) continue;
      if (!first) out << " ";
      out << num(px(s.x[i])) << "," << num(py(s.y[i]));
      first = false;
    }
    out << "\"/>\n";
  }

  double ly = mt + 14;
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (series[k].label.empty()) continue;
    const double lx = ml + pw - 150;
    out << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
        << num(lx + 22) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << palette(k)
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(lx + 28) << "\" y=\"" << num(ly) << "\">"
        << escape(series[k].label) << "</text>\n";
    ly += 16;
  }
  out << "</g>\n</svg>\n";
}

}  // namespace purcellkit
