// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal static SVG charts for the analytics outputs. Output is a pure function
// of the inputs so plots hash identically across runs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "icurate/analytics.hpp"

namespace icurate {
namespace svg {

inline constexpr double kWidth = 640, kHeight = 480, kMargin = 60;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); }
  double py(double y) const { return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin); }
};

inline Frame frame_for(double x0, double x1, double y0, double y1) {
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y1 = y0 + 1.0;
  return {x0, x1, y0, y1};
}

inline std::string open(const std::string& title, const std::string& xlabel, const std::string& ylabel) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + escape(title) + "</text>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"" + num(kHeight - 16) + "\" text-anchor=\"middle\">" + escape(xlabel) +
       "</text>\n";
  s += "<text x=\"16\" y=\"" + num(kHeight / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num(kHeight / 2) + ")\">" + escape(ylabel) + "</text>\n";
  s += "<rect x=\"" + num(kMargin) + "\" y=\"" + num(kMargin) + "\" width=\"" + num(kWidth - 2 * kMargin) +
       "\" height=\"" + num(kHeight - 2 * kMargin) + "\" fill=\"none\" stroke=\"black\"/>\n";
  return s;
}

inline std::string axis_ticks(const Frame& f, const std::string& xfmt_prefix = "", const std::string& yfmt_prefix = "") {
  std::string s;
  for (int i = 0; i <= 4; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s += "<text x=\"" + num(f.px(x)) + "\" y=\"" + num(kHeight - kMargin + 16) + "\" text-anchor=\"middle\">" +
         xfmt_prefix + num(x) + "</text>\n";
    s += "<text x=\"" + num(kMargin - 6) + "\" y=\"" + num(f.py(y) + 4) + "\" text-anchor=\"end\">" + yfmt_prefix +
         num(y) + "</text>\n";
  }
  return s;
}

}  // namespace svg

inline std::string plot_projection(const std::vector<Point2>& pts, const std::string& title) {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!pts.empty()) {
    x0 = x1 = pts[0].x;
    y0 = y1 = pts[0].y;
    for (const auto& p : pts) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  }
  const auto f = svg::frame_for(x0, x1, y0, y1);
  std::string s = svg::open(title, "component 1", "component 2") + svg::axis_ticks(f);
  for (const auto& p : pts) {
    s += "<circle cx=\"" + svg::num(f.px(p.x)) + "\" cy=\"" + svg::num(f.py(p.y)) +
         "\" r=\"2\" fill=\"steelblue\" fill-opacity=\"0.6\"/>\n";
  }
  return s + "</svg>\n";
}

/// Log-log scatter of the degree spectrum with the fitted line when present.
inline std::string plot_degree_spectrum(const std::map<long, long>& spectrum, const std::optional<PowerLawFit>& fit) {
  std::vector<Point2> pts;
  for (const auto& [d, n] : spectrum) {
    if (d >= 1 && n >= 1) pts.push_back({std::log(static_cast<double>(d)), std::log(static_cast<double>(n))});
  }
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!pts.empty()) {
    x0 = x1 = pts[0].x;
    y0 = y1 = pts[0].y;
    for (const auto& p : pts) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  }
  const auto f = svg::frame_for(x0, x1, y0, y1);
  std::string s = svg::open("Tag co-occurrence degree distribution", "ln degree", "ln frequency") + svg::axis_ticks(f);
  for (const auto& p : pts) {
    s += "<circle cx=\"" + svg::num(f.px(p.x)) + "\" cy=\"" + svg::num(f.py(p.y)) + "\" r=\"3\" fill=\"darkorange\"/>\n";
  }
  if (fit) {
    const auto line_y = [&](double x) { return fit->intercept - fit->gamma * x; };
    s += "<line x1=\"" + svg::num(f.px(f.x0)) + "\" y1=\"" + svg::num(f.py(line_y(f.x0))) + "\" x2=\"" +
         svg::num(f.px(f.x1)) + "\" y2=\"" + svg::num(f.py(line_y(f.x1))) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + svg::num(svg::kWidth - svg::kMargin - 8) + "\" y=\"" + svg::num(svg::kMargin + 18) +
         "\" text-anchor=\"end\">gamma=" + svg::num(fit->gamma) + " R2=" + svg::num(fit->r_squared) + "</text>\n";
  }
  return s + "</svg>\n";
}

inline std::string plot_difficulty(const DifficultyHistogram& h) {
  const long peak = std::max<long>(1, *std::max_element(h.counts.begin(), h.counts.end()));
  const auto f = svg::frame_for(0, 5, 0, static_cast<double>(peak));
  std::string s = svg::open("Difficulty distribution (mean " + svg::num(h.mean) + ")", "difficulty", "instructions");
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double x = f.px(static_cast<double>(i) + 0.1), w = f.px(0.8) - f.px(0);
    const double top = f.py(static_cast<double>(h.counts[i]));
    s += "<rect x=\"" + svg::num(x) + "\" y=\"" + svg::num(top) + "\" width=\"" + svg::num(w) + "\" height=\"" +
         svg::num(f.py(0) - top) + "\" fill=\"seagreen\"/>\n";
    s += "<text x=\"" + svg::num(x + w / 2) + "\" y=\"" + svg::num(svg::kHeight - svg::kMargin + 16) +
         "\" text-anchor=\"middle\">" + kDifficultyLabels[i] + "</text>\n";
    s += "<text x=\"" + svg::num(x + w / 2) + "\" y=\"" + svg::num(top - 4) + "\" text-anchor=\"middle\">" +
         std::to_string(h.counts[i]) + "</text>\n";
  }
  return s + "</svg>\n";
}

}  // namespace icurate
