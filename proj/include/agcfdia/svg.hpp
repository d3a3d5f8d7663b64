#pragma once

// Static SVG figures: three-channel trajectory plot and confusion heatmap.
// Output depends only on the inputs (fixed-precision coordinates).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>
#include <string_view>

#include "agc.hpp"
#include "evaluate.hpp"

namespace agcfdia::svg {

namespace detail {

inline std::string num(double v, const char* fmt = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

inline std::string escape(std::string_view s) {
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

/// Round axis step (1, 2 or 5 times a power of ten) giving about `target` ticks.
inline double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  return (r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0) * mag;
}

}  // namespace detail

/// Three stacked panels (f1, f2, ptie) against time.
inline std::string trajectory_plot(const Trajectory& traj, std::string_view title = "") {
  constexpr double width = 900, panel_h = 200, top = 40, left = 90, right = 20, gap = 40;
  const double height = top + 3 * panel_h + 2 * gap + 50;
  const double plot_w = width - left - right;
  constexpr std::array<std::string_view, 3> labels{"measured df1 (Hz)", "measured df2 (Hz)", "measured dPtie (pu)"};
  constexpr std::array<std::string_view, 3> colors{"#1f77b4", "#d62728", "#2ca02c"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::escape(title)
       << "</text>\n";

  const double t0 = traj.t.empty() ? 0.0 : traj.t.front();
  const double t1 = traj.t.empty() ? 1.0 : std::max(traj.t.back(), t0 + 1e-9);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto& ys = traj.channel(kChannels[c]);
    double lo = 0.0, hi = 0.0;
    for (double v : ys) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo < 1e-12) {
      lo -= 1.0;
      hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const double y_top = top + static_cast<double>(c) * (panel_h + gap);
    auto X = [&](double t) { return left + (t - t0) / (t1 - t0) * plot_w; };
    auto Y = [&](double v) { return y_top + (hi - v) / (hi - lo) * panel_h; };

    os << "<g>\n<rect x=\"" << left << "\" y=\"" << y_top << "\" width=\"" << plot_w << "\" height=\"" << panel_h
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    const double step = detail::nice_step(hi - lo, 4);
    for (double v = std::ceil(lo / step) * step; v <= hi; v += step) {
      const double y = Y(v);
      os << "<line x1=\"" << left << "\" x2=\"" << left + plot_w << "\" y1=\"" << detail::num(y) << "\" y2=\""
         << detail::num(y) << "\" stroke=\"#ddd\"/>\n";
      os << "<text x=\"" << left - 6 << "\" y=\"" << detail::num(y + 4) << "\" text-anchor=\"end\">"
         << detail::num(std::abs(v) < step * 1e-6 ? 0.0 : v, "%.3g") << "</text>\n";
    }
    if (lo < 0.0 && hi > 0.0)
      os << "<line x1=\"" << left << "\" x2=\"" << left + plot_w << "\" y1=\"" << detail::num(Y(0.0)) << "\" y2=\""
         << detail::num(Y(0.0)) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
    os << "<text transform=\"translate(18," << detail::num(y_top + panel_h / 2)
       << ") rotate(-90)\" text-anchor=\"middle\">" << labels[c] << "</text>\n";
    os << "<polyline fill=\"none\" stroke=\"" << colors[c] << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i)
      os << (i ? " " : "") << detail::num(X(traj.t[i])) << ',' << detail::num(Y(ys[i]));
    os << "\"/>\n</g>\n";
  }

  const double axis_y = top + 3 * panel_h + 2 * gap;
  const double tstep = detail::nice_step(t1 - t0, 8);
  for (double t = std::ceil(t0 / tstep) * tstep; t <= t1 + 1e-9; t += tstep) {
    const double x = left + (t - t0) / (t1 - t0) * plot_w;
    os << "<text x=\"" << detail::num(x) << "\" y=\"" << axis_y - gap + 16 << "\" text-anchor=\"middle\">"
       << detail::num(t, "%g") << "</text>\n";
  }
  os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << axis_y << "\" text-anchor=\"middle\">time (s)</text>\n";
  os << "</svg>\n";
  return os.str();
}

/// Row-normalized confusion heatmap with percentages and counts per cell.
inline std::string confusion_heatmap(const evaluate::EvaluationReport& report, std::string_view title = "") {
  constexpr double cell = 110, left = 140, top = 70;
  const double width = left + 4 * cell + 30, height = top + 4 * cell + 60;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const std::string heading = title.empty() ? report.classifier : std::string(title);
  if (!heading.empty())
    os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::escape(heading)
       << "</text>\n";
  os << "<text x=\"" << left + 2 * cell << "\" y=\"" << top - 28 << "\" text-anchor=\"middle\">predicted</text>\n";
  os << "<text transform=\"translate(20," << top + 2 * cell << ") rotate(-90)\" text-anchor=\"middle\">actual</text>\n";

  for (std::size_t c = 0; c < 4; ++c) {
    os << "<text x=\"" << left + (static_cast<double>(c) + 0.5) * cell << "\" y=\"" << top - 8
       << "\" text-anchor=\"middle\">" << evaluate::kClassNames[c] << "</text>\n";
    os << "<text x=\"" << left - 8 << "\" y=\"" << top + (static_cast<double>(c) + 0.5) * cell + 4
       << "\" text-anchor=\"end\">" << evaluate::kClassNames[c] << "</text>\n";
  }
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      const double pct = report.percent_matrix[r][c];
      const double s = std::clamp(pct / 100.0, 0.0, 1.0);
      const int red = static_cast<int>(std::lround(255 - s * (255 - 8)));
      const int green = static_cast<int>(std::lround(255 - s * (255 - 69)));
      const int blue = static_cast<int>(std::lround(255 - s * (255 - 148)));
      char fill[16];
      std::snprintf(fill, sizeof fill, "#%02x%02x%02x", red, green, blue);
      const double x = left + static_cast<double>(c) * cell, y = top + static_cast<double>(r) * cell;
      const char* ink = s > 0.5 ? "white" : "black";
      os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
         << fill << "\" stroke=\"#999\"/>\n";
      os << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 << "\" text-anchor=\"middle\" font-size=\"16\" fill=\""
         << ink << "\">" << evaluate::fixed2(pct) << "%</text>\n";
      os << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 20 << "\" text-anchor=\"middle\" fill=\"" << ink
         << "\">n=" << detail::num(report.counts[r][c], "%g") << "</text>\n";
    }
  os << "<text x=\"" << left << "\" y=\"" << top + 4 * cell + 30 << "\">weighted accuracy "
     << evaluate::fixed2(report.metrics.weighted_accuracy) << "%, detected FDIAs "
     << evaluate::fixed2(report.metrics.detected_fdias) << "%, F1 " << evaluate::fixed2(report.metrics.f1)
     << "%</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace agcfdia::svg
