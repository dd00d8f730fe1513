// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sild/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sild {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

// Rounds the raw step to 1/2/5 x 10^k, the usual tick spacing.
double nice_step(double span, int target_ticks) {
  const double raw = span / std::max(1, target_ticks);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  double nice = 10.0;
  if (r <= 1.0) {
    nice = 1.0;
  } else if (r <= 2.0) {
    nice = 2.0;
  } else if (r <= 5.0) {
    nice = 5.0;
  }
  return nice * mag;
}

std::vector<double> linear_ticks(double lo, double hi, int target = 6) {
  std::vector<double> out;
  if (!(hi > lo)) {
    out.push_back(lo);
    return out;
  }
  const double step = nice_step(hi - lo, target);
  double t = std::ceil(lo / step) * step;
  for (; t <= hi + 0.5 * step; t += step) {
    out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return out;
}

std::vector<double> decade_ticks(double lo_log, double hi_log) {
  std::vector<double> out;
  const int klo = static_cast<int>(std::ceil(lo_log - 1e-9));
  const int khi = static_cast<int>(std::floor(hi_log + 1e-9));
  int stride = 1;
  while ((khi - klo) / stride > 8) ++stride;
  for (int k = klo; k <= khi; k += stride) out.push_back(k);
  if (out.empty()) out.push_back(0.5 * (lo_log + hi_log));
  return out;
}

std::string pow10_label(double k) {
  if (std::abs(k - std::round(k)) < 1e-9) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "1e%d", static_cast<int>(std::round(k)));
    return buf;
  }
  return fmt(std::pow(10.0, k));
}

}  // namespace

std::string render_line_plot(const std::vector<Series>& series,
                             const PlotOptions& opt) {
  const double W = opt.width;
  const double H = opt.height;
  const double ml = 78, mr = 24, mt = 42, mb = 58;
  const double pw = W - ml - mr;
  const double ph = H - mt - mb;

  // Data ranges over drawable points only.
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  bool any = false;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) {
      throw std::invalid_argument("svg: series '" + s.label +
                                  "' has mismatched x/y lengths");
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double yv = s.y[i];
      if (!std::isfinite(s.x[i]) || !std::isfinite(yv)) continue;
      if (opt.logy) {
        if (yv <= 0.0) continue;
        yv = std::log10(yv);
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, yv);
      ymax = std::max(ymax, yv);
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("svg: no drawable points");
  if (std::isfinite(opt.vline)) {
    xmin = std::min(xmin, opt.vline);
    xmax = std::max(xmax, opt.vline);
  }
  if (xmax <= xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax <= ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double yv) {
    return mt + ph - (yv - ymin) / (ymax - ymin) * ph;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width
      << "\" height=\"" << opt.height << "\" viewBox=\"0 0 " << opt.width
      << " " << opt.height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<g font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">\n";

  // Grid + ticks.
  const std::vector<double> xticks = linear_ticks(xmin, xmax);
  const std::vector<double> yticks =
      opt.logy ? decade_ticks(ymin, ymax) : linear_ticks(ymin, ymax);
  for (const double t : xticks) {
    const double x = px(t);
    svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(mt) << "\" x2=\""
        << fmt(x) << "\" y2=\"" << fmt(mt + ph)
        << "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(mt + ph + 18)
        << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
  }
  for (const double t : yticks) {
    const double y = py(t);
    svg << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(y) << "\" x2=\""
        << fmt(ml + pw) << "\" y2=\"" << fmt(y)
        << "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << fmt(ml - 8) << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\">"
        << (opt.logy ? pow10_label(t) : fmt(t)) << "</text>\n";
  }
  svg << "<rect x=\"" << fmt(ml) << "\" y=\"" << fmt(mt) << "\" width=\""
      << fmt(pw) << "\" height=\"" << fmt(ph)
      << "\" fill=\"none\" stroke=\"#404040\" stroke-width=\"1\"/>\n";

  // Stage-switch (or other) vertical marker.
  if (std::isfinite(opt.vline)) {
    const double x = px(opt.vline);
    svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(mt) << "\" x2=\""
        << fmt(x) << "\" y2=\"" << fmt(mt + ph)
        << "\" stroke=\"#606060\" stroke-width=\"1.2\" "
           "stroke-dasharray=\"5,4\"/>\n";
    if (!opt.vline_label.empty()) {
      svg << "<text x=\"" << fmt(x + 5) << "\" y=\"" << fmt(mt + 14)
          << "\" fill=\"#606060\">" << escape(opt.vline_label) << "</text>\n";
    }
  }

  // Series polylines (split at gaps).
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const std::string color =
        s.color.empty() ? kPalette[si % (sizeof(kPalette) / sizeof(*kPalette))]
                        : s.color;
    std::string points;
    int run = 0;
    const auto flush = [&]() {
      if (run >= 2) {
        svg << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.6\" points=\"" << points << "\"/>\n";
      }
      points.clear();
      run = 0;
    };
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double yv = s.y[i];
      const bool ok = std::isfinite(s.x[i]) && std::isfinite(yv) &&
                      (!opt.logy || yv > 0.0);
      if (!ok) {
        flush();
        continue;
      }
      if (opt.logy) yv = std::log10(yv);
      if (!points.empty()) points += ' ';
      points += fmt(px(s.x[i])) + "," + fmt(py(yv));
      ++run;
    }
    flush();
  }

  // Legend (top-right inside the plot area).
  double ly = mt + 10;
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    if (s.label.empty()) continue;
    const std::string color =
        s.color.empty() ? kPalette[si % (sizeof(kPalette) / sizeof(*kPalette))]
                        : s.color;
    const double lx = ml + pw - 160;
    svg << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly) << "\" x2=\""
        << fmt(lx + 22) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fmt(lx + 28) << "\" y=\"" << fmt(ly + 4) << "\">"
        << escape(s.label) << "</text>\n";
    ly += 17;
  }

  // Axis labels + title.
  if (!opt.title.empty()) {
    svg << "<text x=\"" << fmt(W / 2) << "\" y=\"24\" text-anchor=\"middle\" "
           "font-size=\"15\" font-weight=\"bold\">"
        << escape(opt.title) << "</text>\n";
  }
  if (!opt.xlabel.empty()) {
    svg << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt(H - 14)
        << "\" text-anchor=\"middle\">" << escape(opt.xlabel) << "</text>\n";
  }
  if (!opt.ylabel.empty()) {
    svg << "<text x=\"18\" y=\"" << fmt(mt + ph / 2)
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << fmt(mt + ph / 2) << ")\">" << escape(opt.ylabel) << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("svg: cannot open '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("svg: write failed for '" + path + "'");
}

}  // namespace sild
