// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal dependency-free SVG line plots for run diagnostics: multiple
// series, linear or log-10 y axis, optional dashed vertical marker (used
// for the stage-switch step), legend.

#pragma once

#include <string>
#include <vector>

#include "sild/numerics.hpp"

namespace sild {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color;  // empty: assigned from the default palette
};

struct PlotOptions {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool logy = false;
  double vline = std::numeric_limits<double>::quiet_NaN();  // NaN: none
  std::string vline_label;
  int width = 760;
  int height = 480;
};

// Renders the series to a standalone SVG document. Non-finite points (and,
// on a log axis, non-positive ones) are skipped, breaking the polyline.
// Throws std::invalid_argument if no series contributes a drawable point
// or a series has mismatched x/y lengths.
std::string render_line_plot(const std::vector<Series>& series,
                             const PlotOptions& opt);

void write_file(const std::string& path, const std::string& content);

}  // namespace sild
