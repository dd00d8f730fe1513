// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation: exact 2-Wasserstein by optimal assignment (small n), sliced
// W2 by sorted 1-d projections, latent mode coverage, score-error
// decomposition into tangential/normal parts, and log-linear rate fitting
// for decay curves.

#pragma once

#include <functional>

#include "sild/data.hpp"
#include "sild/manifold.hpp"

namespace sild {

// Exact W2 between equal-size empirical measures (columns are points):
// sqrt(min over matchings of mean squared distance). O(n^3) assignment;
// n is capped at 256.
double w2_exact(const Matrix& X, const Matrix& Y);

// Minimum-cost perfect matching value for a square cost matrix (exposed for
// direct testing against brute force).
double assignment_cost(const Matrix& cost);

// Sliced W2: average over n_proj random unit directions of the squared 1-d
// quantile distance, square-rooted. Never exceeds w2_exact.
double w2_sliced(const Matrix& X, const Matrix& Y, Index n_proj, Rng& rng);

struct ModeCoverage {
  std::vector<Index> counts;   // per component
  std::vector<double> freqs;   // counts / n
  Index covered = 0;           // components with at least one sample
};

// Assigns each column of X to the nearest latent mean in A^T coordinates.
ModeCoverage mode_coverage(const LinearManifold& m, const MoGLatentModel& mog,
                           const Matrix& X);

struct ScoreMse {
  double total = 0.0;
  double tangential = 0.0;
  double normal = 0.0;
};

using BatchScoreFn = std::function<Matrix(const Matrix&, double)>;

// Mean squared score error on n fresh draws of p_t, split along/against
// the manifold tangent (linear models; total = tangential + normal up to
// rounding).
ScoreMse score_mse_decomposed(const DataModel& model,
                              const NoiseSchedule& sched, double t,
                              const BatchScoreFn& candidate,
                              const BatchScoreFn& oracle, Index n, Rng& rng);

// Least-squares slope of log(value) against step over the early decay
// window: the leading run of points with value > 10 x plateau, where the
// plateau is the mean of the trailing 10% (at least 3 points). max_points
// > 0 additionally caps the window length. Returns the decay rate (minus
// the slope). Throws std::invalid_argument if fewer than 3 usable points
// or any value in the window is non-positive.
double fit_exp_rate(const std::vector<double>& steps,
                    const std::vector<double>& values, Index max_points = 0);

}  // namespace sild
