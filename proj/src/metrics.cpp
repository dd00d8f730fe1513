// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sild/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sild {

double assignment_cost(const Matrix& cost) {
  if (cost.rows() != cost.cols() || cost.rows() < 1) {
    throw std::invalid_argument("assignment_cost: need a square cost matrix");
  }
  const int n = static_cast<int>(cost.rows());
  const double kInf = std::numeric_limits<double>::infinity();
  // Shortest augmenting path with potentials (exact, O(n^3)).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) total += cost(p[j] - 1, j - 1);
  return total;
}

double w2_exact(const Matrix& X, const Matrix& Y) {
  if (X.rows() != Y.rows() || X.cols() != Y.cols() || X.cols() < 1) {
    throw std::invalid_argument("w2_exact: need equal-shape point sets");
  }
  if (X.cols() > 256) {
    throw std::invalid_argument("w2_exact: n capped at 256 (use w2_sliced)");
  }
  const Index n = X.cols();
  Matrix cost(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      cost(i, j) = (X.col(i) - Y.col(j)).squaredNorm();
    }
  }
  return std::sqrt(assignment_cost(cost) / static_cast<double>(n));
}

double w2_sliced(const Matrix& X, const Matrix& Y, Index n_proj, Rng& rng) {
  if (X.rows() != Y.rows() || X.cols() != Y.cols() || X.cols() < 1) {
    throw std::invalid_argument("w2_sliced: need equal-shape point sets");
  }
  if (n_proj < 1) throw std::invalid_argument("w2_sliced: n_proj must be >= 1");
  const Index d = X.rows();
  const Index n = X.cols();
  std::vector<double> px(static_cast<std::size_t>(n));
  std::vector<double> py(static_cast<std::size_t>(n));
  double acc = 0.0;
  for (Index p = 0; p < n_proj; ++p) {
    Vector dir(d);
    for (Index i = 0; i < d; ++i) dir(i) = rng.gaussian();
    const double nrm = dir.norm();
    dir /= nrm > 0.0 ? nrm : 1.0;
    for (Index j = 0; j < n; ++j) {
      px[static_cast<std::size_t>(j)] = dir.dot(X.col(j));
      py[static_cast<std::size_t>(j)] = dir.dot(Y.col(j));
    }
    std::sort(px.begin(), px.end());
    std::sort(py.begin(), py.end());
    double s = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double diff =
          px[static_cast<std::size_t>(j)] - py[static_cast<std::size_t>(j)];
      s += diff * diff;
    }
    acc += s / static_cast<double>(n);
  }
  return std::sqrt(acc / static_cast<double>(n_proj));
}

ModeCoverage mode_coverage(const LinearManifold& m, const MoGLatentModel& mog,
                           const Matrix& X) {
  if (X.rows() != m.ambient_dim()) {
    throw std::invalid_argument("mode_coverage: dimension mismatch");
  }
  const Index C = mog.components();
  ModeCoverage out;
  out.counts.assign(static_cast<std::size_t>(C), 0);
  const Matrix Z = m.A.transpose() * X;
  for (Index j = 0; j < X.cols(); ++j) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < C; ++c) {
      const double dist =
          (Z.col(j) - mog.means[static_cast<std::size_t>(c)]).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    out.counts[static_cast<std::size_t>(best)] += 1;
  }
  out.freqs.assign(static_cast<std::size_t>(C), 0.0);
  for (Index c = 0; c < C; ++c) {
    out.freqs[static_cast<std::size_t>(c)] =
        static_cast<double>(out.counts[static_cast<std::size_t>(c)]) /
        std::max<double>(1.0, static_cast<double>(X.cols()));
    if (out.counts[static_cast<std::size_t>(c)] > 0) out.covered += 1;
  }
  return out;
}

ScoreMse score_mse_decomposed(const DataModel& model,
                              const NoiseSchedule& sched, double t,
                              const BatchScoreFn& candidate,
                              const BatchScoreFn& oracle, Index n, Rng& rng) {
  const auto* lin = std::get_if<LinearManifold>(&model.manifold);
  if (lin == nullptr) {
    throw std::invalid_argument(
        "score_mse_decomposed: tangential split needs the linear model");
  }
  if (n < 1) throw std::invalid_argument("score_mse_decomposed: n < 1");
  const Matrix x0 = sample_x0(model, rng, n);
  const ForwardBatch batch = forward_perturb(sched, x0, t, rng);
  const Matrix delta = candidate(batch.x_t, t) - oracle(batch.x_t, t);
  const Matrix tan = lin->A * (lin->A.transpose() * delta);
  const double inv_n = 1.0 / static_cast<double>(n);
  ScoreMse out;
  out.total = inv_n * delta.squaredNorm();
  out.tangential = inv_n * tan.squaredNorm();
  out.normal = inv_n * (delta - tan).squaredNorm();
  return out;
}

double fit_exp_rate(const std::vector<double>& steps,
                    const std::vector<double>& values, Index max_points) {
  if (steps.size() != values.size() || steps.size() < 3) {
    throw std::invalid_argument("fit_exp_rate: need >= 3 (step, value) pairs");
  }
  const std::size_t n = values.size();
  const std::size_t tail = std::max<std::size_t>(3, n / 10);
  double plateau = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) plateau += values[i];
  plateau /= static_cast<double>(tail);
  const double threshold = 10.0 * plateau;

  // Leading run strictly above the plateau band.
  std::size_t end = 0;
  while (end < n && values[end] > threshold) ++end;
  if (max_points > 0) {
    end = std::min<std::size_t>(end, static_cast<std::size_t>(max_points));
  }
  if (end < 3) {
    throw std::invalid_argument(
        "fit_exp_rate: fewer than 3 points above the plateau band");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < end; ++i) {
    if (!(values[i] > 0.0)) {
      throw std::invalid_argument("fit_exp_rate: non-positive value in window");
    }
    const double x = steps[i];
    const double y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(end);
  const double denom = m * sxx - sx * sx;
  if (std::abs(denom) < 1e-300) {
    throw std::invalid_argument("fit_exp_rate: degenerate step values");
  }
  const double slope = (m * sxy - sx * sy) / denom;
  return -slope;
}

}  // namespace sild
