// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sild/sampler.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sild {

namespace {

void check_cfg(const SamplerConfig& cfg, const NoiseSchedule& sched) {
  if (cfg.n_steps < 1) {
    throw std::invalid_argument("sampler: n_steps must be >= 1");
  }
  if (!(cfg.t_min > 0.0) || !(cfg.t_min < cfg.T) || !(cfg.T <= sched.T)) {
    throw std::invalid_argument("sampler: need 0 < t_min < T <= schedule T");
  }
}

void check_finite(const Matrix& X, Index step) {
  if (!X.allFinite()) {
    throw std::runtime_error("sampler: state went non-finite at step " +
                             std::to_string(step));
  }
}

}  // namespace

std::vector<double> time_grid(const SamplerConfig& cfg,
                              const NoiseSchedule& sched) {
  check_cfg(cfg, sched);
  const Index n = cfg.n_steps;
  std::vector<double> grid(static_cast<std::size_t>(n) + 1);
  if (cfg.grid == GridKind::Uniform) {
    for (Index i = 0; i <= n; ++i) {
      const double frac = static_cast<double>(i) / static_cast<double>(n);
      grid[static_cast<std::size_t>(i)] = cfg.T - frac * (cfg.T - cfg.t_min);
    }
  } else {
    if (sched.kind != ScheduleKind::VpLinear) {
      throw std::invalid_argument(
          "time_grid: geometric-in-h grid needs an invertible (vp) schedule");
    }
    const double h_hi = sched.h(cfg.T);
    const double h_lo = sched.h(cfg.t_min);
    for (Index i = 1; i < n; ++i) {
      const double frac = static_cast<double>(i) / static_cast<double>(n);
      grid[static_cast<std::size_t>(i)] =
          sched.time_of_h(h_hi * std::pow(h_lo / h_hi, frac));
    }
    grid.front() = cfg.T;
    grid.back() = cfg.t_min;
  }
  // Endpoints are pinned exactly; interior must be strictly descending.
  grid.front() = cfg.T;
  grid.back() = cfg.t_min;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (!(grid[i] > grid[i + 1])) {
      throw std::runtime_error("time_grid: grid not strictly descending");
    }
  }
  return grid;
}

namespace {

// Shared trajectory driver: init from per-sample streams, then one batched
// score evaluation per grid node; `advance` consumes (X, S, k) and the
// per-column noise draw hook.
Matrix run_sampler(const ScoreFn& score, const NoiseSchedule& sched,
                   const SamplerConfig& cfg, Index d, Index n, Rng& rng,
                   bool ancestral) {
  check_cfg(cfg, sched);
  if (sched.kind != ScheduleKind::VpLinear) {
    throw std::invalid_argument("sampler: reverse dynamics need the vp schedule");
  }
  if (d < 1 || n < 0) throw std::invalid_argument("sampler: bad shape");

  const std::vector<double> grid = time_grid(cfg, sched);
  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    streams.push_back(rng.split(static_cast<std::uint64_t>(j)));
  }

  Matrix X(d, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < d; ++i) X(i, j) = streams[static_cast<std::size_t>(j)].gaussian();
  }

  Matrix Z(d, n);
  const Index steps = cfg.n_steps;
  for (Index k = 0; k < steps; ++k) {
    const double t = grid[static_cast<std::size_t>(k)];
    const double t_next = grid[static_cast<std::size_t>(k) + 1];
    const bool last = (k == steps - 1);
    const Matrix S = score(X, t);
    if (ancestral) {
      const double ab_t = sched.alpha_bar(t);
      const double ab_next = sched.alpha_bar(t_next);
      const double alpha_step = ab_t / ab_next;
      const double h_t = 1.0 - ab_t;
      const double h_next = 1.0 - ab_next;
      X = (X + (1.0 - alpha_step) * S) / std::sqrt(alpha_step);
      if (!last) {
        const double var = (1.0 - alpha_step) * h_next / h_t;
        for (Index j = 0; j < n; ++j) {
          for (Index i = 0; i < d; ++i) {
            Z(i, j) = streams[static_cast<std::size_t>(j)].gaussian();
          }
        }
        X += std::sqrt(var) * Z;
      }
    } else {
      const double dt = t - t_next;
      const double beta = sched.beta(t);
      X += dt * beta * (0.5 * X + S);
      if (!last) {
        for (Index j = 0; j < n; ++j) {
          for (Index i = 0; i < d; ++i) {
            Z(i, j) = streams[static_cast<std::size_t>(j)].gaussian();
          }
        }
        X += std::sqrt(beta * dt) * Z;
      }
    }
    check_finite(X, k);
  }
  return X;
}

}  // namespace

Matrix reverse_sde_sample(const ScoreFn& score, const NoiseSchedule& sched,
                          const SamplerConfig& cfg, Index d, Index n,
                          Rng& rng) {
  return run_sampler(score, sched, cfg, d, n, rng, /*ancestral=*/false);
}

Matrix ancestral_sample(const ScoreFn& score, const NoiseSchedule& sched,
                        const SamplerConfig& cfg, Index d, Index n, Rng& rng) {
  return run_sampler(score, sched, cfg, d, n, rng, /*ancestral=*/true);
}

Matrix generate(const ScoreFn& score, const NoiseSchedule& sched,
                const SamplerConfig& cfg, Index d, Index n, Rng& rng) {
  return cfg.kind == SamplerKind::EulerMaruyama
             ? reverse_sde_sample(score, sched, cfg, d, n, rng)
             : ancestral_sample(score, sched, cfg, d, n, rng);
}

}  // namespace sild
