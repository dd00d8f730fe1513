// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-time generation under the vp schedule: Euler-Maruyama on
//   dx = [-beta(t) x / 2 - beta(t) s(x, t)] dt + sqrt(beta(t)) dW
// integrated from T down to t_min, plus a DDPM-style ancestral sampler on
// the same time grid for cross-validation. The last step is deterministic.

#pragma once

#include <functional>

#include "sild/data.hpp"

namespace sild {

enum class GridKind { Uniform, GeometricH };
enum class SamplerKind { EulerMaruyama, DdpmAncestral };

struct SamplerConfig {
  Index n_steps = 256;
  double t_min = 1e-3;
  double T = 1.0;
  GridKind grid = GridKind::GeometricH;
  SamplerKind kind = SamplerKind::EulerMaruyama;
};

// Batched score: X is d x n, shared t; returns d x n.
using ScoreFn = std::function<Matrix(const Matrix&, double)>;

// Descending times t_0 = T > ... > t_{n_steps} = t_min. GeometricH places
// nodes so consecutive h(t_i) ratios are constant (resolves the small-h
// endgame); needs an invertible h, i.e. the vp schedule.
std::vector<double> time_grid(const SamplerConfig& cfg,
                              const NoiseSchedule& sched);

// n trajectories from x_T ~ N(0, I_d). Noise for trajectory i comes from
// rng.split(i), so results are independent of evaluation order. Throws
// std::runtime_error naming the step index if a state goes non-finite.
Matrix reverse_sde_sample(const ScoreFn& score, const NoiseSchedule& sched,
                          const SamplerConfig& cfg, Index d, Index n,
                          Rng& rng);

Matrix ancestral_sample(const ScoreFn& score, const NoiseSchedule& sched,
                        const SamplerConfig& cfg, Index d, Index n, Rng& rng);

// Dispatch on cfg.kind.
Matrix generate(const ScoreFn& score, const NoiseSchedule& sched,
                const SamplerConfig& cfg, Index d, Index n, Rng& rng);

}  // namespace sild
