// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Stage 2: tangential correction on top of the frozen Stage-1 projection.
// The assembled score at a manifold-regime time t2 is
//   s(x, t2) = -(x - x_hat)/h(t2) + U Phi(x_hat, t2),
// with random features Phi = (1/sqrt(m2)) tanh(V^T x_hat [+ v_t h(t)] + b)
// and U fitted by ridge regression in closed form.

#pragma once

#include <functional>

#include "sild/data.hpp"
#include "sild/stage1.hpp"

namespace sild {

struct RFHead {
  Matrix V;       // d x m2, frozen, N(0, 1/d) entries
  Vector v_time;  // m2; time-input weights, used when has_time
  Vector b_feat;  // m2
  Matrix U;       // d x m2, learned (zero until fitted)
  double lambda = -1.0;  // ridge strength; < 0 means auto at fit time
  bool has_time = false;
};

// V ~ N(0, 1/d), b ~ U(-1, 1); v_time ~ N(0, 1) when with_time.
RFHead init_rf_head(Rng& rng, Index d, Index m2, bool with_time = false,
                    double lambda = -1.0);

// Phi(x_hat, t); the norm satisfies ||Phi|| <= 1. h_t is the scalar noise
// level fed through the optional time channel (ignored when !has_time).
Vector rf_features(const RFHead& head, const Vector& x_hat, double h_t = 0.0);
// Column batch; h_ts empty means a shared h_t of 0 (no time channel), or
// size 1 for a shared level, or one level per column.
Matrix rf_features(const RFHead& head, const Matrix& Xhat,
                   const std::vector<double>& h_ts = {});

// Ridge objective (1/n) sum_i ||U Phi_i - y_i||^2 + lambda ||U||_F^2.
double ridge_objective(const RFHead& head, const Matrix& Phi, const Matrix& Y);

// Closed-form ridge fit U = Y Phi^T (Phi Phi^T + n lambda I)^{-1} via
// Cholesky. Resolves lambda < 0 to 1e-4 * trace(Phi Phi^T)/(n m2) and
// stores it. Throws std::runtime_error if the normal-equation residual
// ||Y Phi^T - U (Phi Phi^T + n lambda I)||_F / ||Y Phi^T||_F is >= 1e-8.
void ridge_fit(RFHead& head, const Matrix& Xhat, const Matrix& Y,
               const std::vector<double>& h_ts = {});

// Plain gradient descent on the ridge objective (reference for optimality
// checks and the literal two-stage training loop). Returns the final
// objective value.
double ridge_fit_gd(RFHead& head, const Matrix& Xhat, const Matrix& Y,
                    std::int64_t steps, double lr,
                    const std::vector<double>& h_ts = {});

// Assembled two-stage score at time t2 (manifold regime).
Vector sild_score(const Stage1Params& s1, const RFHead& head,
                  const NoiseSchedule& sched, const Vector& x, double t2);
Matrix sild_score(const Stage1Params& s1, const RFHead& head,
                  const NoiseSchedule& sched, const Matrix& X, double t2);

enum class Stage2TargetMode { Dsm, Oracle };

struct Stage2Targets {
  Matrix x_t;   // noised inputs
  Matrix xhat;  // Stage-1 projections (regression inputs)
  Matrix y;     // regression targets
};

// Draws n fresh samples at t2 and builds regression pairs. dsm mode:
// y = -eps/sqrt(h) + (x_t - x_hat)/h (so that the head regresses the
// tangential remainder); oracle mode: y = residual_score at the true
// projection (diagnostic ground truth; tangential by construction).
// The projection is injected as a function so callers can substitute the
// exact manifold projection. Requires h(t2) <= gate_h (the manifold-regime
// phase boundary). x0_pool (d x n_train, optional) switches clean draws to
// resampling pool columns with replacement.
Stage2Targets build_stage2_targets(
    Stage2TargetMode mode,
    const std::function<Matrix(const Matrix&)>& proj_fn,
    const DataModel& model, const NoiseSchedule& sched, double t2, Index n,
    Rng& rng, double gate_h, const Matrix* x0_pool = nullptr);
// Operational overload: projection = Stage-1 x_hat.
Stage2Targets build_stage2_targets(Stage2TargetMode mode,
                                   const Stage1Params& s1,
                                   const DataModel& model,
                                   const NoiseSchedule& sched, double t2,
                                   Index n, Rng& rng, double gate_h,
                                   const Matrix* x0_pool = nullptr);

// Eigenvalues (descending) of the feature Gram matrix K_ij =
// Phi(x_i)^T Phi(x_j); n is capped at 2048.
std::vector<double> kernel_spectrum(const RFHead& head, const Matrix& Xhat,
                                    const std::vector<double>& h_ts = {});

}  // namespace sild
