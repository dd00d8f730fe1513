// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Stage 1: the conservative one-hidden-layer field
//   f1(x) = (1/h1) (W diag(a) tanh(W^T x + b) - x),
// trained by denoising score matching at a single small noise level h1.
// f1 = -grad Phi for Phi(x) = ||x||^2/(2 h1) - (1/h1) sum_j a_j
// logcosh(w_j^T x + b_j), and x + h1 f1(x) acts as a learned projection
// onto the data support.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sild/data.hpp"
#include "sild/numerics.hpp"

namespace sild {

struct Stage1Params {
  Matrix W;  // d x m, tied input/output weights
  Vector a;  // m
  Vector b;  // m
  double h1 = 0.01;
  bool freeze_ab = false;
  double l2_w = 0.0;  // weight-decay strength lambda_w on ||W||_F^2 / m
};

// W ~ N(0, 1/d), a = Rademacher * alpha0 / m, b ~ U(-1, 1).
Stage1Params init_stage1(Rng& rng, Index d, Index m, double h1,
                         double alpha0 = 1.0);

// f1 on a column batch (or single point).
Matrix f1_forward(const Stage1Params& p, const Matrix& X);
Vector f1_forward(const Stage1Params& p, const Vector& x);

// Phi with -grad Phi = f1.
double potential(const Stage1Params& p, const Vector& x);

// Learned projection x + h1 f1(x) = W diag(a) tanh(W^T x + b); computed
// directly in the simplified form, so it is exactly independent of h1.
Matrix projection_hat(const Stage1Params& p, const Matrix& X);
Vector projection_hat(const Stage1Params& p, const Vector& x);

struct Stage1Grads {
  double loss = 0.0;
  Matrix dW;
  Vector da;
  Vector db;
};

// Batch DSM loss mean_i 1/2 ||f1(x_t_i) + eps_i/sqrt(h1)||^2 plus the
// weight-decay term (l2_w/2) ||W||_F^2 / m, with exact analytic gradients.
// The batch must have been noised at the level the field is built for
// (batch.h == h1).
Stage1Grads dsm_loss_and_grads(const Stage1Params& p, const ForwardBatch& batch);

// One CSV row of the training log.
struct TrainLogRow {
  std::int64_t step = 0;
  double dsm_loss = 0.0;
  double manifold_err = 0.0;    // tangential part of E||f1 - score*||^2
  double orthogonal_err = 0.0;  // normal part
  double alignment_risk_F = 0.0;
  double second_moment_m2 = 0.0;  // ||W||_F^2 / m
  double pl_ratio = 0.0;
  std::int64_t wall_ms = 0;
};

inline constexpr const char* kTrainLogHeader =
    "step,dsm_loss,manifold_err,orthogonal_err,alignment_risk_F,"
    "second_moment_m2,pl_ratio,wall_ms";

std::string train_log_csv(const std::vector<TrainLogRow>& rows);

enum class OptimizerKind { Adam, Sgd };

struct Stage1TrainConfig {
  std::int64_t max_steps = 2000;
  Index batch = 4096;
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::int64_t log_every = 10;
  // Stop when the relative change between consecutive moving averages of
  // orthogonal_err over plateau_window steps falls below plateau_tol.
  double plateau_tol = 1e-3;
  std::int64_t plateau_window = 200;
  Index n_eval = 512;
  // Training is declared divergent (throws std::runtime_error) if the loss
  // exceeds divergence_factor times its initial value.
  double divergence_factor = 1e3;
  bool log_wall_ms = true;
  // Finite training set (d x n_train, not owned): batches draw columns with
  // replacement instead of fresh model samples. Diagnostics always use
  // fresh draws.
  const Matrix* x0_pool = nullptr;
  // Observer invoked at every logged step (including step 0) with the
  // current parameters; used for out-of-band evaluations during training.
  std::function<void(std::int64_t step, const Stage1Params&)> on_log;
};

// Diagnostics on n_eval fresh draws of p_{t1}; linear-manifold models only
// (the exact score oracle backs manifold_err / orthogonal_err). Fills every
// field except step, dsm_loss and wall_ms.
TrainLogRow stage1_diagnostics(const Stage1Params& p, const DataModel& model,
                               const NoiseSchedule& sched, double t1,
                               Index n_eval, Rng& rng);

// DSM training at fixed t1. Uses rng.split sub-streams: batches from one
// stream, diagnostics keyed by step, so logged values are reproducible
// regardless of logging cadence. Logs a step-0 row (initialization state,
// loss from a probe batch) before the first update.
Stage1Params train_stage1(Stage1Params p, const DataModel& model,
                          const NoiseSchedule& sched, double t1,
                          const Stage1TrainConfig& cfg, Rng& rng,
                          std::vector<TrainLogRow>* log_out);

}  // namespace sild
