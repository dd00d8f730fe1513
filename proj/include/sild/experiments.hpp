// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: the standing mixture-on-subspace reproduction
// (two-stage training with diagnostics and SVG panels), the collapse-rate
// and stage-2 scaling sweeps, the vp end-to-end pipeline with sampling and
// W2 evaluation, and the CLI command entry points built on top of them.

#pragma once

#include <string>
#include <vector>

#include "sild/checkpoint.hpp"
#include "sild/config.hpp"
#include "sild/metrics.hpp"
#include "sild/sampler.hpp"

namespace sild {

// A (schedule, time) pair realizing noise level h: the vp schedule inverts
// h(t); fixed mode builds a dedicated sigma = sqrt(h) schedule evaluated
// mid-horizon (every time is equivalent there).
struct NoiseLevel {
  NoiseSchedule sched;
  double t = 0.0;
};

NoiseLevel level_for_h(const RunConfig& cfg, double h);

// Data model described by the config's model.* block (linear subspace with
// the equidistant-modes latent mixture).
DataModel make_model(const RunConfig& cfg, Rng rng);

struct ToyResult {
  Checkpoint ckpt;
  std::vector<TrainLogRow> log;
  // Manifold-component MSE at the stage-2 noise level of the stage-1-only
  // score, tracked at every logged stage-1 step (the quantity Stage 2 then
  // improves).
  std::vector<double> man_t2_steps;
  std::vector<double> man_t2_values;
  ScoreMse mse_stage1_only;  // held-out, stage-2 level, head off
  ScoreMse mse_after;        // held-out, stage-2 level, ridge-fitted head
  double ridge_lambda = 0.0;
  double closed_objective = 0.0;
  double gd_objective = 0.0;  // NaN unless stage2.iterative
  std::int64_t stage1_steps = 0;
  double seconds = 0.0;

  explicit ToyResult(Checkpoint c) : ckpt(std::move(c)) {}
};

// The full fixed-sigma reproduction: Stage 1 to plateau, closed-form ridge
// Stage 2, held-out decomposition, and (when write_artifacts) train_log.csv,
// three SVG panels, metrics.json, run_manifest.json and the checkpoint in
// cfg.out_dir.
ToyResult run_toy_pipeline(const RunConfig& cfg, bool write_artifacts);

struct RateCell {
  double h1 = 0.0;
  Index seed = 0;
  double rate = 0.0;
  bool ok = false;
  std::string error;
};

struct RateSweepResult {
  std::vector<RateCell> cells;
  std::vector<double> h1_desc;        // distinct h1, descending
  std::vector<double> median_rates;   // aligned with h1_desc
  bool verdict_applicable = false;    // >= 2 levels and every cell fitted
  bool monotone = false;  // rates strictly increase as h1 decreases
};

// Frozen-(a,b) plain-SGD Stage-1 runs per (h1, seed); fits the early-phase
// exponential decay rate of the alignment risk F per cell.
RateSweepResult run_rate_sweep(const RunConfig& cfg, bool write_artifacts);

struct Stage2SweepResult {
  std::vector<double> n_values;          // ascending
  std::vector<double> est_median_mse;    // estimation error per n
  std::vector<double> h1_values;         // ascending
  std::vector<double> resid_median_mse;  // assembled-score MSE per h1
  std::vector<std::string> rows;         // per-cell CSV rows (diagnostic)
  bool est_monotone = false;    // strictly decreasing in n
  bool resid_monotone = false;  // strictly increasing in h1
};

// Part A: ridge estimation error vs fit-set size with the exact projection
// injected. Part B: assembled-score error at fixed h(t2) vs the Stage-1
// training level h1 (one Stage-1 net per cell, equal budget).
Stage2SweepResult run_stage2_sweep(const RunConfig& cfg, bool write_artifacts);

struct VpResult {
  Checkpoint ckpt;
  std::vector<TrainLogRow> log;
  Matrix samples;
  double w2_generated = 0.0;  // generated vs held-out at t_min
  double w2_baseline = 0.0;   // two independent held-out sets
  ModeCoverage coverage;
  double mean_manifold_dist = 0.0;
  double gate_jump_value = 0.0;
  double t_min = 0.0;

  explicit VpResult(Checkpoint c) : ckpt(std::move(c)) {}
};

// End-to-end vp run in dataset mode (model.n_train clean draws feed every
// stage): Stage 1 at h1, ridge Stage 2 at h2, high-noise head over
// [t(gate_h), T], gated full score, reverse-SDE sampling at t_min =
// max(sampler.t_min, 1/n_train), exact-W2 and coverage evaluation.
VpResult run_vp_pipeline(const RunConfig& cfg, bool write_artifacts);

// CLI entry points. Return process exit codes: 0 success, 4 failed sweep
// verdict. Config errors throw ConfigError (exit 2 in main); numerical
// failures throw std::exception subclasses (exit 3).
int cmd_reproduce_toy(const RunConfig& cfg);
int cmd_rate_sweep(const RunConfig& cfg);
int cmd_stage2_sweep(const RunConfig& cfg);
int cmd_sample_eval(const RunConfig& cfg);
int cmd_train_stage1(const RunConfig& cfg);
int cmd_train_stage2(const RunConfig& cfg);
int cmd_fit_hn(const RunConfig& cfg);

}  // namespace sild
