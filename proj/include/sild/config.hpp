// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: one flat struct covering model, schedule, both
// training stages, the high-noise head, sampler and metrics. Configs load
// from a dotted key = value text file (grammar documented in the README)
// or an equivalent JSON object; unknown keys are hard errors. to_text()
// emits every field, so serialize -> parse round-trips losslessly, and the
// canonical text is what config_hash() digests.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sild/numerics.hpp"

namespace sild {

// Configuration / usage errors; the CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // run-level
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string preset = "toy-mog";  // "toy-mog" | "none"
  std::int64_t log_every = 10;
  bool log_wall_ms = true;
  std::string checkpoint_path = "checkpoint.json";

  // model.*
  Index model_d = 100;
  Index model_k = 5;
  Index model_components = 3;
  double model_mode_radius = 2.0;
  double model_latent_std = 0.5;
  // Training-set size for dataset-mode pipelines (vp end-to-end runs);
  // fixed-schedule experiments stream fresh draws instead.
  Index model_n_train = 8192;

  // schedule.*
  std::string schedule_kind = "fixed";  // "fixed" | "vp"
  double schedule_fixed_sigma = 0.1;
  double schedule_beta_min = 0.1;
  double schedule_beta_max = 20.0;
  double schedule_T = 1.0;

  // stage1.*
  Index stage1_m = 200;
  double stage1_h1 = 0.01;
  double stage1_lr = 1e-3;
  std::string stage1_optimizer = "adam";  // "adam" | "sgd"
  Index stage1_batch = 4096;
  std::int64_t stage1_max_steps = 2000;
  bool stage1_freeze_ab = false;
  double stage1_lambda_w = 0.0;
  double stage1_alpha0 = 1.0;
  double stage1_plateau_tol = 1e-3;
  std::int64_t stage1_plateau_window = 200;
  Index stage1_n_eval = 512;

  // stage2.*
  Index stage2_m2 = 256;
  double stage2_h2 = 0.25;
  double stage2_lambda = -1.0;  // < 0: scale-aware default at fit time
  Index stage2_n_fit = 4096;
  std::string stage2_target_mode = "dsm";  // "dsm" | "oracle"
  bool stage2_time_feature = false;
  bool stage2_iterative = false;
  double stage2_lr = 5e-3;
  std::int64_t stage2_steps = 1000;

  // hn.*
  Index hn_L = 5;
  Index hn_m2 = 256;
  double hn_gate_h = 0.5;
  double hn_lambda = -1.0;
  Index hn_n_fit = 8192;

  // sampler.*
  Index sampler_n_steps = 256;
  double sampler_t_min = 1e-3;
  std::string sampler_grid = "geometric_h";     // "uniform" | "geometric_h"
  std::string sampler_kind = "euler_maruyama";  // | "ddpm_ancestral"

  // metrics.*
  Index metrics_n_samples = 256;
  Index metrics_n_proj = 64;
  std::string metrics_samples_format = "csv";  // "csv" | "binary"

  // sweep.*
  std::vector<double> sweep_h1 = {0.04, 0.02, 0.01};
  std::vector<double> sweep_n_fit = {256, 1024, 4096};
  std::vector<double> sweep_n_train = {512, 2048, 8192};
  Index sweep_seeds = 3;
};

// Parse the key = value text form. Unknown keys, duplicate keys and
// malformed values throw ConfigError.
RunConfig parse_config_text(const std::string& text);
// Parse the JSON alternative (nested objects become dotted keys).
RunConfig parse_config_json(const std::string& text);
// Dispatch on leading '{' (after whitespace) vs text form.
RunConfig load_config_file(const std::string& path);

// Canonical serialization: every field, one per line, stable order.
std::string to_text(const RunConfig& cfg);

// FNV-1a 64 of the canonical text, as 16 hex chars.
std::string config_hash(const RunConfig& cfg);

// Re-applies a named preset's field values ("toy-mog" is the standing
// example; "none" leaves the config untouched). Unknown names throw.
void apply_preset(RunConfig& cfg, const std::string& name);

// Cross-field validation (ranges, enum strings); throws ConfigError.
void validate(const RunConfig& cfg);

}  // namespace sild
