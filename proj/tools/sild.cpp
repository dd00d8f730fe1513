// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 2 configuration or usage
// error, 3 numerical failure, 4 a sweep ran but its monotonicity verdict
// failed.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "sild/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "sild: a numerical laboratory for two-stage score learning on "
      "synthetic manifold-supported data"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::string preset;
  std::uint64_t seed = 0;
  auto* config_opt =
      app.add_option("--config", config_path,
                     "config file, key = value text or JSON")
          ->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed override");
  auto* out_opt = app.add_option("--out", out_dir, "output directory");
  auto* preset_opt = app.add_option(
      "--preset", preset,
      "named preset; applies only when no --config file is given");

  auto* c_toy = app.add_subcommand(
      "reproduce-toy",
      "fixed-noise standing example: two-stage training, figures, metrics");
  auto* c_rate = app.add_subcommand(
      "rate-sweep", "early-phase collapse rate across stage-1 noise levels");
  auto* c_s2 = app.add_subcommand(
      "stage2-sweep",
      "ridge estimation error vs fit size and assembled error vs h1");
  auto* c_se = app.add_subcommand(
      "sample-eval", "sample from a checkpointed full score and evaluate");
  auto* c_t1 =
      app.add_subcommand("train-stage1", "train the stage-1 field only");
  auto* c_t2 = app.add_subcommand(
      "train-stage2", "ridge-fit the correction head onto a checkpoint");
  auto* c_hn = app.add_subcommand(
      "fit-hn", "fit the high-noise head onto a checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    sild::RunConfig cfg;
    if (*config_opt) {
      cfg = sild::load_config_file(config_path);
      if (*preset_opt) {
        throw sild::ConfigError(
            "--preset cannot override a config file; set preset inside the "
            "file");
      }
    } else if (*preset_opt) {
      sild::apply_preset(cfg, preset);
      cfg.preset = preset;
    }
    if (*seed_opt) cfg.seed = seed;
    if (*out_opt) cfg.out_dir = out_dir;
    sild::validate(cfg);

    if (c_toy->parsed()) return sild::cmd_reproduce_toy(cfg);
    if (c_rate->parsed()) return sild::cmd_rate_sweep(cfg);
    if (c_s2->parsed()) return sild::cmd_stage2_sweep(cfg);
    if (c_se->parsed()) return sild::cmd_sample_eval(cfg);
    if (c_t1->parsed()) return sild::cmd_train_stage1(cfg);
    if (c_t2->parsed()) return sild::cmd_train_stage2(cfg);
    if (c_hn->parsed()) return sild::cmd_fit_hn(cfg);
    std::fprintf(stderr, "no command selected\n");
    return 2;
  } catch (const sild::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
