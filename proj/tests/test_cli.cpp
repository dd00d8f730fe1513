// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "sild/checkpoint.hpp"
#include "sild/config.hpp"
#include "sild/data.hpp"
#include "sild/numerics.hpp"
#include "sild/stage1.hpp"
#include "sild/stage2.hpp"

using namespace sild;

namespace {

std::string temp_path(const char* name) {
  return std::string("/tmp/sild_test_") + name;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("config: text round-trip is lossless and hash is stable") {
  RunConfig cfg;
  cfg.seed = 42;
  cfg.stage1_lr = 3.5e-4;
  cfg.sweep_h1 = {0.08, 0.01};
  const std::string text = to_text(cfg);
  const RunConfig back = parse_config_text(text);
  CHECK(to_text(back) == text);
  CHECK(config_hash(back) == config_hash(cfg));
  CHECK(config_hash(cfg).size() == 16);

  // A changed field changes the digest.
  RunConfig other = cfg;
  other.seed = 43;
  CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("config: parser rejects unknown and duplicate keys") {
  CHECK_THROWS_AS((void)parse_config_text("no.such.key = 1\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("seed = 1\nseed = 2\n"),
                  ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("seed = banana\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("preset = nope\n"), ConfigError);
  // Comments and blank lines are fine.
  const RunConfig c =
      parse_config_text("# comment\n\nseed = 9\nstage1.lr = 0.01\n");
  CHECK(c.seed == 9);
  CHECK(c.stage1_lr == 0.01);
}

TEST_CASE("config: preset is applied before explicit keys override it") {
  const RunConfig c =
      parse_config_text("preset = toy-mog\nmodel.d = 40\nstage1.alpha0 = 2\n");
  CHECK(c.model_d == 40);          // explicit override
  CHECK(c.model_k == 5);           // from the preset
  CHECK(c.stage1_m == 200);        // from the preset
  CHECK(c.stage1_alpha0 == 2.0);   // explicit override
  CHECK(c.stage1_max_steps == 6000);
  const RunConfig none = parse_config_text("preset = none\n");
  CHECK(none.stage1_alpha0 == 1.0);
}

TEST_CASE("config: JSON form is equivalent to the text form") {
  const std::string json = R"({
    "seed": 7,
    "model": {"d": 30, "k": 4},
    "stage1": {"lr": 0.002, "optimizer": "sgd"},
    "sweep": {"h1": [0.05, 0.01]}
  })";
  const RunConfig a = parse_config_json(json);
  const RunConfig b = parse_config_text(
      "seed = 7\nmodel.d = 30\nmodel.k = 4\nstage1.lr = 0.002\n"
      "stage1.optimizer = sgd\nsweep.h1 = [0.05, 0.01]\n");
  CHECK(to_text(a) == to_text(b));

  // load_config_file dispatches on the leading brace.
  const std::string pj = temp_path("cfg.json");
  write_file(pj, json);
  const RunConfig c = load_config_file(pj);
  CHECK(to_text(c) == to_text(a));
  const std::string pt = temp_path("cfg.txt");
  write_file(pt, "seed = 7\nmodel.d = 30\nmodel.k = 4\nstage1.lr = 0.002\n"
                 "stage1.optimizer = sgd\nsweep.h1 = [0.05, 0.01]\n");
  CHECK(to_text(load_config_file(pt)) == to_text(a));
  std::remove(pj.c_str());
  std::remove(pt.c_str());
  CHECK_THROWS_AS((void)load_config_file("/tmp/sild_missing_cfg"),
                  ConfigError);
}

TEST_CASE("config: validation rejects inconsistent settings") {
  RunConfig cfg;
  cfg.model_k = cfg.model_d + 1;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = RunConfig{};
  cfg.schedule_kind = "cosine";
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = RunConfig{};
  cfg.stage1_lr = 0.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = RunConfig{};
  cfg.stage2_h2 = -0.1;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = RunConfig{};
  validate(cfg);  // defaults are a valid config
}

TEST_CASE("checkpoint: save/load reproduces forward outputs bit-exactly") {
  Rng rm(1);
  DataModel model = toy_mog_model(rm, 12, 3);
  const NoiseSchedule vp = NoiseSchedule::vp_linear();
  Rng rp(2);
  const Stage1Params s1 = init_stage1(rp, 12, 16, 0.02, 1.5);
  Checkpoint ckpt(model, vp, s1);
  Rng rh(3);
  ckpt.rf = init_rf_head(rh, 12, 8);
  ckpt.rf->U = gauss_matrix(rh, 12, 8, 0.3);
  ckpt.hn = init_hn_head(rh, 12, 4, 3, 0.4, 1.0);
  ckpt.hn->U = gauss_matrix(rh, 12, 12, 0.3);
  ckpt.config_hash = "0123456789abcdef";
  ckpt.stage1_steps = 77;

  const std::string path = temp_path("ckpt.json");
  save_checkpoint(path, ckpt);
  const Checkpoint back = load_checkpoint(path);
  std::remove(path.c_str());

  CHECK(back.config_hash == "0123456789abcdef");
  CHECK(back.stage1_steps == 77);
  REQUIRE(back.rf.has_value());
  REQUIRE(back.hn.has_value());
  Rng rx(4);
  const Vector x = gauss_matrix(rx, 12, 1, 1.0).col(0);
  CHECK((f1_forward(back.stage1, x) - f1_forward(s1, x)).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((sild_score(back.stage1, *back.rf, back.sched, x, 0.5) -
         sild_score(s1, *ckpt.rf, vp, x, 0.5))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((hn_forward(*back.hn, x, 0.7) - hn_forward(*ckpt.hn, x, 0.7))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  // The data model and schedule round-trip too.
  Rng rs1(5), rs2(5);
  CHECK((sample_x0(back.model, rs1, 16) - sample_x0(model, rs2, 16))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK(back.sched.h(0.37) == vp.h(0.37));

  // A wrong format tag is rejected.
  const std::string bad = temp_path("ckpt_bad.json");
  write_file(bad, R"({"format": "other-v9"})");
  CHECK_THROWS_AS((void)load_checkpoint(bad), ConfigError);
  std::remove(bad.c_str());
}

TEST_CASE("samples: csv and binary writers round-trip") {
  Rng r(6);
  const Matrix X = gauss_matrix(r, 5, 17, 1.0);
  const std::string pc = temp_path("samples.csv");
  const std::string pb = temp_path("samples.bin");
  write_samples_csv(pc, X);
  write_samples_bin(pb, X);
  const Matrix xc = read_samples_csv(pc);
  const Matrix xb = read_samples_bin(pb);
  CHECK((xc - X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((xb - X).cwiseAbs().maxCoeff() == 0.0);

  // Binary header: magic + dims.
  std::ifstream in(pb, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  CHECK(std::string(magic, 8) == "SILDSMP1");
  std::uint32_t d = 0, n = 0;
  in.read(reinterpret_cast<char*>(&d), 4);
  in.read(reinterpret_cast<char*>(&n), 4);
  CHECK(d == 5);
  CHECK(n == 17);
  in.close();
  std::remove(pc.c_str());
  std::remove(pb.c_str());
  CHECK_THROWS_AS((void)read_samples_bin("/tmp/sild_missing_bin"),
                  ConfigError);
}
