// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Persistence: a JSON checkpoint bundling the data model, schedule and
// trained parameters (doubles round-trip bit-exactly), and sample-matrix
// writers in CSV and a simple binary format.

#pragma once

#include <optional>
#include <string>

#include "sild/config.hpp"
#include "sild/highnoise.hpp"

namespace sild {

// Everything needed to resume or evaluate a run. rf / hn are absent until
// the corresponding fit has happened.
struct Checkpoint {
  DataModel model;
  NoiseSchedule sched;
  Stage1Params stage1;
  std::optional<RFHead> rf;
  std::optional<HNHead> hn;
  double gate_h = 0.5;
  std::string config_hash;
  std::int64_t stage1_steps = 0;

  Checkpoint(DataModel m, NoiseSchedule s, Stage1Params p)
      : model(std::move(m)), sched(std::move(s)), stage1(std::move(p)) {}
};

// Format tag written into every checkpoint; load rejects anything else
// with ConfigError.
inline constexpr const char* kCheckpointFormat = "sild-ckpt-v1";

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Sample matrices are d x n, one sample per column. CSV: one line per
// sample, %.17g fields, no header. Binary: 8-byte magic "SILDSMP1",
// uint32 d, uint32 n, then n*d little-endian float64 sample-major.
void write_samples_csv(const std::string& path, const Matrix& X);
void write_samples_bin(const std::string& path, const Matrix& X);
Matrix read_samples_csv(const std::string& path);
Matrix read_samples_bin(const std::string& path);

}  // namespace sild
