// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sild/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sild {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& M) {
  json data = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) data.push_back(M(i, j));
  }
  return json{{"rows", M.rows()}, {"cols", M.cols()}, {"data", data}};
}

Matrix matrix_from_json(const json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 ||
      static_cast<std::size_t>(rows * cols) != data.size()) {
    throw ConfigError("checkpoint: matrix shape/data mismatch");
  }
  Matrix M(rows, cols);
  std::size_t idx = 0;
  for (Index i = 0; i < rows; ++i) {
    for (Index j2 = 0; j2 < cols; ++j2) M(i, j2) = data[idx++].get<double>();
  }
  return M;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Index>(j.size()));
  Index i = 0;
  for (const auto& e : j) v[i++] = e.get<double>();
  return v;
}

json manifold_to_json(const Manifold& m) {
  if (const auto* lin = std::get_if<LinearManifold>(&m)) {
    return json{{"type", "linear"},
                {"A", matrix_to_json(lin->A)},
                {"effective_reach", lin->effective_reach}};
  }
  const auto& c = std::get<CircleManifold>(m);
  return json{{"type", "circle"},
              {"u1", vector_to_json(c.u1)},
              {"u2", vector_to_json(c.u2)},
              {"R", c.R}};
}

Manifold manifold_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "linear") {
    return LinearManifold(matrix_from_json(j.at("A")),
                          j.at("effective_reach").get<double>());
  }
  if (type == "circle") {
    return CircleManifold(vector_from_json(j.at("u1")),
                          vector_from_json(j.at("u2")),
                          j.at("R").get<double>());
  }
  throw ConfigError("checkpoint: unknown manifold type '" + type + "'");
}

json mog_to_json(const MoGLatentModel& g) {
  json means = json::array();
  for (const auto& mu : g.means) means.push_back(vector_to_json(mu));
  return json{{"weights", vector_to_json(g.weights)},
              {"means", means},
              {"latent_std", g.latent_std}};
}

MoGLatentModel mog_from_json(const json& j) {
  std::vector<Vector> means;
  for (const auto& mu : j.at("means")) means.push_back(vector_from_json(mu));
  return MoGLatentModel(vector_from_json(j.at("weights")), std::move(means),
                        j.at("latent_std").get<double>());
}

json schedule_to_json(const NoiseSchedule& s) {
  return json{{"kind", s.kind == ScheduleKind::VpLinear ? "vp" : "fixed"},
              {"beta_min", s.beta_min},
              {"beta_max", s.beta_max},
              {"T", s.T},
              {"fixed_sigma", s.fixed_sigma}};
}

NoiseSchedule schedule_from_json(const json& j) {
  NoiseSchedule s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "vp") {
    s.kind = ScheduleKind::VpLinear;
  } else if (kind == "fixed") {
    s.kind = ScheduleKind::FixedSigma;
  } else {
    throw ConfigError("checkpoint: unknown schedule kind '" + kind + "'");
  }
  s.beta_min = j.at("beta_min").get<double>();
  s.beta_max = j.at("beta_max").get<double>();
  s.T = j.at("T").get<double>();
  s.fixed_sigma = j.at("fixed_sigma").get<double>();
  return s;
}

json stage1_to_json(const Stage1Params& p) {
  return json{{"W", matrix_to_json(p.W)}, {"a", vector_to_json(p.a)},
              {"b", vector_to_json(p.b)}, {"h1", p.h1},
              {"freeze_ab", p.freeze_ab}, {"l2_w", p.l2_w}};
}

Stage1Params stage1_from_json(const json& j) {
  Stage1Params p;
  p.W = matrix_from_json(j.at("W"));
  p.a = vector_from_json(j.at("a"));
  p.b = vector_from_json(j.at("b"));
  p.h1 = j.at("h1").get<double>();
  p.freeze_ab = j.at("freeze_ab").get<bool>();
  p.l2_w = j.at("l2_w").get<double>();
  return p;
}

json rf_to_json(const RFHead& h) {
  return json{{"V", matrix_to_json(h.V)},
              {"v_time", vector_to_json(h.v_time)},
              {"b_feat", vector_to_json(h.b_feat)},
              {"U", matrix_to_json(h.U)},
              {"lambda", h.lambda},
              {"has_time", h.has_time}};
}

RFHead rf_from_json(const json& j) {
  RFHead h;
  h.V = matrix_from_json(j.at("V"));
  h.v_time = vector_from_json(j.at("v_time"));
  h.b_feat = vector_from_json(j.at("b_feat"));
  h.U = matrix_from_json(j.at("U"));
  h.lambda = j.at("lambda").get<double>();
  h.has_time = j.at("has_time").get<bool>();
  return h;
}

json hn_to_json(const HNHead& h) {
  json blocks = json::array();
  for (const auto& V : h.V) blocks.push_back(matrix_to_json(V));
  return json{{"V", blocks},     {"U", matrix_to_json(h.U)},
              {"lambda", h.lambda}, {"t_max", h.t_max},
              {"T", h.T}};
}

HNHead hn_from_json(const json& j) {
  HNHead h;
  for (const auto& b : j.at("V")) h.V.push_back(matrix_from_json(b));
  h.U = matrix_from_json(j.at("U"));
  h.lambda = j.at("lambda").get<double>();
  h.t_max = j.at("t_max").get<double>();
  h.T = j.at("T").get<double>();
  return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json j;
  j["format"] = kCheckpointFormat;
  j["config_hash"] = ckpt.config_hash;
  j["stage1_steps"] = ckpt.stage1_steps;
  j["gate_h"] = ckpt.gate_h;
  j["manifold"] = manifold_to_json(ckpt.model.manifold);
  j["mog"] = mog_to_json(ckpt.model.mog);
  j["schedule"] = schedule_to_json(ckpt.sched);
  j["stage1"] = stage1_to_json(ckpt.stage1);
  if (ckpt.rf) j["rf"] = rf_to_json(*ckpt.rf);
  if (ckpt.hn) j["hn"] = hn_to_json(*ckpt.hn);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("checkpoint: cannot open '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw ConfigError("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: JSON parse error: ") + e.what());
  }
  const std::string format = j.value("format", "");
  if (format != kCheckpointFormat) {
    throw ConfigError("checkpoint: unsupported format '" + format +
                      "' (expected " + std::string(kCheckpointFormat) + ")");
  }
  try {
    Checkpoint ckpt(
        DataModel(manifold_from_json(j.at("manifold")),
                  mog_from_json(j.at("mog"))),
        schedule_from_json(j.at("schedule")), stage1_from_json(j.at("stage1")));
    ckpt.config_hash = j.at("config_hash").get<std::string>();
    ckpt.stage1_steps = j.at("stage1_steps").get<std::int64_t>();
    ckpt.gate_h = j.at("gate_h").get<double>();
    if (j.contains("rf")) ckpt.rf = rf_from_json(j.at("rf"));
    if (j.contains("hn")) ckpt.hn = hn_from_json(j.at("hn"));
    return ckpt;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: malformed field: ") + e.what());
  }
}

void write_samples_csv(const std::string& path, const Matrix& X) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("samples: cannot open '" + path + "'");
  char buf[64];
  for (Index j = 0; j < X.cols(); ++j) {
    for (Index i = 0; i < X.rows(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", X(i, j));
      if (i) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw ConfigError("samples: write failed for '" + path + "'");
}

void write_samples_bin(const std::string& path, const Matrix& X) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("samples: cannot open '" + path + "'");
  const char magic[8] = {'S', 'I', 'L', 'D', 'S', 'M', 'P', '1'};
  out.write(magic, 8);
  const std::uint32_t d = static_cast<std::uint32_t>(X.rows());
  const std::uint32_t n = static_cast<std::uint32_t>(X.cols());
  out.write(reinterpret_cast<const char*>(&d), 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  // Column j of X is sample j; Eigen stores column-major, so the raw
  // buffer is already sample-major. Host is little-endian.
  out.write(reinterpret_cast<const char*>(X.data()),
            static_cast<std::streamsize>(sizeof(double)) * X.size());
  if (!out) throw ConfigError("samples: write failed for '" + path + "'");
}

Matrix read_samples_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("samples: cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
    if (!rows.empty() && vals.size() != rows.front().size()) {
      throw ConfigError("samples: ragged CSV in '" + path + "'");
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ConfigError("samples: empty CSV '" + path + "'");
  const Index d = static_cast<Index>(rows.front().size());
  const Index n = static_cast<Index>(rows.size());
  Matrix X(d, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < d; ++i) X(i, j) = rows[j][i];
  }
  return X;
}

Matrix read_samples_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("samples: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "SILDSMP1", 8) != 0) {
    throw ConfigError("samples: bad magic in '" + path + "'");
  }
  std::uint32_t d = 0, n = 0;
  in.read(reinterpret_cast<char*>(&d), 4);
  in.read(reinterpret_cast<char*>(&n), 4);
  if (!in) throw ConfigError("samples: truncated header in '" + path + "'");
  Matrix X(static_cast<Index>(d), static_cast<Index>(n));
  in.read(reinterpret_cast<char*>(X.data()),
          static_cast<std::streamsize>(sizeof(double)) * X.size());
  if (!in) throw ConfigError("samples: truncated data in '" + path + "'");
  return X;
}

}  // namespace sild
