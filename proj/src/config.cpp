// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sild/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <type_traits>
#include <variant>

#include <json.hpp>

namespace sild {

namespace {

// Index is Eigen's signed index; the member table folds it into the
// int64 alternative, which only works when the two are the same type.
static_assert(std::is_same_v<Index, std::int64_t>,
              "config field table assumes Index == int64_t");

using Member = std::variant<std::uint64_t RunConfig::*, std::int64_t RunConfig::*,
                            double RunConfig::*, bool RunConfig::*,
                            std::string RunConfig::*,
                            std::vector<double> RunConfig::*>;

struct Field {
  const char* key;
  Member member;
};

// Table order is the canonical serialization order.
const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"seed", &RunConfig::seed},
      {"out_dir", &RunConfig::out_dir},
      {"preset", &RunConfig::preset},
      {"log_every", &RunConfig::log_every},
      {"log_wall_ms", &RunConfig::log_wall_ms},
      {"checkpoint", &RunConfig::checkpoint_path},
      {"model.d", &RunConfig::model_d},
      {"model.k", &RunConfig::model_k},
      {"model.components", &RunConfig::model_components},
      {"model.mode_radius", &RunConfig::model_mode_radius},
      {"model.latent_std", &RunConfig::model_latent_std},
      {"model.n_train", &RunConfig::model_n_train},
      {"schedule.kind", &RunConfig::schedule_kind},
      {"schedule.fixed_sigma", &RunConfig::schedule_fixed_sigma},
      {"schedule.beta_min", &RunConfig::schedule_beta_min},
      {"schedule.beta_max", &RunConfig::schedule_beta_max},
      {"schedule.T", &RunConfig::schedule_T},
      {"stage1.m", &RunConfig::stage1_m},
      {"stage1.h1", &RunConfig::stage1_h1},
      {"stage1.lr", &RunConfig::stage1_lr},
      {"stage1.optimizer", &RunConfig::stage1_optimizer},
      {"stage1.batch", &RunConfig::stage1_batch},
      {"stage1.max_steps", &RunConfig::stage1_max_steps},
      {"stage1.freeze_ab", &RunConfig::stage1_freeze_ab},
      {"stage1.lambda_w", &RunConfig::stage1_lambda_w},
      {"stage1.alpha0", &RunConfig::stage1_alpha0},
      {"stage1.plateau_tol", &RunConfig::stage1_plateau_tol},
      {"stage1.plateau_window", &RunConfig::stage1_plateau_window},
      {"stage1.n_eval", &RunConfig::stage1_n_eval},
      {"stage2.m2", &RunConfig::stage2_m2},
      {"stage2.h2", &RunConfig::stage2_h2},
      {"stage2.lambda", &RunConfig::stage2_lambda},
      {"stage2.n_fit", &RunConfig::stage2_n_fit},
      {"stage2.target_mode", &RunConfig::stage2_target_mode},
      {"stage2.time_feature", &RunConfig::stage2_time_feature},
      {"stage2.iterative", &RunConfig::stage2_iterative},
      {"stage2.lr", &RunConfig::stage2_lr},
      {"stage2.steps", &RunConfig::stage2_steps},
      {"hn.L", &RunConfig::hn_L},
      {"hn.m2", &RunConfig::hn_m2},
      {"hn.gate_h", &RunConfig::hn_gate_h},
      {"hn.lambda", &RunConfig::hn_lambda},
      {"hn.n_fit", &RunConfig::hn_n_fit},
      {"sampler.n_steps", &RunConfig::sampler_n_steps},
      {"sampler.t_min", &RunConfig::sampler_t_min},
      {"sampler.grid", &RunConfig::sampler_grid},
      {"sampler.kind", &RunConfig::sampler_kind},
      {"metrics.n_samples", &RunConfig::metrics_n_samples},
      {"metrics.n_proj", &RunConfig::metrics_n_proj},
      {"metrics.samples_format", &RunConfig::metrics_samples_format},
      {"sweep.h1", &RunConfig::sweep_h1},
      {"sweep.n_fit", &RunConfig::sweep_n_fit},
      {"sweep.n_train", &RunConfig::sweep_n_train},
      {"sweep.seeds", &RunConfig::sweep_seeds},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for '" + key + "': " + v);
  }
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config: bad integer value for '" + key + "': " + v);
  }
  return out;
}

std::vector<double> parse_vec(const std::string& key, const std::string& v) {
  std::string s = trim(v);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
    throw ConfigError("config: expected [a, b, ...] for '" + key + "'");
  }
  s = s.substr(1, s.size() - 2);
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_double(key, item));
  }
  if (out.empty()) {
    throw ConfigError("config: empty list for '" + key + "'");
  }
  return out;
}

void set_field(RunConfig& cfg, const Field& f, const std::string& value) {
  const std::string key = f.key;
  std::visit(
      [&](auto member) {
        using T = std::remove_cv_t<std::remove_reference_t<decltype(cfg.*member)>>;
        if constexpr (std::is_same_v<T, std::uint64_t>) {
          const std::int64_t x = parse_int(key, value);
          if (x < 0) throw ConfigError("config: '" + key + "' must be >= 0");
          cfg.*member = static_cast<std::uint64_t>(x);
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          cfg.*member = static_cast<T>(parse_int(key, value));
        } else if constexpr (std::is_same_v<T, double>) {
          cfg.*member = parse_double(key, value);
        } else if constexpr (std::is_same_v<T, bool>) {
          if (value == "true") {
            cfg.*member = true;
          } else if (value == "false") {
            cfg.*member = false;
          } else {
            throw ConfigError("config: '" + key + "' must be true or false");
          }
        } else if constexpr (std::is_same_v<T, std::string>) {
          cfg.*member = value;
        } else {
          cfg.*member = parse_vec(key, value);
        }
      },
      f.member);
}

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string get_field(const RunConfig& cfg, const Field& f) {
  return std::visit(
      [&](auto member) -> std::string {
        using T = std::remove_cv_t<std::remove_reference_t<decltype(cfg.*member)>>;
        if constexpr (std::is_same_v<T, std::uint64_t> ||
                      std::is_same_v<T, std::int64_t>) {
          return std::to_string(cfg.*member);
        } else if constexpr (std::is_same_v<T, double>) {
          return fmt_double(cfg.*member);
        } else if constexpr (std::is_same_v<T, bool>) {
          return (cfg.*member) ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return cfg.*member;
        } else {
          std::string out = "[";
          const auto& v = cfg.*member;
          for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ", ";
            out += fmt_double(v[i]);
          }
          out += "]";
          return out;
        }
      },
      f.member);
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

RunConfig from_kv(const std::map<std::string, std::string>& kv) {
  RunConfig cfg;
  // The preset named in the file (or the default) establishes the base
  // values; explicit keys then override it.
  auto it = kv.find("preset");
  apply_preset(cfg, it != kv.end() ? it->second : cfg.preset);
  for (const auto& [key, value] : kv) {
    const Field* f = find_field(key);
    if (f == nullptr) throw ConfigError("config: unknown key '" + key + "'");
    set_field(cfg, *f, value);
  }
  validate(cfg);
  return cfg;
}

void flatten_json(const nlohmann::json& j, const std::string& prefix,
                  std::map<std::string, std::string>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      flatten_json(v, prefix.empty() ? k : prefix + "." + k, out);
    }
    return;
  }
  std::string value;
  if (j.is_string()) {
    value = j.get<std::string>();
  } else if (j.is_boolean()) {
    value = j.get<bool>() ? "true" : "false";
  } else if (j.is_array()) {
    value = "[";
    bool first = true;
    for (const auto& e : j) {
      if (!e.is_number()) {
        throw ConfigError("config: list values must be numeric: " + prefix);
      }
      if (!first) value += ", ";
      value += fmt_double(e.get<double>());
      first = false;
    }
    value += "]";
  } else if (j.is_number_integer()) {
    value = std::to_string(j.get<std::int64_t>());
  } else if (j.is_number()) {
    value = fmt_double(j.get<double>());
  } else {
    throw ConfigError("config: unsupported JSON value at '" + prefix + "'");
  }
  if (!out.emplace(prefix, value).second) {
    throw ConfigError("config: duplicate key '" + prefix + "'");
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " is not 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config: empty key on line " + std::to_string(lineno));
    }
    if (!kv.emplace(key, value).second) {
      throw ConfigError("config: duplicate key '" + key + "'");
    }
  }
  return from_kv(kv);
}

RunConfig parse_config_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: JSON root must be an object");
  std::map<std::string, std::string> kv;
  flatten_json(j, "", kv);
  return from_kv(kv);
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    return parse_config_json(text);
  }
  return parse_config_text(text);
}

std::string to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += get_field(cfg, f);
    out += '\n';
  }
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = to_text(cfg);
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

void apply_preset(RunConfig& cfg, const std::string& name) {
  if (name == "none") {
    cfg.preset = "none";
    return;
  }
  if (name != "toy-mog") {
    throw ConfigError("config: unknown preset '" + name + "'");
  }
  cfg.preset = "toy-mog";
  cfg.model_d = 100;
  cfg.model_k = 5;
  cfg.model_components = 3;
  cfg.model_mode_radius = 2.0;
  cfg.model_latent_std = 0.5;
  cfg.schedule_kind = "fixed";
  cfg.schedule_fixed_sigma = 0.1;
  cfg.stage1_m = 200;
  cfg.stage1_h1 = 0.01;
  cfg.stage1_lr = 1e-3;
  cfg.stage1_optimizer = "adam";
  cfg.stage1_batch = 4096;
  // A large output-layer init makes the two-phase picture legible: the
  // orthogonal component starts far above its converged floor and the
  // decay spans several decades before the tangential fit moves.
  cfg.stage1_alpha0 = 10.0;
  cfg.stage1_max_steps = 6000;
  cfg.stage2_m2 = 256;
  cfg.stage2_lr = 5e-3;
}

void validate(const RunConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("config: ") + what);
  };
  require(cfg.model_d >= 1 && cfg.model_k >= 1 && cfg.model_k <= cfg.model_d,
          "need 1 <= model.k <= model.d");
  require(cfg.model_components >= 1, "model.components must be >= 1");
  require(cfg.model_latent_std >= 0.0, "model.latent_std must be >= 0");
  require(cfg.model_n_train >= 1, "model.n_train must be >= 1");
  require(cfg.schedule_kind == "fixed" || cfg.schedule_kind == "vp",
          "schedule.kind must be 'fixed' or 'vp'");
  require(cfg.schedule_fixed_sigma > 0.0, "schedule.fixed_sigma must be > 0");
  require(cfg.schedule_beta_min > 0.0 &&
              cfg.schedule_beta_max >= cfg.schedule_beta_min,
          "need 0 < schedule.beta_min <= schedule.beta_max");
  require(cfg.schedule_T > 0.0, "schedule.T must be > 0");
  require(cfg.stage1_m >= 1, "stage1.m must be >= 1");
  require(cfg.stage1_h1 > 0.0, "stage1.h1 must be > 0");
  require(cfg.stage1_lr > 0.0, "stage1.lr must be > 0");
  require(cfg.stage1_optimizer == "adam" || cfg.stage1_optimizer == "sgd",
          "stage1.optimizer must be 'adam' or 'sgd'");
  require(cfg.stage1_batch >= 1 && cfg.stage1_max_steps >= 1,
          "stage1 batch/max_steps must be >= 1");
  require(cfg.stage1_lambda_w >= 0.0, "stage1.lambda_w must be >= 0");
  require(cfg.log_every >= 1, "log_every must be >= 1");
  require(cfg.stage2_m2 >= 1 && cfg.stage2_n_fit >= 1,
          "stage2 sizes must be >= 1");
  require(cfg.stage2_h2 > 0.0, "stage2.h2 must be > 0");
  require(cfg.stage2_target_mode == "dsm" || cfg.stage2_target_mode == "oracle",
          "stage2.target_mode must be 'dsm' or 'oracle'");
  require(cfg.hn_L >= 1 && cfg.hn_m2 >= 1 && cfg.hn_n_fit >= 1,
          "hn sizes must be >= 1");
  require(cfg.hn_gate_h > 0.0 && cfg.hn_gate_h < 1.0,
          "hn.gate_h must be in (0, 1)");
  require(cfg.sampler_n_steps >= 1, "sampler.n_steps must be >= 1");
  require(cfg.sampler_t_min > 0.0 && cfg.sampler_t_min < cfg.schedule_T,
          "need 0 < sampler.t_min < schedule.T");
  require(cfg.sampler_grid == "uniform" || cfg.sampler_grid == "geometric_h",
          "sampler.grid must be 'uniform' or 'geometric_h'");
  require(cfg.sampler_kind == "euler_maruyama" ||
              cfg.sampler_kind == "ddpm_ancestral",
          "sampler.kind must be 'euler_maruyama' or 'ddpm_ancestral'");
  require(cfg.metrics_n_samples >= 1 && cfg.metrics_n_proj >= 1,
          "metrics sizes must be >= 1");
  require(cfg.metrics_samples_format == "csv" ||
              cfg.metrics_samples_format == "binary",
          "metrics.samples_format must be 'csv' or 'binary'");
  require(!cfg.sweep_h1.empty() && !cfg.sweep_n_fit.empty() &&
              !cfg.sweep_n_train.empty() && cfg.sweep_seeds >= 1,
          "sweep lists must be non-empty, sweep.seeds >= 1");
  for (const double h : cfg.sweep_h1) {
    require(h > 0.0 && h < 1.0, "sweep.h1 entries must be in (0, 1)");
  }
}

}  // namespace sild
