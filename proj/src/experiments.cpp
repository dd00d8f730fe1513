// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sild/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sild/oracle.hpp"
#include "sild/svg.hpp"

namespace sild {
namespace {

using nlohmann::json;

// Fixed sub-stream keys: every pipeline derives all randomness from the
// config seed via rng.split with these, so results depend only on
// (config, seed), not on evaluation order.
constexpr std::uint64_t kKeyModel = 0x11;
constexpr std::uint64_t kKeyPool = 0x22;
constexpr std::uint64_t kKeyStage1Init = 0x33;
constexpr std::uint64_t kKeyStage1Train = 0x44;
constexpr std::uint64_t kKeyStage2 = 0x55;
constexpr std::uint64_t kKeyHn = 0x66;
constexpr std::uint64_t kKeySampler = 0x77;
constexpr std::uint64_t kKeyEval = 0x88;
constexpr std::uint64_t kKeyHeldOut = 0x99;

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

const LinearManifold& require_linear(const DataModel& model,
                                     const char* what) {
  const auto* lin = std::get_if<LinearManifold>(&model.manifold);
  if (lin == nullptr) {
    throw std::runtime_error(std::string(what) +
                             ": linear-subspace support required");
  }
  return *lin;
}

OptimizerKind optimizer_from(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd") return OptimizerKind::Sgd;
  throw ConfigError("unknown optimizer: " + name);
}

NoiseSchedule base_schedule(const RunConfig& cfg) {
  if (cfg.schedule_kind == "vp") {
    return NoiseSchedule::vp_linear(cfg.schedule_beta_min,
                                    cfg.schedule_beta_max, cfg.schedule_T);
  }
  return NoiseSchedule::fixed(cfg.schedule_fixed_sigma, cfg.schedule_T);
}

// In fixed mode the base schedule pins a single level, so Stage 1 only
// makes sense when that level is the training level.
void check_fixed_consistency(const RunConfig& cfg) {
  if (cfg.schedule_kind != "fixed") return;
  const double h = cfg.schedule_fixed_sigma * cfg.schedule_fixed_sigma;
  if (std::abs(h - cfg.stage1_h1) > 1e-12) {
    throw ConfigError(
        "fixed schedule: schedule.fixed_sigma^2 must equal stage1.h1");
  }
}

Stage1TrainConfig stage1_train_config(const RunConfig& cfg) {
  Stage1TrainConfig tc;
  tc.max_steps = cfg.stage1_max_steps;
  tc.batch = cfg.stage1_batch;
  tc.lr = cfg.stage1_lr;
  tc.optimizer = optimizer_from(cfg.stage1_optimizer);
  tc.log_every = cfg.log_every;
  tc.plateau_tol = cfg.stage1_plateau_tol;
  tc.plateau_window = cfg.stage1_plateau_window;
  tc.n_eval = cfg.stage1_n_eval;
  tc.log_wall_ms = cfg.log_wall_ms;
  return tc;
}

Stage1Params stage1_init_from(const RunConfig& cfg, Rng rng, double h1) {
  Stage1Params p =
      init_stage1(rng, cfg.model_d, cfg.stage1_m, h1, cfg.stage1_alpha0);
  p.freeze_ab = cfg.stage1_freeze_ab;
  p.l2_w = cfg.stage1_lambda_w;
  return p;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string resolve_checkpoint_path(const RunConfig& cfg) {
  const std::filesystem::path p(cfg.checkpoint_path);
  if (p.is_absolute()) return p.string();
  return join_path(cfg.out_dir, cfg.checkpoint_path);
}

void ensure_out_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
}

void write_json_file(const std::string& path, const json& j) {
  write_file(path, j.dump(2) + "\n");
}

void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& artifacts) {
  json j;
  j["command"] = command;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["artifacts"] = artifacts;
  j["config_text"] = to_text(cfg);
  write_json_file(join_path(cfg.out_dir, "run_manifest.json"), j);
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json score_mse_json(const ScoreMse& m) {
  return json{
      {"total", m.total}, {"tangential", m.tangential}, {"normal", m.normal}};
}

// Relative spread (max - min) / final over the points at or after
// start_frac of the step range; the Stage-1 flatness diagnostic for the
// component Stage 2 later refines.
double window_flatness(const std::vector<double>& steps,
                       const std::vector<double>& values, double start_frac) {
  if (steps.size() != values.size() || steps.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double cut = start_frac * steps.back();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] < cut) continue;
    lo = std::min(lo, values[i]);
    hi = std::max(hi, values[i]);
  }
  const double last = values.back();
  if (!(last > 0.0) || !(hi >= lo)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return (hi - lo) / last;
}

// Fraction of Stage 1 treated as warm-up before the flatness window opens:
// the learned projection needs to form before "flat" is meaningful.
constexpr double kFlatnessStartFrac = 0.4;

std::vector<double> sorted_unique(std::vector<double> v, bool descending) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  if (descending) std::reverse(v.begin(), v.end());
  return v;
}

double w2_auto(const Matrix& X, const Matrix& Y, Index n_proj, Rng& rng) {
  if (X.cols() <= 256 && Y.cols() <= 256) return w2_exact(X, Y);
  return w2_sliced(X, Y, n_proj, rng);
}

}  // namespace

NoiseLevel level_for_h(const RunConfig& cfg, double h) {
  if (!(h > 0.0)) throw ConfigError("noise level h must be positive");
  if (cfg.schedule_kind == "vp") {
    const NoiseSchedule s = NoiseSchedule::vp_linear(
        cfg.schedule_beta_min, cfg.schedule_beta_max, cfg.schedule_T);
    return NoiseLevel{s, s.time_of_h(h)};
  }
  return NoiseLevel{NoiseSchedule::fixed(std::sqrt(h), cfg.schedule_T),
                    0.5 * cfg.schedule_T};
}

DataModel make_model(const RunConfig& cfg, Rng rng) {
  if (cfg.model_k < 2) {
    throw ConfigError(
        "model.k must be >= 2 (modes live in the first two latent "
        "coordinates)");
  }
  Matrix A = orthonormal_basis(rng, cfg.model_d, cfg.model_k);
  return DataModel(
      LinearManifold(std::move(A)),
      toy_mog_latent(cfg.model_k, cfg.model_mode_radius, cfg.model_latent_std,
                     cfg.model_components));
}

ToyResult run_toy_pipeline(const RunConfig& cfg, bool write_artifacts) {
  const auto t0 = std::chrono::steady_clock::now();
  check_fixed_consistency(cfg);

  Rng root(cfg.seed);
  const DataModel model = make_model(cfg, root.split(kKeyModel));
  const LinearManifold& lin = require_linear(model, "toy pipeline");

  const NoiseLevel l1 = level_for_h(cfg, cfg.stage1_h1);
  const NoiseLevel l2 = level_for_h(cfg, cfg.stage2_h2);
  const double h2 = l2.sched.h(l2.t);

  const AmbientMoG amb2 = ambient_mog(lin, model.mog, l2.sched, l2.t);
  const BatchScoreFn oracle2 = [&amb2](const Matrix& X, double) -> Matrix {
    return exact_score_linear(amb2, X);
  };

  // Track, at every logged Stage-1 step, the tangential error at the
  // *evaluation* level h2 of the score the projection alone induces there,
  // -(x - x_hat)/h2. This is the component Stage 2 is responsible for; at
  // the training level the normal part dominates instead.
  std::vector<double> man_steps;
  std::vector<double> man_vals;
  Rng eval_root = root.split(kKeyEval);
  Stage1TrainConfig tc = stage1_train_config(cfg);
  tc.on_log = [&](std::int64_t step, const Stage1Params& q) {
    Rng r = eval_root.split(0x7A2E000000000000ull ^
                            static_cast<std::uint64_t>(step));
    const BatchScoreFn cand = [&q, h2](const Matrix& X, double) -> Matrix {
      return (projection_hat(q, X) - X) / h2;
    };
    const ScoreMse m = score_mse_decomposed(model, l2.sched, l2.t, cand,
                                            oracle2, cfg.stage1_n_eval, r);
    man_steps.push_back(static_cast<double>(step));
    man_vals.push_back(m.tangential);
  };

  std::vector<TrainLogRow> log;
  Stage1Params s1;
  try {
    Stage1Params p0 = stage1_init_from(cfg, root.split(kKeyStage1Init),
                                       cfg.stage1_h1);
    Rng train_rng = root.split(kKeyStage1Train);
    s1 = train_stage1(std::move(p0), model, l1.sched, l1.t, tc, train_rng,
                      &log);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage1: ") + e.what());
  }
  const std::int64_t stage1_steps = log.empty() ? 0 : log.back().step;

  RFHead head;
  Stage2Targets targets;
  double closed_obj = 0.0;
  double gd_obj = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> h_ts =
      cfg.stage2_time_feature ? std::vector<double>{h2} : std::vector<double>{};
  try {
    Rng r2 = root.split(kKeyStage2);
    head = init_rf_head(r2, cfg.model_d, cfg.stage2_m2,
                        cfg.stage2_time_feature, cfg.stage2_lambda);
    const Stage2TargetMode mode = cfg.stage2_target_mode == "oracle"
                                      ? Stage2TargetMode::Oracle
                                      : Stage2TargetMode::Dsm;
    targets = build_stage2_targets(mode, s1, model, l2.sched, l2.t,
                                   cfg.stage2_n_fit, r2, cfg.hn_gate_h);
    ridge_fit(head, targets.xhat, targets.y, h_ts);
    closed_obj = ridge_objective(head, rf_features(head, targets.xhat, h_ts),
                                 targets.y);
    if (cfg.stage2_iterative) {
      // Same frozen features and resolved lambda, optimized iteratively:
      // the closed form must win or match.
      RFHead gd_head = head;
      gd_head.U.setZero();
      gd_obj = ridge_fit_gd(gd_head, targets.xhat, targets.y,
                            cfg.stage2_steps, cfg.stage2_lr, h_ts);
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage2: ") + e.what());
  }

  // Held-out comparison at the evaluation level, paired draws: the
  // projection-only score (head off) against the assembled score.
  const BatchScoreFn s1_only = [&s1, h2](const Matrix& X, double) -> Matrix {
    return (projection_hat(s1, X) - X) / h2;
  };
  const BatchScoreFn assembled = [&s1, &head, &l2](const Matrix& X,
                                                   double) -> Matrix {
    return sild_score(s1, head, l2.sched, X, l2.t);
  };
  const Index n_heldout = 2048;
  Rng held = root.split(kKeyHeldOut);
  Rng ea = held.split(1);
  Rng eb = held.split(1);
  const ScoreMse mse_before = score_mse_decomposed(
      model, l2.sched, l2.t, s1_only, oracle2, n_heldout, ea);
  const ScoreMse mse_after = score_mse_decomposed(
      model, l2.sched, l2.t, assembled, oracle2, n_heldout, eb);

  Checkpoint ckpt(model, base_schedule(cfg), s1);
  ckpt.rf = head;
  ckpt.gate_h = cfg.hn_gate_h;
  ckpt.config_hash = config_hash(cfg);
  ckpt.stage1_steps = stage1_steps;

  ToyResult res(std::move(ckpt));
  res.log = std::move(log);
  res.man_t2_steps = std::move(man_steps);
  res.man_t2_values = std::move(man_vals);
  res.mse_stage1_only = mse_before;
  res.mse_after = mse_after;
  res.ridge_lambda = head.lambda;
  res.closed_objective = closed_obj;
  res.gd_objective = gd_obj;
  res.stage1_steps = stage1_steps;
  res.seconds = seconds_since(t0);

  if (write_artifacts) {
    ensure_out_dir(cfg.out_dir);
    std::vector<std::string> artifacts;

    write_file(join_path(cfg.out_dir, "train_log.csv"),
               train_log_csv(res.log));
    artifacts.push_back("train_log.csv");

    // Panel 1: training curves, straight from the log rows.
    {
      std::vector<double> xs, loss, man, orth;
      for (const TrainLogRow& row : res.log) {
        xs.push_back(static_cast<double>(row.step));
        loss.push_back(row.dsm_loss);
        man.push_back(row.manifold_err);
        orth.push_back(row.orthogonal_err);
      }
      PlotOptions opt;
      opt.title = "Two-stage training";
      opt.xlabel = "step";
      opt.ylabel = "value (log scale)";
      opt.logy = true;
      opt.vline = static_cast<double>(stage1_steps);
      opt.vline_label = "ridge fit";
      const std::vector<Series> series = {
          {"dsm loss", xs, loss, ""},
          {"manifold error", xs, man, ""},
          {"orthogonal error", xs, orth, ""}};
      write_file(join_path(cfg.out_dir, "fig_training.svg"),
                 render_line_plot(series, opt));
      artifacts.push_back("fig_training.svg");
    }

    // Panel 2: score along the first latent direction (passes through the
    // angle-0 mode), learned vs analytic, at the evaluation level.
    {
      const Vector dir = lin.A.col(0);
      std::vector<double> xs, learned, analytic;
      const int n_pts = 201;
      for (int i = 0; i < n_pts; ++i) {
        const double s = -4.0 + 8.0 * static_cast<double>(i) / (n_pts - 1);
        const Vector x = s * dir;
        xs.push_back(s);
        learned.push_back(dir.dot(sild_score(s1, head, l2.sched, x, l2.t)));
        analytic.push_back(dir.dot(exact_score_linear(amb2, x)));
      }
      PlotOptions opt;
      opt.title = "Tangential score profile";
      opt.xlabel = "latent coordinate 1";
      opt.ylabel = "tangential score";
      const std::vector<Series> series = {{"learned", xs, learned, ""},
                                          {"analytic", xs, analytic, ""}};
      write_file(join_path(cfg.out_dir, "fig_tangential.svg"),
                 render_line_plot(series, opt));
      artifacts.push_back("fig_tangential.svg");
    }

    // Panel 3: score along a normal direction off the first mode; the
    // analytic normal component is exactly -s/h2.
    {
      const Index d = cfg.model_d;
      Vector nu = Vector::Zero(d);
      double best = -1.0;
      for (Index i = 0; i < d; ++i) {
        const Vector e = Vector::Unit(d, i);
        const Vector c = e - lin.A * (lin.A.transpose() * e);
        if (c.norm() > best) {
          best = c.norm();
          nu = c;
        }
      }
      nu.normalize();
      const Vector z0 = lin.A * (l2.sched.a(l2.t) * model.mog.means[0]);
      std::vector<double> xs, learned, analytic;
      const int n_pts = 121;
      const double span = 3.0 * std::sqrt(h2);
      for (int i = 0; i < n_pts; ++i) {
        const double s = -span + 2.0 * span * static_cast<double>(i) /
                                     (n_pts - 1);
        const Vector x = z0 + s * nu;
        xs.push_back(s);
        learned.push_back(nu.dot(sild_score(s1, head, l2.sched, x, l2.t)));
        analytic.push_back(-s / h2);
      }
      PlotOptions opt;
      opt.title = "Normal score profile";
      opt.xlabel = "normal offset";
      opt.ylabel = "normal score";
      const std::vector<Series> series = {{"learned", xs, learned, ""},
                                          {"analytic -s/h", xs, analytic, ""}};
      write_file(join_path(cfg.out_dir, "fig_normal.svg"),
                 render_line_plot(series, opt));
      artifacts.push_back("fig_normal.svg");
    }

    {
      json m;
      m["config_hash"] = config_hash(cfg);
      m["stage1_steps"] = res.stage1_steps;
      m["runtime_seconds"] = res.seconds;
      m["orthogonal_err_first"] = res.log.front().orthogonal_err;
      m["orthogonal_err_last"] = res.log.back().orthogonal_err;
      m["orthogonal_collapse_factor"] =
          res.log.front().orthogonal_err /
          std::max(res.log.back().orthogonal_err, 1e-300);
      m["manifold_eval_steps"] = res.man_t2_steps;
      m["manifold_eval_values"] = res.man_t2_values;
      m["manifold_flatness_start_frac"] = kFlatnessStartFrac;
      m["manifold_flatness"] = window_flatness(
          res.man_t2_steps, res.man_t2_values, kFlatnessStartFrac);
      m["mse_stage1_only"] = score_mse_json(res.mse_stage1_only);
      m["mse_after_ridge"] = score_mse_json(res.mse_after);
      m["stage2_improvement_factor"] =
          res.mse_stage1_only.tangential /
          std::max(res.mse_after.tangential, 1e-300);
      m["ridge_lambda"] = res.ridge_lambda;
      m["ridge_objective_closed"] = res.closed_objective;
      if (cfg.stage2_iterative) {
        m["ridge_objective_gd"] = res.gd_objective;
      }
      write_json_file(join_path(cfg.out_dir, "metrics.json"), m);
      artifacts.push_back("metrics.json");
    }

    save_checkpoint(resolve_checkpoint_path(cfg), res.ckpt);
    artifacts.push_back(cfg.checkpoint_path);
    write_manifest(cfg, "reproduce-toy", artifacts);
  }
  return res;
}

RateSweepResult run_rate_sweep(const RunConfig& cfg, bool write_artifacts) {
  if (cfg.sweep_h1.empty()) {
    throw ConfigError("rate sweep: sweep.h1 is empty");
  }
  for (double h1 : cfg.sweep_h1) {
    if (!(h1 > 0.0) || !(h1 < 1.0)) {
      throw ConfigError("rate sweep: every h1 must lie in (0, 1)");
    }
  }
  RateSweepResult out;
  out.h1_desc = sorted_unique(cfg.sweep_h1, /*descending=*/true);

  for (Index seed_idx = 0; seed_idx < cfg.sweep_seeds; ++seed_idx) {
    Rng sroot =
        Rng(cfg.seed).split(0xA7E5000000000000ull +
                            static_cast<std::uint64_t>(seed_idx));
    const DataModel model = make_model(cfg, sroot.split(kKeyModel));
    require_linear(model, "rate sweep");
    for (double h1 : out.h1_desc) {
      RateCell cell;
      cell.h1 = h1;
      cell.seed = seed_idx;
      try {
        // Shared init and batch streams across the h1 cells of one seed:
        // the comparison is paired, only the noise level moves.
        Rng init_rng = sroot.split(kKeyStage1Init);
        Stage1Params p = init_stage1(init_rng, cfg.model_d, cfg.stage1_m, h1,
                                     cfg.stage1_alpha0);
        p.freeze_ab = true;  // only W moves: the alignment dynamic itself
        p.l2_w = cfg.stage1_lambda_w;
        const NoiseLevel l = level_for_h(cfg, h1);
        Stage1TrainConfig tc = stage1_train_config(cfg);
        tc.optimizer = OptimizerKind::Sgd;  // plain dynamics, no adaptivity
        tc.plateau_tol = -1.0;              // run the full budget
        tc.log_wall_ms = false;
        std::vector<TrainLogRow> log;
        Rng tr = sroot.split(kKeyStage1Train);
        train_stage1(std::move(p), model, l.sched, l.t, tc, tr, &log);
        std::vector<double> steps, values;
        for (const TrainLogRow& row : log) {
          steps.push_back(static_cast<double>(row.step));
          values.push_back(row.alignment_risk_F);
        }
        cell.rate = fit_exp_rate(steps, values);
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
      }
      out.cells.push_back(cell);
    }
  }

  bool all_ok = true;
  for (double h1 : out.h1_desc) {
    std::vector<double> rates;
    for (const RateCell& c : out.cells) {
      if (c.h1 == h1 && c.ok) rates.push_back(c.rate);
      if (c.h1 == h1 && !c.ok) all_ok = false;
    }
    out.median_rates.push_back(
        rates.empty() ? std::numeric_limits<double>::quiet_NaN()
                      : median(rates));
  }
  out.verdict_applicable = all_ok && out.h1_desc.size() >= 2;
  if (out.verdict_applicable) {
    out.monotone = true;
    for (std::size_t i = 1; i < out.median_rates.size(); ++i) {
      // h1 descends along the list, so rates must strictly rise.
      if (!(out.median_rates[i] > out.median_rates[i - 1])) {
        out.monotone = false;
      }
    }
  }

  if (write_artifacts) {
    ensure_out_dir(cfg.out_dir);
    std::string csv = "h1,seed,rate,ok,error\n";
    char buf[256];
    for (const RateCell& c : out.cells) {
      std::string err = c.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::snprintf(buf, sizeof buf, "%.17g,%lld,%.17g,%d,", c.h1,
                    static_cast<long long>(c.seed), c.rate, c.ok ? 1 : 0);
      csv += buf + err + "\n";
    }
    write_file(join_path(cfg.out_dir, "rate_sweep.csv"), csv);

    json j;
    j["config_hash"] = config_hash(cfg);
    j["h1"] = out.h1_desc;
    j["median_rate"] = out.median_rates;
    j["verdict_applicable"] = out.verdict_applicable;
    j["monotone"] = out.monotone;
    write_json_file(join_path(cfg.out_dir, "rate_sweep.json"), j);

    bool plottable = true;
    for (double r : out.median_rates) plottable = plottable && std::isfinite(r);
    if (plottable && !out.h1_desc.empty()) {
      PlotOptions opt;
      opt.title = "Early-phase collapse rate vs noise level";
      opt.xlabel = "h1";
      opt.ylabel = "fitted rate per step";
      std::vector<double> xs(out.h1_desc.rbegin(), out.h1_desc.rend());
      std::vector<double> ys(out.median_rates.rbegin(),
                             out.median_rates.rend());
      write_file(join_path(cfg.out_dir, "fig_rates.svg"),
                 render_line_plot({{"median rate", xs, ys, ""}}, opt));
    }
    write_manifest(cfg, "rate-sweep",
                   {"rate_sweep.csv", "rate_sweep.json", "fig_rates.svg"});
  }
  return out;
}

Stage2SweepResult run_stage2_sweep(const RunConfig& cfg,
                                   bool write_artifacts) {
  if (cfg.sweep_n_fit.empty() || cfg.sweep_h1.empty()) {
    throw ConfigError("stage-2 sweep: empty grid");
  }
  Stage2SweepResult out;
  out.n_values = sorted_unique(cfg.sweep_n_fit, /*descending=*/false);
  out.h1_values = sorted_unique(cfg.sweep_h1, /*descending=*/false);
  for (double n : out.n_values) {
    if (!(n >= 1.0)) throw ConfigError("stage-2 sweep: n_fit must be >= 1");
  }
  for (double h1 : out.h1_values) {
    if (!(h1 > 0.0) || !(h1 < 1.0)) {
      throw ConfigError("stage-2 sweep: every h1 must lie in (0, 1)");
    }
  }

  const Index n_eval = 2048;
  std::vector<std::vector<double>> est(out.n_values.size());
  std::vector<std::vector<double>> resid(out.h1_values.size());
  char buf[160];

  for (Index seed_idx = 0; seed_idx < cfg.sweep_seeds; ++seed_idx) {
    Rng sroot =
        Rng(cfg.seed).split(0x57A2E20000000000ull +
                            static_cast<std::uint64_t>(seed_idx));
    const DataModel model = make_model(cfg, sroot.split(kKeyModel));
    const LinearManifold& lin = require_linear(model, "stage-2 sweep");
    const NoiseLevel l2 = level_for_h(cfg, cfg.stage2_h2);
    const AmbientMoG amb2 = ambient_mog(lin, model.mog, l2.sched, l2.t);
    const BatchScoreFn oracle2 = [&amb2](const Matrix& X, double) -> Matrix {
      return exact_score_linear(amb2, X);
    };
    const std::function<Matrix(const Matrix&)> proj_exact =
        [&lin](const Matrix& X) -> Matrix {
      return lin.A * (lin.A.transpose() * X);
    };
    Rng head_rng = sroot.split(kKeyStage2);
    const RFHead head0 = init_rf_head(head_rng, cfg.model_d, cfg.stage2_m2,
                                      false, cfg.stage2_lambda);

    // Part A: estimation error of the ridge fit against the true residual,
    // with the exact projection injected (no Stage-1 confound). Held-out
    // draws are shared across the n cells of one seed.
    for (std::size_t ni = 0; ni < out.n_values.size(); ++ni) {
      const Index n_fit = static_cast<Index>(std::llround(out.n_values[ni]));
      Rng rn = sroot.split(0xA100 + static_cast<std::uint64_t>(ni));
      const Stage2Targets tg =
          build_stage2_targets(Stage2TargetMode::Dsm, proj_exact, model,
                               l2.sched, l2.t, n_fit, rn, cfg.hn_gate_h);
      RFHead head = head0;
      ridge_fit(head, tg.xhat, tg.y);

      Rng re = sroot.split(0xE100);
      const Matrix x0 = sample_x0(model, re, n_eval);
      const ForwardBatch fb = forward_perturb(l2.sched, x0, l2.t, re);
      const Matrix xh = proj_exact(fb.x_t);
      const Matrix pred = head.U * rf_features(head, xh);
      Matrix truth(xh.rows(), xh.cols());
      for (Index j = 0; j < xh.cols(); ++j) {
        truth.col(j) = residual_score(lin, model.mog, l2.sched, xh.col(j),
                                      l2.t);
      }
      const double mse = (pred - truth).squaredNorm() /
                         static_cast<double>(n_eval);
      est[ni].push_back(mse);
      std::snprintf(buf, sizeof buf, "n_fit,%lld,%lld,%.17g\n",
                    static_cast<long long>(n_fit),
                    static_cast<long long>(seed_idx), mse);
      out.rows.push_back(buf);
    }

    // Part B: assembled-score error at the fixed evaluation level as the
    // Stage-1 training level h1 varies, one net per cell, equal budget,
    // shared init and batch streams.
    for (std::size_t hi = 0; hi < out.h1_values.size(); ++hi) {
      const double h1 = out.h1_values[hi];
      const NoiseLevel l1 = level_for_h(cfg, h1);
      Rng init_rng = sroot.split(kKeyStage1Init);
      Stage1Params p = init_stage1(init_rng, cfg.model_d, cfg.stage1_m, h1,
                                   cfg.stage1_alpha0);
      p.l2_w = cfg.stage1_lambda_w;
      Stage1TrainConfig tc = stage1_train_config(cfg);
      tc.plateau_tol = -1.0;  // equal budget across cells
      tc.log_wall_ms = false;
      Rng tr = sroot.split(kKeyStage1Train);
      const Stage1Params s1 =
          train_stage1(std::move(p), model, l1.sched, l1.t, tc, tr, nullptr);

      Rng rn = sroot.split(0xB100 + static_cast<std::uint64_t>(hi));
      const Stage2Targets tg =
          build_stage2_targets(Stage2TargetMode::Dsm, s1, model, l2.sched,
                               l2.t, cfg.stage2_n_fit, rn, cfg.hn_gate_h);
      RFHead head = head0;
      ridge_fit(head, tg.xhat, tg.y);

      const BatchScoreFn cand = [&s1, &head, &l2](const Matrix& X,
                                                  double) -> Matrix {
        return sild_score(s1, head, l2.sched, X, l2.t);
      };
      Rng re = sroot.split(0xE200);
      const double mse =
          score_mse_decomposed(model, l2.sched, l2.t, cand, oracle2, n_eval,
                               re)
              .total;
      resid[hi].push_back(mse);
      std::snprintf(buf, sizeof buf, "h1,%.17g,%lld,%.17g\n", h1,
                    static_cast<long long>(seed_idx), mse);
      out.rows.push_back(buf);
    }
  }

  for (const std::vector<double>& v : est) {
    out.est_median_mse.push_back(median(v));
  }
  for (const std::vector<double>& v : resid) {
    out.resid_median_mse.push_back(median(v));
  }
  out.est_monotone = out.est_median_mse.size() >= 2;
  for (std::size_t i = 1; i < out.est_median_mse.size(); ++i) {
    if (!(out.est_median_mse[i] < out.est_median_mse[i - 1])) {
      out.est_monotone = false;
    }
  }
  out.resid_monotone = out.resid_median_mse.size() >= 2;
  for (std::size_t i = 1; i < out.resid_median_mse.size(); ++i) {
    if (!(out.resid_median_mse[i] > out.resid_median_mse[i - 1])) {
      out.resid_monotone = false;
    }
  }

  if (write_artifacts) {
    ensure_out_dir(cfg.out_dir);
    std::string csv = "part,value,seed,mse\n";
    for (const std::string& row : out.rows) csv += row;
    write_file(join_path(cfg.out_dir, "stage2_sweep.csv"), csv);

    json j;
    j["config_hash"] = config_hash(cfg);
    j["n_fit"] = out.n_values;
    j["estimation_median_mse"] = out.est_median_mse;
    j["estimation_monotone_decreasing"] = out.est_monotone;
    j["h1"] = out.h1_values;
    j["assembled_median_mse"] = out.resid_median_mse;
    j["assembled_monotone_increasing"] = out.resid_monotone;
    write_json_file(join_path(cfg.out_dir, "stage2_sweep.json"), j);

    {
      PlotOptions opt;
      opt.title = "Ridge estimation error vs fit-set size";
      opt.xlabel = "n_fit";
      opt.ylabel = "held-out MSE (log scale)";
      opt.logy = true;
      write_file(
          join_path(cfg.out_dir, "fig_stage2_n.svg"),
          render_line_plot({{"median MSE", out.n_values, out.est_median_mse,
                             ""}},
                           opt));
    }
    {
      PlotOptions opt;
      opt.title = "Assembled-score error vs Stage-1 level";
      opt.xlabel = "h1";
      opt.ylabel = "held-out MSE";
      write_file(join_path(cfg.out_dir, "fig_stage2_h1.svg"),
                 render_line_plot({{"median MSE", out.h1_values,
                                    out.resid_median_mse, ""}},
                                  opt));
    }
    write_manifest(cfg, "stage2-sweep",
                   {"stage2_sweep.csv", "stage2_sweep.json",
                    "fig_stage2_n.svg", "fig_stage2_h1.svg"});
  }
  return out;
}

VpResult run_vp_pipeline(const RunConfig& cfg, bool write_artifacts) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.schedule_kind != "vp") {
    throw ConfigError("end-to-end pipeline requires schedule.kind = vp");
  }
  Rng root(cfg.seed);
  const DataModel model = make_model(cfg, root.split(kKeyModel));
  const LinearManifold& lin = require_linear(model, "vp pipeline");
  const NoiseSchedule sched = base_schedule(cfg);
  const Index d = cfg.model_d;

  // Every stage consumes the same finite training set; held-out data below
  // is drawn fresh from the model.
  Rng pool_rng = root.split(kKeyPool);
  const Matrix pool = sample_x0(model, pool_rng, cfg.model_n_train);

  const double t1 = sched.time_of_h(cfg.stage1_h1);
  std::vector<TrainLogRow> log;
  Stage1Params s1;
  try {
    Stage1TrainConfig tc = stage1_train_config(cfg);
    tc.x0_pool = &pool;
    Stage1Params p0 = stage1_init_from(cfg, root.split(kKeyStage1Init),
                                       cfg.stage1_h1);
    Rng tr = root.split(kKeyStage1Train);
    s1 = train_stage1(std::move(p0), model, sched, t1, tc, tr, &log);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage1: ") + e.what());
  }

  const double t2 = sched.time_of_h(cfg.stage2_h2);
  RFHead head;
  try {
    Rng r2 = root.split(kKeyStage2);
    head = init_rf_head(r2, d, cfg.stage2_m2, cfg.stage2_time_feature,
                        cfg.stage2_lambda);
    const Stage2TargetMode mode = cfg.stage2_target_mode == "oracle"
                                      ? Stage2TargetMode::Oracle
                                      : Stage2TargetMode::Dsm;
    const Stage2Targets tg =
        build_stage2_targets(mode, s1, model, sched, t2, cfg.stage2_n_fit, r2,
                             cfg.hn_gate_h, &pool);
    const std::vector<double> h_ts =
        cfg.stage2_time_feature ? std::vector<double>{sched.h(t2)}
                                : std::vector<double>{};
    ridge_fit(head, tg.xhat, tg.y, h_ts);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage2: ") + e.what());
  }

  // High-noise head over [t_gate, T]: pool columns, per-sample times.
  const double t_gate = sched.time_of_h(cfg.hn_gate_h);
  HNHead hn;
  try {
    Rng rh = root.split(kKeyHn);
    hn = init_hn_head(rh, d, cfg.hn_m2, cfg.hn_L, t_gate, cfg.schedule_T,
                      cfg.hn_lambda);
    const Index n_hn = cfg.hn_n_fit;
    Matrix Xh(d, n_hn), Yh(d, n_hn);
    std::vector<double> ts(static_cast<std::size_t>(n_hn));
    for (Index j = 0; j < n_hn; ++j) {
      const Vector x0 = pool.col(static_cast<Index>(
          rh.index(static_cast<std::uint64_t>(pool.cols()))));
      const double t = rh.uniform(t_gate, cfg.schedule_T);
      const ForwardSample fsamp = forward_perturb(sched, x0, t, rh);
      Xh.col(j) = fsamp.x_t;
      Yh.col(j) = dsm_target(fsamp);
      ts[static_cast<std::size_t>(j)] = t;
    }
    hn_ridge_fit(hn, Xh, ts, Yh);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("high-noise fit: ") + e.what());
  }

  FullScore fs{s1, head, hn, sched, cfg.hn_gate_h};

  Rng ge = root.split(kKeyEval);
  const Matrix gate_x0 = sample_x0(model, ge, 256);
  const double gj = gate_jump(fs, forward_perturb(sched, gate_x0, t_gate,
                                                  ge)
                                      .x_t);

  SamplerConfig sc;
  sc.n_steps = cfg.sampler_n_steps;
  sc.T = cfg.schedule_T;
  sc.t_min = std::max(cfg.sampler_t_min,
                      1.0 / static_cast<double>(cfg.model_n_train));
  sc.grid = cfg.sampler_grid == "uniform" ? GridKind::Uniform
                                          : GridKind::GeometricH;
  sc.kind = cfg.sampler_kind == "ddpm_ancestral"
                ? SamplerKind::DdpmAncestral
                : SamplerKind::EulerMaruyama;
  const ScoreFn score = [&fs](const Matrix& X, double t) -> Matrix {
    return full_score(fs, X, t);
  };
  Matrix samples;
  try {
    Rng sr = root.split(kKeySampler);
    samples = generate(score, sched, sc, d, cfg.metrics_n_samples, sr);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("sampler: ") + e.what());
  }

  // Generated vs held-out at the stopping level, against the distance
  // between two independent held-out sets as the baseline.
  Rng held = root.split(kKeyHeldOut);
  Rng h1r = held.split(1);
  Rng h2r = held.split(2);
  Rng wslice = held.split(3);
  const Matrix held1 =
      forward_perturb(sched, sample_x0(model, h1r, cfg.metrics_n_samples),
                      sc.t_min, h1r)
          .x_t;
  const Matrix held2 =
      forward_perturb(sched, sample_x0(model, h2r, cfg.metrics_n_samples),
                      sc.t_min, h2r)
          .x_t;
  const double w2_gen = w2_auto(samples, held1, cfg.metrics_n_proj, wslice);
  const double w2_base = w2_auto(held2, held1, cfg.metrics_n_proj, wslice);

  Checkpoint ckpt(model, sched, s1);
  ckpt.rf = head;
  ckpt.hn = hn;
  ckpt.gate_h = cfg.hn_gate_h;
  ckpt.config_hash = config_hash(cfg);
  ckpt.stage1_steps = log.empty() ? 0 : log.back().step;

  VpResult res(std::move(ckpt));
  res.log = std::move(log);
  res.samples = std::move(samples);
  res.w2_generated = w2_gen;
  res.w2_baseline = w2_base;
  res.coverage = mode_coverage(lin, model.mog, res.samples);
  double dist_acc = 0.0;
  for (Index j = 0; j < res.samples.cols(); ++j) {
    dist_acc += distance(model.manifold, res.samples.col(j));
  }
  res.mean_manifold_dist =
      dist_acc / static_cast<double>(std::max<Index>(1, res.samples.cols()));
  res.gate_jump_value = gj;
  res.t_min = sc.t_min;

  if (write_artifacts) {
    ensure_out_dir(cfg.out_dir);
    std::vector<std::string> artifacts;
    write_file(join_path(cfg.out_dir, "train_log.csv"),
               train_log_csv(res.log));
    artifacts.push_back("train_log.csv");
    std::string sample_file;
    if (cfg.metrics_samples_format == "binary") {
      sample_file = "samples.bin";
      write_samples_bin(join_path(cfg.out_dir, sample_file), res.samples);
    } else {
      sample_file = "samples.csv";
      write_samples_csv(join_path(cfg.out_dir, sample_file), res.samples);
    }
    artifacts.push_back(sample_file);

    json m;
    m["config_hash"] = config_hash(cfg);
    m["runtime_seconds"] = seconds_since(t0);
    m["n_train"] = cfg.model_n_train;
    m["t_min"] = res.t_min;
    m["w2_generated"] = res.w2_generated;
    m["w2_baseline"] = res.w2_baseline;
    m["w2_ratio"] = res.w2_generated / std::max(res.w2_baseline, 1e-300);
    m["mode_counts"] = res.coverage.counts;
    m["mode_freqs"] = res.coverage.freqs;
    m["modes_covered"] = res.coverage.covered;
    m["mean_manifold_dist"] = res.mean_manifold_dist;
    m["manifold_dist_bound"] =
        4.5 * std::sqrt(sched.h(res.t_min) *
                        static_cast<double>(d - cfg.model_k));
    m["gate_jump"] = res.gate_jump_value;
    m["gate_h"] = cfg.hn_gate_h;
    write_json_file(join_path(cfg.out_dir, "metrics.json"), m);
    artifacts.push_back("metrics.json");

    save_checkpoint(resolve_checkpoint_path(cfg), res.ckpt);
    artifacts.push_back(cfg.checkpoint_path);
    write_manifest(cfg, "vp-pipeline", artifacts);
  }
  return res;
}

int cmd_reproduce_toy(const RunConfig& cfg) {
  const ToyResult res = run_toy_pipeline(cfg, /*write_artifacts=*/true);
  const double collapse = res.log.front().orthogonal_err /
                          std::max(res.log.back().orthogonal_err, 1e-300);
  const double flat = window_flatness(res.man_t2_steps, res.man_t2_values,
                                      kFlatnessStartFrac);
  const double improve = res.mse_stage1_only.tangential /
                         std::max(res.mse_after.tangential, 1e-300);
  std::printf("reproduce-toy: stage1 steps=%lld runtime=%.1fs\n",
              static_cast<long long>(res.stage1_steps), res.seconds);
  std::printf("  orthogonal error %.6g -> %.6g (collapse factor %.1f)\n",
              res.log.front().orthogonal_err, res.log.back().orthogonal_err,
              collapse);
  std::printf(
      "  manifold error at eval level: first %.6g last %.6g flatness %.3f\n",
      res.man_t2_values.empty() ? 0.0 : res.man_t2_values.front(),
      res.man_t2_values.empty() ? 0.0 : res.man_t2_values.back(), flat);
  std::printf("  ridge: lambda=%.6g objective=%.6g\n", res.ridge_lambda,
              res.closed_objective);
  if (cfg.stage2_iterative) {
    std::printf("  iterative cross-check objective=%.6g\n",
                res.gd_objective);
  }
  std::printf(
      "  held-out manifold MSE: stage1-only %.6g, after ridge %.6g "
      "(improvement %.1fx)\n",
      res.mse_stage1_only.tangential, res.mse_after.tangential, improve);
  std::printf("  artifacts in %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_rate_sweep(const RunConfig& cfg) {
  const RateSweepResult res = run_rate_sweep(cfg, /*write_artifacts=*/true);
  std::printf("rate-sweep: %zu level(s), %lld seed(s)\n", res.h1_desc.size(),
              static_cast<long long>(cfg.sweep_seeds));
  for (std::size_t i = 0; i < res.h1_desc.size(); ++i) {
    std::printf("  h1=%-8.4g median rate=%.6g\n", res.h1_desc[i],
                res.median_rates[i]);
  }
  for (const RateCell& c : res.cells) {
    if (!c.ok) {
      std::printf("  rate fit failed at h1=%.4g seed=%lld: %s\n", c.h1,
                  static_cast<long long>(c.seed), c.error.c_str());
    }
  }
  if (res.h1_desc.size() < 2) {
    std::printf("  single level: no monotonicity verdict\n");
    return 0;
  }
  if (!res.verdict_applicable) {
    std::printf("  verdict: FAIL (rate fits incomplete)\n");
    return 4;
  }
  std::printf("  verdict: rates %s as h1 decreases\n",
              res.monotone ? "strictly increase" : "NOT monotone");
  return res.monotone ? 0 : 4;
}

int cmd_stage2_sweep(const RunConfig& cfg) {
  const Stage2SweepResult res =
      run_stage2_sweep(cfg, /*write_artifacts=*/true);
  std::printf("stage2-sweep:\n");
  for (std::size_t i = 0; i < res.n_values.size(); ++i) {
    std::printf("  n_fit=%-6g median estimation MSE=%.6g\n", res.n_values[i],
                res.est_median_mse[i]);
  }
  for (std::size_t i = 0; i < res.h1_values.size(); ++i) {
    std::printf("  h1=%-8.4g median assembled MSE=%.6g\n", res.h1_values[i],
                res.resid_median_mse[i]);
  }
  std::printf("  estimation error decreasing in n: %s\n",
              res.est_monotone ? "yes" : "NO");
  std::printf("  assembled error increasing in h1: %s\n",
              res.resid_monotone ? "yes" : "NO");
  return (res.est_monotone && res.resid_monotone) ? 0 : 4;
}

int cmd_sample_eval(const RunConfig& cfg) {
  const std::string path = resolve_checkpoint_path(cfg);
  const Checkpoint ck = load_checkpoint(path);
  if (ck.sched.kind != ScheduleKind::VpLinear) {
    throw ConfigError("sample-eval: checkpoint schedule must be vp");
  }
  if (!ck.rf.has_value() || !ck.hn.has_value()) {
    throw ConfigError(
        "sample-eval: checkpoint lacks a fitted correction or high-noise "
        "head");
  }
  const LinearManifold& lin = require_linear(ck.model, "sample-eval");
  const Index d = ck.model.ambient_dim();
  const FullScore fs{ck.stage1, *ck.rf, *ck.hn, ck.sched, ck.gate_h};

  SamplerConfig sc;
  sc.n_steps = cfg.sampler_n_steps;
  sc.T = ck.sched.T;
  sc.t_min = std::max(cfg.sampler_t_min,
                      1.0 / static_cast<double>(cfg.model_n_train));
  sc.grid = cfg.sampler_grid == "uniform" ? GridKind::Uniform
                                          : GridKind::GeometricH;
  sc.kind = cfg.sampler_kind == "ddpm_ancestral"
                ? SamplerKind::DdpmAncestral
                : SamplerKind::EulerMaruyama;
  const ScoreFn score = [&fs](const Matrix& X, double t) -> Matrix {
    return full_score(fs, X, t);
  };
  Rng root(cfg.seed);
  Rng sr = root.split(kKeySampler);
  const Matrix samples =
      generate(score, ck.sched, sc, d, cfg.metrics_n_samples, sr);

  Rng held = root.split(kKeyHeldOut);
  Rng h1r = held.split(1);
  Rng h2r = held.split(2);
  Rng wslice = held.split(3);
  const Matrix held1 =
      forward_perturb(ck.sched,
                      sample_x0(ck.model, h1r, cfg.metrics_n_samples),
                      sc.t_min, h1r)
          .x_t;
  const Matrix held2 =
      forward_perturb(ck.sched,
                      sample_x0(ck.model, h2r, cfg.metrics_n_samples),
                      sc.t_min, h2r)
          .x_t;
  const double w2_gen = w2_auto(samples, held1, cfg.metrics_n_proj, wslice);
  const double w2_base = w2_auto(held2, held1, cfg.metrics_n_proj, wslice);
  const ModeCoverage cov = mode_coverage(lin, ck.model.mog, samples);
  double dist_acc = 0.0;
  for (Index j = 0; j < samples.cols(); ++j) {
    dist_acc += distance(ck.model.manifold, samples.col(j));
  }
  const double mean_dist =
      dist_acc / static_cast<double>(std::max<Index>(1, samples.cols()));
  const double t_gate = ck.sched.time_of_h(ck.gate_h);
  Rng ge = root.split(kKeyEval);
  const Matrix gate_x0 = sample_x0(ck.model, ge, 256);
  const double gj =
      gate_jump(fs, forward_perturb(ck.sched, gate_x0, t_gate, ge).x_t);

  ensure_out_dir(cfg.out_dir);
  std::string sample_file;
  if (cfg.metrics_samples_format == "binary") {
    sample_file = "samples.bin";
    write_samples_bin(join_path(cfg.out_dir, sample_file), samples);
  } else {
    sample_file = "samples.csv";
    write_samples_csv(join_path(cfg.out_dir, sample_file), samples);
  }
  json m;
  m["config_hash"] = config_hash(cfg);
  m["checkpoint"] = path;
  m["checkpoint_config_hash"] = ck.config_hash;
  m["t_min"] = sc.t_min;
  m["w2_generated"] = w2_gen;
  m["w2_baseline"] = w2_base;
  m["w2_ratio"] = w2_gen / std::max(w2_base, 1e-300);
  m["mode_counts"] = cov.counts;
  m["mode_freqs"] = cov.freqs;
  m["modes_covered"] = cov.covered;
  m["mean_manifold_dist"] = mean_dist;
  m["gate_jump"] = gj;
  m["gate_h"] = ck.gate_h;
  write_json_file(join_path(cfg.out_dir, "metrics.json"), m);
  write_manifest(cfg, "sample-eval", {sample_file, "metrics.json"});

  std::printf("sample-eval: n=%lld t_min=%.4g\n",
              static_cast<long long>(samples.cols()), sc.t_min);
  std::printf("  w2 generated=%.6g baseline=%.6g ratio=%.2f\n", w2_gen,
              w2_base, w2_gen / std::max(w2_base, 1e-300));
  std::printf("  modes covered=%lld mean manifold distance=%.6g\n",
              static_cast<long long>(cov.covered), mean_dist);
  return 0;
}

int cmd_train_stage1(const RunConfig& cfg) {
  check_fixed_consistency(cfg);
  Rng root(cfg.seed);
  const DataModel model = make_model(cfg, root.split(kKeyModel));
  const bool vp = cfg.schedule_kind == "vp";

  Matrix pool;
  Stage1TrainConfig tc = stage1_train_config(cfg);
  if (vp) {
    // Dataset mode: the end-to-end pipelines all learn from one finite set.
    Rng pr = root.split(kKeyPool);
    pool = sample_x0(model, pr, cfg.model_n_train);
    tc.x0_pool = &pool;
  }
  const NoiseLevel l1 = level_for_h(cfg, cfg.stage1_h1);
  std::vector<TrainLogRow> log;
  Stage1Params p0 =
      stage1_init_from(cfg, root.split(kKeyStage1Init), cfg.stage1_h1);
  Rng tr = root.split(kKeyStage1Train);
  const Stage1Params s1 =
      train_stage1(std::move(p0), model, l1.sched, l1.t, tc, tr, &log);

  ensure_out_dir(cfg.out_dir);
  write_file(join_path(cfg.out_dir, "train_log.csv"), train_log_csv(log));
  Checkpoint ck(model, base_schedule(cfg), s1);
  ck.gate_h = cfg.hn_gate_h;
  ck.config_hash = config_hash(cfg);
  ck.stage1_steps = log.empty() ? 0 : log.back().step;
  save_checkpoint(resolve_checkpoint_path(cfg), ck);
  write_manifest(cfg, "train-stage1",
                 {"train_log.csv", cfg.checkpoint_path});

  std::printf("train-stage1: steps=%lld final dsm loss=%.6g\n",
              static_cast<long long>(ck.stage1_steps),
              log.empty() ? 0.0 : log.back().dsm_loss);
  std::printf("  orthogonal error %.6g -> %.6g\n",
              log.empty() ? 0.0 : log.front().orthogonal_err,
              log.empty() ? 0.0 : log.back().orthogonal_err);
  std::printf("  checkpoint: %s\n", resolve_checkpoint_path(cfg).c_str());
  return 0;
}

int cmd_train_stage2(const RunConfig& cfg) {
  const std::string path = resolve_checkpoint_path(cfg);
  Checkpoint ck = load_checkpoint(path);
  const Index d = ck.model.ambient_dim();

  NoiseLevel l2{ck.sched, 0.0};
  if (ck.sched.kind == ScheduleKind::VpLinear) {
    l2.t = ck.sched.time_of_h(cfg.stage2_h2);
  } else {
    l2.sched = NoiseSchedule::fixed(std::sqrt(cfg.stage2_h2), ck.sched.T);
    l2.t = 0.5 * ck.sched.T;
  }
  const double h2 = l2.sched.h(l2.t);

  Rng root(cfg.seed);
  Rng r2 = root.split(kKeyStage2);
  RFHead head = init_rf_head(r2, d, cfg.stage2_m2, cfg.stage2_time_feature,
                             cfg.stage2_lambda);
  const Stage2TargetMode mode = cfg.stage2_target_mode == "oracle"
                                    ? Stage2TargetMode::Oracle
                                    : Stage2TargetMode::Dsm;
  // The fit set is drawn fresh here: a checkpoint does not carry the
  // training pool, only the model that generated it.
  const Stage2Targets tg =
      build_stage2_targets(mode, ck.stage1, ck.model, l2.sched, l2.t,
                           cfg.stage2_n_fit, r2, cfg.hn_gate_h);
  const std::vector<double> h_ts =
      cfg.stage2_time_feature ? std::vector<double>{h2} : std::vector<double>{};
  ridge_fit(head, tg.xhat, tg.y, h_ts);
  const double obj =
      ridge_objective(head, rf_features(head, tg.xhat, h_ts), tg.y);
  double gd_obj = std::numeric_limits<double>::quiet_NaN();
  if (cfg.stage2_iterative) {
    RFHead gd_head = head;
    gd_head.U.setZero();
    gd_obj = ridge_fit_gd(gd_head, tg.xhat, tg.y, cfg.stage2_steps,
                          cfg.stage2_lr, h_ts);
  }

  json m;
  m["config_hash"] = config_hash(cfg);
  m["checkpoint"] = path;
  m["ridge_lambda"] = head.lambda;
  m["ridge_objective_closed"] = obj;
  if (cfg.stage2_iterative) m["ridge_objective_gd"] = gd_obj;

  if (std::holds_alternative<LinearManifold>(ck.model.manifold)) {
    const LinearManifold& lin = std::get<LinearManifold>(ck.model.manifold);
    const AmbientMoG amb2 = ambient_mog(lin, ck.model.mog, l2.sched, l2.t);
    const BatchScoreFn oracle2 = [&amb2](const Matrix& X, double) -> Matrix {
      return exact_score_linear(amb2, X);
    };
    const Stage1Params& s1 = ck.stage1;
    const BatchScoreFn s1_only = [&s1, h2](const Matrix& X,
                                           double) -> Matrix {
      return (projection_hat(s1, X) - X) / h2;
    };
    const BatchScoreFn assembled = [&s1, &head, &l2](const Matrix& X,
                                                     double) -> Matrix {
      return sild_score(s1, head, l2.sched, X, l2.t);
    };
    Rng held = root.split(kKeyHeldOut);
    Rng ea = held.split(1);
    Rng eb = held.split(1);
    const ScoreMse before = score_mse_decomposed(ck.model, l2.sched, l2.t,
                                                 s1_only, oracle2, 2048, ea);
    const ScoreMse after = score_mse_decomposed(ck.model, l2.sched, l2.t,
                                                assembled, oracle2, 2048, eb);
    m["mse_stage1_only"] = score_mse_json(before);
    m["mse_after_ridge"] = score_mse_json(after);
    m["stage2_improvement_factor"] =
        before.tangential / std::max(after.tangential, 1e-300);
    std::printf(
        "train-stage2: lambda=%.6g objective=%.6g manifold MSE %.6g -> %.6g\n",
        head.lambda, obj, before.tangential, after.tangential);
  } else {
    std::printf("train-stage2: lambda=%.6g objective=%.6g\n", head.lambda,
                obj);
  }

  ck.rf = head;
  ck.config_hash = config_hash(cfg);
  save_checkpoint(path, ck);
  ensure_out_dir(cfg.out_dir);
  write_json_file(join_path(cfg.out_dir, "stage2_metrics.json"), m);
  write_manifest(cfg, "train-stage2",
                 {"stage2_metrics.json", cfg.checkpoint_path});
  std::printf("  checkpoint updated: %s\n", path.c_str());
  return 0;
}

int cmd_fit_hn(const RunConfig& cfg) {
  const std::string path = resolve_checkpoint_path(cfg);
  Checkpoint ck = load_checkpoint(path);
  if (ck.sched.kind != ScheduleKind::VpLinear) {
    throw ConfigError("fit-hn: the high-noise window needs the vp schedule");
  }
  const Index d = ck.model.ambient_dim();
  const double t_gate = ck.sched.time_of_h(cfg.hn_gate_h);

  Rng root(cfg.seed);
  Rng rh = root.split(kKeyHn);
  HNHead hn = init_hn_head(rh, d, cfg.hn_m2, cfg.hn_L, t_gate, ck.sched.T,
                           cfg.hn_lambda);
  // Fresh draws: the checkpoint does not carry the training pool.
  const Index n_hn = cfg.hn_n_fit;
  Matrix Xh(d, n_hn), Yh(d, n_hn);
  std::vector<double> ts(static_cast<std::size_t>(n_hn));
  const Matrix x0s = sample_x0(ck.model, rh, n_hn);
  for (Index j = 0; j < n_hn; ++j) {
    const double t = rh.uniform(t_gate, ck.sched.T);
    const ForwardSample fsamp =
        forward_perturb(ck.sched, Vector(x0s.col(j)), t, rh);
    Xh.col(j) = fsamp.x_t;
    Yh.col(j) = dsm_target(fsamp);
    ts[static_cast<std::size_t>(j)] = t;
  }
  hn_ridge_fit(hn, Xh, ts, Yh);

  json m;
  m["config_hash"] = config_hash(cfg);
  m["checkpoint"] = path;
  m["hn_lambda"] = hn.lambda;
  m["t_gate"] = t_gate;
  m["gate_h"] = cfg.hn_gate_h;

  if (ck.rf.has_value()) {
    const FullScore fs{ck.stage1, *ck.rf, hn, ck.sched, cfg.hn_gate_h};
    Rng ge = root.split(kKeyEval);
    const Matrix gx0 = sample_x0(ck.model, ge, 256);
    const double gj =
        gate_jump(fs, forward_perturb(ck.sched, gx0, t_gate, ge).x_t);
    m["gate_jump"] = gj;
    std::printf("fit-hn: lambda=%.6g gate jump=%.6g at h=%.4g\n", hn.lambda,
                gj, cfg.hn_gate_h);
  } else {
    std::printf("fit-hn: lambda=%.6g (no correction head yet)\n", hn.lambda);
  }

  ck.hn = hn;
  ck.gate_h = cfg.hn_gate_h;
  ck.config_hash = config_hash(cfg);
  save_checkpoint(path, ck);
  ensure_out_dir(cfg.out_dir);
  write_json_file(join_path(cfg.out_dir, "hn_metrics.json"), m);
  write_manifest(cfg, "fit-hn", {"hn_metrics.json", cfg.checkpoint_path});
  std::printf("  checkpoint updated: %s\n", path.c_str());
  return 0;
}

}  // namespace sild
