// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sild/stage1.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <stdexcept>

#include "sild/oracle.hpp"

namespace sild {

Stage1Params init_stage1(Rng& rng, Index d, Index m, double h1,
                         double alpha0) {
  if (d < 1 || m < 1) throw std::invalid_argument("init_stage1: bad shape");
  if (!(h1 > 0.0)) throw std::invalid_argument("init_stage1: h1 must be > 0");
  Stage1Params p;
  p.W = gauss_matrix(rng, d, m, 1.0 / std::sqrt(static_cast<double>(d)));
  p.a = Vector(m);
  for (Index j = 0; j < m; ++j) {
    p.a(j) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * alpha0 /
             static_cast<double>(m);
  }
  p.b = Vector(m);
  for (Index j = 0; j < m; ++j) p.b(j) = rng.uniform(-1.0, 1.0);
  p.h1 = h1;
  return p;
}

namespace {

// Hidden activations S = tanh(W^T X + b 1^T) and the reconstruction
// G = W diag(a) S. Shared by forward, loss and diagnostics paths.
struct Forward {
  Matrix S;  // m x n
  Matrix G;  // d x n
};

Forward forward_pass(const Stage1Params& p, const Matrix& X) {
  Forward f;
  f.S = ((p.W.transpose() * X).colwise() + p.b).array().tanh().matrix();
  f.G = p.W * (p.a.asDiagonal() * f.S);
  return f;
}

}  // namespace

Matrix f1_forward(const Stage1Params& p, const Matrix& X) {
  if (X.rows() != p.W.rows()) {
    throw std::invalid_argument("f1_forward: dimension mismatch");
  }
  return (forward_pass(p, X).G - X) / p.h1;
}

Vector f1_forward(const Stage1Params& p, const Vector& x) {
  return Vector(f1_forward(p, Matrix(x)).col(0));
}

double potential(const Stage1Params& p, const Vector& x) {
  const Vector z = p.W.transpose() * x + p.b;
  double acc = 0.0;
  for (Index j = 0; j < z.size(); ++j) acc += p.a(j) * log_cosh(z(j));
  return x.squaredNorm() / (2.0 * p.h1) - acc / p.h1;
}

Matrix projection_hat(const Stage1Params& p, const Matrix& X) {
  if (X.rows() != p.W.rows()) {
    throw std::invalid_argument("projection_hat: dimension mismatch");
  }
  return forward_pass(p, X).G;
}

Vector projection_hat(const Stage1Params& p, const Vector& x) {
  return Vector(projection_hat(p, Matrix(x)).col(0));
}

Stage1Grads dsm_loss_and_grads(const Stage1Params& p,
                               const ForwardBatch& batch) {
  const Index n = batch.n();
  if (n < 1) throw std::invalid_argument("dsm_loss_and_grads: empty batch");
  if (std::abs(batch.h - p.h1) > 1e-12 * std::max(1.0, p.h1)) {
    throw std::invalid_argument(
        "dsm_loss_and_grads: batch noise level does not match h1");
  }
  const Matrix& X = batch.x_t;
  const double inv_n = 1.0 / static_cast<double>(n);
  const double m = static_cast<double>(p.a.size());

  const Forward f = forward_pass(p, X);
  const Matrix D = (1.0 - f.S.array().square()).matrix();  // tanh'
  const Matrix R = (f.G - X) / p.h1 + batch.eps / std::sqrt(p.h1);

  Stage1Grads g;
  g.loss = 0.5 * inv_n * R.squaredNorm() +
           0.5 * p.l2_w * p.W.squaredNorm() / m;

  const Matrix WtR = p.W.transpose() * R;  // m x n
  const double scale = inv_n / p.h1;
  g.da = scale * f.S.cwiseProduct(WtR).rowwise().sum();
  g.db = scale * p.a.cwiseProduct(D.cwiseProduct(WtR).rowwise().sum());
  g.dW = scale * (R * f.S.transpose() + X * D.cwiseProduct(WtR).transpose()) *
             p.a.asDiagonal() +
         (p.l2_w / m) * p.W;
  return g;
}

std::string train_log_csv(const std::vector<TrainLogRow>& rows) {
  std::string out(kTrainLogHeader);
  out += '\n';
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%lld\n",
                  static_cast<long long>(r.step), r.dsm_loss, r.manifold_err,
                  r.orthogonal_err, r.alignment_risk_F, r.second_moment_m2,
                  r.pl_ratio, static_cast<long long>(r.wall_ms));
    out += buf;
  }
  return out;
}

TrainLogRow stage1_diagnostics(const Stage1Params& p, const DataModel& model,
                               const NoiseSchedule& sched, double t1,
                               Index n_eval, Rng& rng) {
  const auto* lin = std::get_if<LinearManifold>(&model.manifold);
  if (lin == nullptr) {
    throw std::invalid_argument(
        "stage1_diagnostics: exact-score diagnostics need a linear manifold");
  }
  if (n_eval < 1) throw std::invalid_argument("stage1_diagnostics: n_eval < 1");

  const Matrix x0 = sample_x0(model, rng, n_eval);
  const ForwardBatch batch = forward_perturb(sched, x0, t1, rng);
  const Matrix& X = batch.x_t;
  const double inv_n = 1.0 / static_cast<double>(n_eval);
  const double m = static_cast<double>(p.a.size());

  const AmbientMoG g = ambient_mog(*lin, model.mog, sched, t1);
  const Matrix score = exact_score_linear(g, X);

  const Forward f = forward_pass(p, X);
  const Matrix f1 = (f.G - X) / p.h1;

  TrainLogRow row;
  const Matrix delta = f1 - score;
  const Matrix delta_tan = lin->A * (lin->A.transpose() * delta);
  row.manifold_err = inv_n * delta_tan.squaredNorm();
  row.orthogonal_err = inv_n * (delta - delta_tan).squaredNorm();

  const Matrix proj = lin->A * (lin->A.transpose() * X);
  const Matrix dp = f.G - proj;  // x_hat - Pi(x)
  const double F = 0.5 * inv_n * dp.squaredNorm();
  row.alignment_risk_F = F;
  row.second_moment_m2 = p.W.squaredNorm() / m;

  // Gradient of F in W for the Polyak-Lojasiewicz ratio diagnostic.
  const Matrix D = (1.0 - f.S.array().square()).matrix();
  const Matrix WtD = p.W.transpose() * dp;
  const Matrix dW_F =
      inv_n * (dp * f.S.transpose() + X * D.cwiseProduct(WtD).transpose()) *
      p.a.asDiagonal();
  row.pl_ratio = m * dW_F.squaredNorm() / std::max(F, 1e-12);
  return row;
}

namespace {

struct AdamState {
  Matrix mW, vW;
  Vector ma, va, mb, vb;
  std::int64_t t = 0;

  explicit AdamState(const Stage1Params& p)
      : mW(Matrix::Zero(p.W.rows(), p.W.cols())),
        vW(Matrix::Zero(p.W.rows(), p.W.cols())),
        ma(Vector::Zero(p.a.size())),
        va(Vector::Zero(p.a.size())),
        mb(Vector::Zero(p.b.size())),
        vb(Vector::Zero(p.b.size())) {}
};

template <typename T>
void adam_update(T& theta, T& m, T& v, const T& g, double lr, double b1,
                 double b2, double eps, double bc1, double bc2) {
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
  theta.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

}  // namespace

Stage1Params train_stage1(Stage1Params p, const DataModel& model,
                          const NoiseSchedule& sched, double t1,
                          const Stage1TrainConfig& cfg, Rng& rng,
                          std::vector<TrainLogRow>* log_out) {
  if (cfg.max_steps < 1 || cfg.batch < 1 || cfg.log_every < 1) {
    throw std::invalid_argument("train_stage1: bad config");
  }
  if (std::abs(sched.h(t1) - p.h1) > 1e-12 * std::max(1.0, p.h1)) {
    throw std::invalid_argument("train_stage1: schedule h(t1) != params h1");
  }

  Rng batch_rng = rng.split(0xB10C);
  AdamState adam(p);
  const auto t_start = std::chrono::steady_clock::now();

  if (cfg.x0_pool != nullptr && cfg.x0_pool->cols() < 1) {
    throw std::invalid_argument("train_stage1: empty x0 pool");
  }
  const auto draw_x0 = [&](Rng& r) -> Matrix {
    if (cfg.x0_pool == nullptr) return sample_x0(model, r, cfg.batch);
    const Matrix& pool = *cfg.x0_pool;
    Matrix out(pool.rows(), cfg.batch);
    for (Index j = 0; j < cfg.batch; ++j) {
      out.col(j) =
          pool.col(static_cast<Index>(r.index(
              static_cast<std::uint64_t>(pool.cols()))));
    }
    return out;
  };

  double initial_loss = -1.0;
  std::deque<double> ortho_log;
  const std::int64_t window_pts =
      std::max<std::int64_t>(1, cfg.plateau_window / cfg.log_every);

  auto log_step = [&](std::int64_t step, double loss) -> bool {
    Rng eval_rng = rng.split(0xE7A1000000000000ull ^
                             static_cast<std::uint64_t>(step));
    TrainLogRow row =
        stage1_diagnostics(p, model, sched, t1, cfg.n_eval, eval_rng);
    row.step = step;
    row.dsm_loss = loss;
    row.wall_ms =
        cfg.log_wall_ms
            ? std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t_start)
                  .count()
            : 0;
    if (log_out != nullptr) log_out->push_back(row);
    if (cfg.on_log) cfg.on_log(step, p);
    ortho_log.push_back(row.orthogonal_err);
    if (static_cast<std::int64_t>(ortho_log.size()) >= 2 * window_pts) {
      double recent = 0.0, previous = 0.0;
      const std::size_t n = ortho_log.size();
      for (std::int64_t i = 0; i < window_pts; ++i) {
        recent += ortho_log[n - 1 - static_cast<std::size_t>(i)];
        previous += ortho_log[n - 1 - static_cast<std::size_t>(window_pts + i)];
      }
      recent /= static_cast<double>(window_pts);
      previous /= static_cast<double>(window_pts);
      if (std::abs(recent - previous) <=
          cfg.plateau_tol * std::max(previous, 1e-300)) {
        return true;  // plateau reached
      }
    }
    return false;
  };

  {
    // Step-0 row: initialization diagnostics, loss from a probe batch drawn
    // from a dedicated sub-stream (the batch stream is untouched).
    Rng probe_rng = rng.split(0x1A170000u);
    const Matrix x0 = draw_x0(probe_rng);
    const ForwardBatch batch = forward_perturb(sched, x0, t1, probe_rng);
    log_step(0, dsm_loss_and_grads(p, batch).loss);
  }

  for (std::int64_t step = 1; step <= cfg.max_steps; ++step) {
    const Matrix x0 = draw_x0(batch_rng);
    const ForwardBatch batch = forward_perturb(sched, x0, t1, batch_rng);
    const Stage1Grads g = dsm_loss_and_grads(p, batch);

    if (initial_loss < 0.0) initial_loss = g.loss;
    if (!std::isfinite(g.loss) ||
        g.loss > cfg.divergence_factor * std::max(initial_loss, 1e-300)) {
      throw std::runtime_error("train_stage1: loss diverged at step " +
                               std::to_string(step));
    }

    if (cfg.optimizer == OptimizerKind::Adam) {
      adam.t += 1;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, adam.t);
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, adam.t);
      adam_update(p.W, adam.mW, adam.vW, g.dW, cfg.lr, cfg.adam_beta1,
                  cfg.adam_beta2, cfg.adam_eps, bc1, bc2);
      if (!p.freeze_ab) {
        adam_update(p.a, adam.ma, adam.va, g.da, cfg.lr, cfg.adam_beta1,
                    cfg.adam_beta2, cfg.adam_eps, bc1, bc2);
        adam_update(p.b, adam.mb, adam.vb, g.db, cfg.lr, cfg.adam_beta1,
                    cfg.adam_beta2, cfg.adam_eps, bc1, bc2);
      }
    } else {
      p.W -= cfg.lr * g.dW;
      if (!p.freeze_ab) {
        p.a -= cfg.lr * g.da;
        p.b -= cfg.lr * g.db;
      }
    }

    if (step % cfg.log_every == 0 || step == cfg.max_steps) {
      if (log_step(step, g.loss)) break;
    }
  }
  return p;
}

}  // namespace sild
