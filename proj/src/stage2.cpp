// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sild/stage2.hpp"

#include <cmath>
#include <stdexcept>

#include "sild/oracle.hpp"

namespace sild {

RFHead init_rf_head(Rng& rng, Index d, Index m2, bool with_time,
                    double lambda) {
  if (d < 1 || m2 < 1) throw std::invalid_argument("init_rf_head: bad shape");
  RFHead head;
  head.V = gauss_matrix(rng, d, m2, 1.0 / std::sqrt(static_cast<double>(d)));
  head.v_time = with_time ? Vector(gauss_matrix(rng, m2, 1, 1.0).col(0))
                          : Vector(Vector::Zero(m2));
  head.b_feat = Vector(m2);
  for (Index j = 0; j < m2; ++j) head.b_feat(j) = rng.uniform(-1.0, 1.0);
  head.U = Matrix::Zero(d, m2);
  head.lambda = lambda;
  head.has_time = with_time;
  return head;
}

Matrix rf_features(const RFHead& head, const Matrix& Xhat,
                   const std::vector<double>& h_ts) {
  if (Xhat.rows() != head.V.rows()) {
    throw std::invalid_argument("rf_features: dimension mismatch");
  }
  const Index n = Xhat.cols();
  if (!h_ts.empty() && h_ts.size() != 1 &&
      h_ts.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("rf_features: h_ts size mismatch");
  }
  Matrix Z = (head.V.transpose() * Xhat).colwise() + head.b_feat;
  if (head.has_time && !h_ts.empty()) {
    for (Index j = 0; j < n; ++j) {
      const double h = h_ts.size() == 1 ? h_ts[0]
                                        : h_ts[static_cast<std::size_t>(j)];
      Z.col(j) += head.v_time * h;
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(head.V.cols()));
  return scale * Z.array().tanh().matrix();
}

Vector rf_features(const RFHead& head, const Vector& x_hat, double h_t) {
  std::vector<double> hs;
  if (head.has_time) hs.push_back(h_t);
  return Vector(rf_features(head, Matrix(x_hat), hs).col(0));
}

double ridge_objective(const RFHead& head, const Matrix& Phi,
                       const Matrix& Y) {
  const double n = static_cast<double>(Phi.cols());
  return (head.U * Phi - Y).squaredNorm() / n +
         head.lambda * head.U.squaredNorm();
}

namespace {

double resolve_lambda(double lambda, const Matrix& Phi) {
  if (lambda >= 0.0) return lambda;
  const double n = static_cast<double>(Phi.cols());
  const double m2 = static_cast<double>(Phi.rows());
  return 1e-4 * Phi.squaredNorm() / (n * m2);  // squaredNorm = tr(Phi Phi^T)
}

}  // namespace

void ridge_fit(RFHead& head, const Matrix& Xhat, const Matrix& Y,
               const std::vector<double>& h_ts) {
  if (Xhat.cols() != Y.cols() || Y.rows() != head.V.rows()) {
    throw std::invalid_argument("ridge_fit: shape mismatch");
  }
  if (Xhat.cols() < 1) throw std::invalid_argument("ridge_fit: empty fit set");
  const Matrix Phi = rf_features(head, Xhat, h_ts);
  head.lambda = resolve_lambda(head.lambda, Phi);
  const Index m2 = Phi.rows();
  const double n = static_cast<double>(Phi.cols());
  const Matrix M =
      Phi * Phi.transpose() + n * head.lambda * Matrix::Identity(m2, m2);
  const Matrix YPhiT = Y * Phi.transpose();
  // U M = Y Phi^T with M symmetric: solve M U^T = Phi Y^T.
  head.U = solve_spd(M, YPhiT.transpose()).transpose();
  const double kkt =
      (YPhiT - head.U * M).norm() / std::max(YPhiT.norm(), 1e-300);
  if (kkt >= 1e-8) {
    throw std::runtime_error("ridge_fit: normal equations not satisfied");
  }
}

double ridge_fit_gd(RFHead& head, const Matrix& Xhat, const Matrix& Y,
                    std::int64_t steps, double lr,
                    const std::vector<double>& h_ts) {
  const Matrix Phi = rf_features(head, Xhat, h_ts);
  head.lambda = resolve_lambda(head.lambda, Phi);
  const double n = static_cast<double>(Phi.cols());
  if (lr <= 0.0) {
    // Safe default under the gradient's Lipschitz constant
    // 2 lambda_max(Phi Phi^T)/n + 2 lambda.
    const Matrix M = Phi * Phi.transpose();
    const double lmax = sym_eigvals(0.5 * (M + M.transpose())).front();
    lr = 0.9 / (2.0 * lmax / n + 2.0 * head.lambda);
  }
  for (std::int64_t s = 0; s < steps; ++s) {
    const Matrix G =
        2.0 / n * ((head.U * Phi - Y) * Phi.transpose()) + 2.0 * head.lambda * head.U;
    head.U -= lr * G;
  }
  return ridge_objective(head, Phi, Y);
}

Matrix sild_score(const Stage1Params& s1, const RFHead& head,
                  const NoiseSchedule& sched, const Matrix& X, double t2) {
  const double h = sched.h(t2);
  if (!(h > 0.0)) throw std::domain_error("sild_score: h(t2) must be > 0");
  const Matrix xhat = projection_hat(s1, X);
  std::vector<double> hs;
  if (head.has_time) hs.push_back(h);
  const Matrix Phi = rf_features(head, xhat, hs);
  return -(X - xhat) / h + head.U * Phi;
}

Vector sild_score(const Stage1Params& s1, const RFHead& head,
                  const NoiseSchedule& sched, const Vector& x, double t2) {
  return Vector(sild_score(s1, head, sched, Matrix(x), t2).col(0));
}

Stage2Targets build_stage2_targets(
    Stage2TargetMode mode,
    const std::function<Matrix(const Matrix&)>& proj_fn,
    const DataModel& model, const NoiseSchedule& sched, double t2, Index n,
    Rng& rng, double gate_h, const Matrix* x0_pool) {
  const double h = sched.h(t2);
  if (!(h > 0.0)) throw std::domain_error("build_stage2_targets: h(t2) = 0");
  if (h > gate_h) {
    throw std::domain_error(
        "build_stage2_targets: t2 is outside the manifold-regime phase");
  }
  Matrix x0;
  if (x0_pool == nullptr) {
    x0 = sample_x0(model, rng, n);
  } else {
    if (x0_pool->cols() < 1) {
      throw std::invalid_argument("build_stage2_targets: empty x0 pool");
    }
    x0.resize(x0_pool->rows(), n);
    for (Index j = 0; j < n; ++j) {
      x0.col(j) = x0_pool->col(static_cast<Index>(
          rng.index(static_cast<std::uint64_t>(x0_pool->cols()))));
    }
  }
  const ForwardBatch batch = forward_perturb(sched, x0, t2, rng);
  Stage2Targets out;
  out.x_t = batch.x_t;
  out.xhat = proj_fn(batch.x_t);
  if (mode == Stage2TargetMode::Dsm) {
    out.y = dsm_target(batch) + (batch.x_t - out.xhat) / h;
  } else {
    const auto* lin = std::get_if<LinearManifold>(&model.manifold);
    if (lin == nullptr) {
      throw std::invalid_argument(
          "build_stage2_targets: oracle targets need the linear model");
    }
    out.y.resize(batch.x_t.rows(), n);
    for (Index j = 0; j < n; ++j) {
      const Vector z = project(model.manifold, Vector(batch.x_t.col(j)));
      out.y.col(j) = residual_score(*lin, model.mog, sched, z, t2);
    }
  }
  return out;
}

Stage2Targets build_stage2_targets(Stage2TargetMode mode,
                                   const Stage1Params& s1,
                                   const DataModel& model,
                                   const NoiseSchedule& sched, double t2,
                                   Index n, Rng& rng, double gate_h,
                                   const Matrix* x0_pool) {
  return build_stage2_targets(
      mode, [&s1](const Matrix& X) { return projection_hat(s1, X); }, model,
      sched, t2, n, rng, gate_h, x0_pool);
}

std::vector<double> kernel_spectrum(const RFHead& head, const Matrix& Xhat,
                                    const std::vector<double>& h_ts) {
  if (Xhat.cols() > 2048) {
    throw std::invalid_argument("kernel_spectrum: n capped at 2048");
  }
  const Matrix Phi = rf_features(head, Xhat, h_ts);
  Matrix K = Phi.transpose() * Phi;
  // Symmetrize the fp residue before the eigensolver's symmetry gate.
  K = 0.5 * (K + K.transpose());
  return sym_eigvals(K);
}

}  // namespace sild
