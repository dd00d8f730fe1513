// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sild/highnoise.hpp"

#include <cmath>
#include <stdexcept>

namespace sild {

Vector fourier_basis(Index L, double t_max, double T, double t) {
  if (L < 1) throw std::invalid_argument("fourier_basis: L must be >= 1");
  if (!(T > t_max)) {
    throw std::invalid_argument("fourier_basis: need t_max < T");
  }
  if (!(t >= t_max) || !(t <= T)) {
    throw std::domain_error("fourier_basis: t outside [t_max, T]");
  }
  const double u = (t - t_max) / (T - t_max);
  Vector phi(L);
  phi(0) = 1.0;
  for (Index l = 1; l < L; ++l) {
    const double j = static_cast<double>((l + 1) / 2);
    const double arg = 2.0 * M_PI * j * u;
    phi(l) = std::sqrt(2.0) * (l % 2 == 1 ? std::cos(arg) : std::sin(arg));
  }
  return phi;
}

HNHead init_hn_head(Rng& rng, Index d, Index m2, Index L, double t_max,
                    double T, double lambda) {
  if (d < 1 || m2 < 1 || L < 1) {
    throw std::invalid_argument("init_hn_head: bad shape");
  }
  if (!(t_max >= 0.0) || !(T > t_max)) {
    throw std::invalid_argument("init_hn_head: need 0 <= t_max < T");
  }
  HNHead head;
  head.V.reserve(static_cast<std::size_t>(L));
  for (Index l = 0; l < L; ++l) {
    head.V.push_back(
        gauss_matrix(rng, d, m2, 1.0 / std::sqrt(static_cast<double>(d))));
  }
  head.U = Matrix::Zero(d, L * m2);
  head.lambda = lambda;
  head.t_max = t_max;
  head.T = T;
  return head;
}

Matrix hn_features(const HNHead& head, const Matrix& X,
                   const std::vector<double>& ts) {
  const Index n = X.cols();
  if (ts.size() != static_cast<std::size_t>(n) && ts.size() != 1) {
    throw std::invalid_argument("hn_features: ts size mismatch");
  }
  if (X.rows() != head.d()) {
    throw std::invalid_argument("hn_features: dimension mismatch");
  }
  const Index L = head.L();
  const Index m2 = head.m2();
  const double scale = 1.0 / std::sqrt(static_cast<double>(m2));
  Matrix psi(L * m2, n);
  // Per-block activations are t-independent; the time basis only scales
  // them, so compute tanh(V_l^T X) once per block.
  for (Index l = 0; l < L; ++l) {
    const Matrix act =
        scale *
        (head.V[static_cast<std::size_t>(l)].transpose() * X).array().tanh()
            .matrix();
    for (Index j = 0; j < n; ++j) {
      const double t = ts.size() == 1 ? ts[0] : ts[static_cast<std::size_t>(j)];
      const Vector phi = fourier_basis(L, head.t_max, head.T, t);
      psi.block(l * m2, j, m2, 1) = phi(l) * act.col(j);
    }
  }
  return psi;
}

Vector hn_features(const HNHead& head, const Vector& x, double t) {
  return Vector(
      hn_features(head, Matrix(x), std::vector<double>{t}).col(0));
}

void hn_ridge_fit(HNHead& head, const Matrix& X, const std::vector<double>& ts,
                  const Matrix& Y) {
  if (X.cols() != Y.cols() || X.cols() < 1 ||
      ts.size() != static_cast<std::size_t>(X.cols())) {
    throw std::invalid_argument("hn_ridge_fit: shape mismatch");
  }
  const Matrix Psi = hn_features(head, X, ts);
  if (head.lambda < 0.0) {
    head.lambda = 1e-4 * Psi.squaredNorm() /
                  (static_cast<double>(Psi.cols()) *
                   static_cast<double>(Psi.rows()));
  }
  const Index p = Psi.rows();
  const double n = static_cast<double>(Psi.cols());
  const Matrix M =
      Psi * Psi.transpose() + n * head.lambda * Matrix::Identity(p, p);
  const Matrix YPsiT = Y * Psi.transpose();
  head.U = solve_spd(M, YPsiT.transpose()).transpose();
  const double kkt =
      (YPsiT - head.U * M).norm() / std::max(YPsiT.norm(), 1e-300);
  if (kkt >= 1e-8) {
    throw std::runtime_error("hn_ridge_fit: normal equations not satisfied");
  }
}

Matrix hn_forward(const HNHead& head, const Matrix& X, double t) {
  return head.U * hn_features(head, X, std::vector<double>{t});
}

Vector hn_forward(const HNHead& head, const Vector& x, double t) {
  return Vector(hn_forward(head, Matrix(x), t).col(0));
}

Matrix full_score(const FullScore& fs, const Matrix& X, double t) {
  const double h = fs.sched.h(t);
  if (h <= fs.gate_h) {
    return sild_score(fs.stage1, fs.rf, fs.sched, X, t);
  }
  return hn_forward(fs.hn, X, t);
}

Vector full_score(const FullScore& fs, const Vector& x, double t) {
  return Vector(full_score(fs, Matrix(x), t).col(0));
}

double gate_jump(const FullScore& fs, const Matrix& probes) {
  if (probes.cols() < 1) {
    throw std::invalid_argument("gate_jump: need at least one probe");
  }
  const double t_gate = fs.sched.time_of_h(fs.gate_h);
  const Matrix below = sild_score(fs.stage1, fs.rf, fs.sched, probes, t_gate);
  const Matrix above = hn_forward(fs.hn, probes, t_gate);
  double acc = 0.0;
  for (Index j = 0; j < probes.cols(); ++j) {
    acc += (below.col(j) - above.col(j)).norm();
  }
  return acc / static_cast<double>(probes.cols());
}

}  // namespace sild
