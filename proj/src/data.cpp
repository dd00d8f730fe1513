// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sild/data.hpp"

#include <cmath>
#include <stdexcept>

namespace sild {

MoGLatentModel::MoGLatentModel(Vector w, std::vector<Vector> mu, double s)
    : weights(std::move(w)), means(std::move(mu)), latent_std(s) {
  if (weights.size() == 0 ||
      static_cast<std::size_t>(weights.size()) != means.size()) {
    throw std::invalid_argument("MoGLatentModel: weights/means mismatch");
  }
  if (latent_std < 0.0) {
    throw std::invalid_argument("MoGLatentModel: negative latent_std");
  }
  for (Index c = 0; c < weights.size(); ++c) {
    if (weights(c) < 0.0) {
      throw std::invalid_argument("MoGLatentModel: negative weight");
    }
    if (means[static_cast<std::size_t>(c)].size() != means.front().size()) {
      throw std::invalid_argument("MoGLatentModel: ragged means");
    }
  }
  if (std::abs(weights.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("MoGLatentModel: weights must sum to 1");
  }
}

Vector latent_mean(const MoGLatentModel& mog) {
  Vector mu = Vector::Zero(mog.dim());
  for (Index c = 0; c < mog.components(); ++c) {
    mu += mog.weights(c) * mog.means[static_cast<std::size_t>(c)];
  }
  return mu;
}

Matrix latent_cov(const MoGLatentModel& mog) {
  const Index k = mog.dim();
  const double s2 = mog.latent_std * mog.latent_std;
  Matrix S = Matrix::Zero(k, k);
  for (Index c = 0; c < mog.components(); ++c) {
    const Vector& mu = mog.means[static_cast<std::size_t>(c)];
    S += mog.weights(c) * (mu * mu.transpose());
  }
  S += s2 * Matrix::Identity(k, k);
  const Vector mbar = latent_mean(mog);
  S -= mbar * mbar.transpose();
  return S;
}

NoiseSchedule NoiseSchedule::vp_linear(double beta_min, double beta_max,
                                       double T) {
  if (!(beta_min > 0.0) || !(beta_max >= beta_min) || !(T > 0.0)) {
    throw std::invalid_argument("vp_linear: need 0 < beta_min <= beta_max, T > 0");
  }
  NoiseSchedule s;
  s.kind = ScheduleKind::VpLinear;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  s.T = T;
  return s;
}

NoiseSchedule NoiseSchedule::fixed(double sigma, double T) {
  if (!(sigma > 0.0) || !(T > 0.0)) {
    throw std::invalid_argument("fixed: need sigma > 0, T > 0");
  }
  NoiseSchedule s;
  s.kind = ScheduleKind::FixedSigma;
  s.fixed_sigma = sigma;
  s.T = T;
  return s;
}

namespace {

void check_time(const NoiseSchedule& s, double t) {
  if (!(t >= 0.0) || !(t <= s.T)) {
    throw std::domain_error("schedule time outside [0, T]");
  }
}

}  // namespace

double NoiseSchedule::alpha_bar(double t) const {
  check_time(*this, t);
  if (kind == ScheduleKind::FixedSigma) return 1.0;
  const double integral =
      beta_min * t + 0.5 * (beta_max - beta_min) * t * t / T;
  return std::exp(-integral);
}

double NoiseSchedule::h(double t) const {
  check_time(*this, t);
  if (kind == ScheduleKind::FixedSigma) return fixed_sigma * fixed_sigma;
  return 1.0 - alpha_bar(t);
}

double NoiseSchedule::a(double t) const {
  check_time(*this, t);
  if (kind == ScheduleKind::FixedSigma) return 1.0;
  return std::sqrt(alpha_bar(t));
}

double NoiseSchedule::beta(double t) const {
  if (kind != ScheduleKind::VpLinear) {
    throw std::domain_error("beta(t) is defined for the vp schedule only");
  }
  check_time(*this, t);
  return beta_min + (beta_max - beta_min) * t / T;
}

double NoiseSchedule::time_of_h(double h_target) const {
  if (kind != ScheduleKind::VpLinear) {
    throw std::domain_error("time_of_h is defined for the vp schedule only");
  }
  if (!(h_target >= 0.0) || !(h_target <= h(T))) {
    throw std::domain_error("time_of_h: target outside attainable range");
  }
  // Solve beta_min t + (beta_max-beta_min) t^2 / (2T) = -log(1 - h).
  const double integral = -std::log1p(-h_target);
  const double q = (beta_max - beta_min) / T;
  double t;
  if (q < 1e-14) {
    t = integral / beta_min;
  } else {
    t = (-beta_min + std::sqrt(beta_min * beta_min + 2.0 * q * integral)) / q;
  }
  // Clamp fp residue at the endpoints.
  return std::min(std::max(t, 0.0), T);
}

DataModel::DataModel(Manifold m, MoGLatentModel g)
    : manifold(std::move(m)), mog(std::move(g)) {
  const Index latent_dim =
      std::holds_alternative<LinearManifold>(manifold)
          ? std::get<LinearManifold>(manifold).intrinsic_dim()
          : 1;
  if (mog.dim() != latent_dim) {
    throw std::invalid_argument(
        "DataModel: mixture dimension does not match the manifold latent");
  }
}

namespace {

Index draw_component(const MoGLatentModel& mog, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (Index c = 0; c < mog.components(); ++c) {
    acc += mog.weights(c);
    if (u < acc) return c;
  }
  return mog.components() - 1;  // u landed in the rounding slack
}

}  // namespace

Matrix sample_x0(const DataModel& model, Rng& rng, Index n) {
  if (n < 0) throw std::invalid_argument("sample_x0: negative n");
  const Index d = model.ambient_dim();
  Matrix out(d, n);
  for (Index i = 0; i < n; ++i) {
    const Index c = draw_component(model.mog, rng);
    const Vector& mu = model.mog.means[static_cast<std::size_t>(c)];
    if (const auto* lin = std::get_if<LinearManifold>(&model.manifold)) {
      Vector z(mu.size());
      for (Index j = 0; j < z.size(); ++j) {
        z(j) = mu(j) + model.mog.latent_std * rng.gaussian();
      }
      out.col(i) = lin->A * z;
    } else {
      const auto& c2 = std::get<CircleManifold>(model.manifold);
      const double theta = mu(0) + model.mog.latent_std * rng.gaussian();
      out.col(i) =
          c2.R * (std::cos(theta) * c2.u1 + std::sin(theta) * c2.u2);
    }
  }
  return out;
}

ForwardSample forward_perturb(const NoiseSchedule& sched, const Vector& x0,
                              double t, Rng& rng) {
  ForwardSample s;
  s.t = t;
  s.a = sched.a(t);
  s.h = sched.h(t);
  s.x0 = x0;
  s.eps = Vector(x0.size());
  for (Index i = 0; i < x0.size(); ++i) s.eps(i) = rng.gaussian();
  s.x_t = s.a * s.x0 + std::sqrt(s.h) * s.eps;
  return s;
}

ForwardBatch forward_perturb(const NoiseSchedule& sched, const Matrix& x0,
                             double t, Rng& rng) {
  ForwardBatch b;
  b.t = t;
  b.a = sched.a(t);
  b.h = sched.h(t);
  b.x0 = x0;
  b.eps = Matrix(x0.rows(), x0.cols());
  // Column-major fill: one sample's noise is contiguous in draw order.
  for (Index j = 0; j < x0.cols(); ++j) {
    for (Index i = 0; i < x0.rows(); ++i) b.eps(i, j) = rng.gaussian();
  }
  b.x_t = b.a * b.x0 + std::sqrt(b.h) * b.eps;
  return b;
}

Vector dsm_target(const ForwardSample& s) {
  if (s.h <= 0.0) {
    throw std::domain_error("dsm_target: h = 0 has no denoising target");
  }
  return -s.eps / std::sqrt(s.h);
}

Matrix dsm_target(const ForwardBatch& b) {
  if (b.h <= 0.0) {
    throw std::domain_error("dsm_target: h = 0 has no denoising target");
  }
  return -b.eps / std::sqrt(b.h);
}

MoGLatentModel toy_mog_latent(Index k, double mode_radius, double latent_std,
                              Index components) {
  if (k < 2) throw std::invalid_argument("toy_mog_latent: need k >= 2");
  Vector w = Vector::Constant(components, 1.0 / static_cast<double>(components));
  std::vector<Vector> means;
  for (Index c = 0; c < components; ++c) {
    const double ang =
        2.0 * M_PI * static_cast<double>(c) / static_cast<double>(components);
    Vector mu = Vector::Zero(k);
    mu(0) = mode_radius * std::cos(ang);
    mu(1) = mode_radius * std::sin(ang);
    means.push_back(mu);
  }
  return MoGLatentModel(std::move(w), std::move(means), latent_std);
}

DataModel toy_mog_model(Rng& rng, Index d, Index k) {
  Matrix A = orthonormal_basis(rng, d, k);
  return DataModel(LinearManifold(std::move(A)), toy_mog_latent(k));
}

NoiseSchedule toy_schedule() { return NoiseSchedule::fixed(0.1); }

}  // namespace sild
