// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sild/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sild {

namespace {

void check_h_positive(double h) {
  if (!(h > 0.0)) {
    throw std::domain_error("oracle: score undefined at h = 0");
  }
}

}  // namespace

AmbientMoG ambient_mog(const LinearManifold& m, const MoGLatentModel& mog,
                       const NoiseSchedule& sched, double t) {
  if (mog.dim() != m.intrinsic_dim()) {
    throw std::invalid_argument("ambient_mog: latent dimension mismatch");
  }
  AmbientMoG g;
  g.A = m.A;
  g.weights = mog.weights;
  g.latent_means = mog.means;
  g.a = sched.a(t);
  g.h = sched.h(t);
  g.s = mog.latent_std;
  check_h_positive(g.h);
  const double as2 = g.a * g.a * g.s * g.s;
  g.gamma = as2 / (g.h + as2);
  return g;
}

Vector apply_inv_sigma(const AmbientMoG& g, const Vector& v) {
  return (v - g.gamma * (g.A * (g.A.transpose() * v))) / g.h;
}

namespace {

// Posterior mixture weights at x via log-sum-exp; terms constant across
// components (the normal-space quadratic form) are dropped. zeta = A^T x.
Vector posterior_weights(const AmbientMoG& g, const Vector& zeta) {
  const Index C = g.weights.size();
  const double blur = g.h + g.a * g.a * g.s * g.s;
  Vector logw(C);
  for (Index c = 0; c < C; ++c) {
    const double w = g.weights(c);
    if (w <= 0.0) {
      logw(c) = -std::numeric_limits<double>::infinity();
      continue;
    }
    const Vector& mu = g.latent_means[static_cast<std::size_t>(c)];
    const Vector dz = zeta - g.a * mu;
    logw(c) = std::log(w) - 0.5 * dz.squaredNorm() / blur;
  }
  const double lse = logsumexp(logw);
  Vector out(C);
  for (Index c = 0; c < C; ++c) out(c) = std::exp(logw(c) - lse);
  return out;
}

}  // namespace

Vector exact_score_linear(const AmbientMoG& g, const Vector& x) {
  if (x.size() != g.d()) {
    throw std::invalid_argument("exact_score_linear: dimension mismatch");
  }
  const Vector zeta = g.A.transpose() * x;
  const Vector w = posterior_weights(g, zeta);
  Vector mu_post = Vector::Zero(g.k());
  for (Index c = 0; c < g.weights.size(); ++c) {
    mu_post += w(c) * g.latent_means[static_cast<std::size_t>(c)];
  }
  const double blur = g.h + g.a * g.a * g.s * g.s;
  // score = Sigma^{-1}(sum_c w_c m_c - x) with the Woodbury split into the
  // tangential (1/blur) and normal (1/h) rates.
  const Vector tangential = g.A * ((g.a * mu_post - zeta) / blur);
  const Vector normal = (x - g.A * zeta) / g.h;
  return tangential - normal;
}

Matrix exact_score_linear(const AmbientMoG& g, const Matrix& X) {
  Matrix out(X.rows(), X.cols());
  for (Index j = 0; j < X.cols(); ++j) {
    out.col(j) = exact_score_linear(g, Vector(X.col(j)));
  }
  return out;
}

double log_density_linear(const AmbientMoG& g, const Vector& x) {
  const Index d = g.d();
  const Index k = g.k();
  const Vector zeta = g.A.transpose() * x;
  const double blur = g.h + g.a * g.a * g.s * g.s;
  const double perp_sq = (x - g.A * zeta).squaredNorm();
  Vector logw(g.weights.size());
  for (Index c = 0; c < g.weights.size(); ++c) {
    const double w = g.weights(c);
    if (w <= 0.0) {
      logw(c) = -std::numeric_limits<double>::infinity();
      continue;
    }
    const Vector dz = zeta - g.a * g.latent_means[static_cast<std::size_t>(c)];
    logw(c) = std::log(w) - 0.5 * (dz.squaredNorm() / blur + perp_sq / g.h);
  }
  const double logdet = static_cast<double>(d - k) * std::log(g.h) +
                        static_cast<double>(k) * std::log(blur);
  return logsumexp(logw) -
         0.5 * (static_cast<double>(d) * std::log(2.0 * M_PI) + logdet);
}

ScoreDecomposition decompose_score(
    const Manifold& m, const NoiseSchedule& sched,
    const std::function<Vector(const Vector&, double)>& score_fn,
    const Vector& x, double t) {
  const double h = sched.h(t);
  check_h_positive(h);
  if (std::holds_alternative<CircleManifold>(m) &&
      distance(m, x) >= 0.5 * reach(m)) {
    throw std::domain_error("decompose_score: x outside the half-reach tube");
  }
  ScoreDecomposition out;
  out.normal_term = -(x - project(m, x)) / h;
  out.residual = score_fn(x, t) - out.normal_term;
  return out;
}

Vector residual_score(const LinearManifold& m, const MoGLatentModel& mog,
                      const NoiseSchedule& sched, const Vector& z, double t) {
  if ((z - m.A * (m.A.transpose() * z)).norm() > 1e-8) {
    throw std::invalid_argument("residual_score: z is not on the manifold");
  }
  const double a = sched.a(t);
  const double h = sched.h(t);
  check_h_positive(h);
  const double blur = h + a * a * mog.latent_std * mog.latent_std;
  const Vector zeta = m.A.transpose() * z;
  Vector logw(mog.components());
  for (Index c = 0; c < mog.components(); ++c) {
    const double w = mog.weights(c);
    logw(c) = w > 0.0
                  ? std::log(w) -
                        0.5 *
                            (zeta - a * mog.means[static_cast<std::size_t>(c)])
                                .squaredNorm() /
                            blur
                  : -std::numeric_limits<double>::infinity();
  }
  const double lse = logsumexp(logw);
  Vector score_lat = Vector::Zero(mog.dim());
  for (Index c = 0; c < mog.components(); ++c) {
    const double w = std::exp(logw(c) - lse);
    score_lat +=
        w * (a * mog.means[static_cast<std::size_t>(c)] - zeta) / blur;
  }
  return m.A * score_lat;
}

double residual_latent_log_density(const MoGLatentModel& mog,
                                   const NoiseSchedule& sched,
                                   const Vector& zeta, double t) {
  const double a = sched.a(t);
  const double h = sched.h(t);
  check_h_positive(h);
  const double blur = h + a * a * mog.latent_std * mog.latent_std;
  Vector logw(mog.components());
  for (Index c = 0; c < mog.components(); ++c) {
    const double w = mog.weights(c);
    logw(c) = w > 0.0
                  ? std::log(w) -
                        0.5 *
                            (zeta - a * mog.means[static_cast<std::size_t>(c)])
                                .squaredNorm() /
                            blur
                  : -std::numeric_limits<double>::infinity();
  }
  return logsumexp(logw) -
         0.5 * static_cast<double>(mog.dim()) * std::log(2.0 * M_PI * blur);
}

Vector affine_score(const LinearManifold& m, const MoGLatentModel& mog,
                    const NoiseSchedule& sched, const Vector& x, double t) {
  const double a = sched.a(t);
  const double h = sched.h(t);
  check_h_positive(h);
  const Vector mu0 = m.A * latent_mean(mog);
  const Matrix S = latent_cov(mog);
  const Vector c0x = m.A * (S * (m.A.transpose() * x));
  return -x / h + (a / h) * mu0 + (a * a / (h * h)) * c0x;
}

namespace {

// Wrapped mixture log density of the angle, truncating the wrap sum once
// contributions are below exp(-18) of the nearest term.
double wrapped_log_density(const MoGLatentModel& mog, double theta) {
  const double s = mog.latent_std;
  double mu_max = 0.0;
  for (const auto& mu : mog.means) mu_max = std::max(mu_max, std::abs(mu(0)));
  const int wraps =
      2 + static_cast<int>(std::ceil((mu_max + 6.0 * s) / (2.0 * M_PI)));
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(mog.components() * (2 * wraps + 1)));
  const double log_norm = -std::log(s) - 0.5 * std::log(2.0 * M_PI);
  for (Index c = 0; c < mog.components(); ++c) {
    const double w = mog.weights(c);
    if (w <= 0.0) continue;
    const double mu = mog.means[static_cast<std::size_t>(c)](0);
    for (int j = -wraps; j <= wraps; ++j) {
      const double dtheta = theta - mu - 2.0 * M_PI * j;
      terms.push_back(std::log(w) + log_norm -
                      0.5 * dtheta * dtheta / (s * s));
    }
  }
  Vector v = Eigen::Map<Vector>(terms.data(), static_cast<Index>(terms.size()));
  return logsumexp(v);
}

struct CircleQuad {
  Vector score;
  double log_density;  // up to the chosen normalization
};

CircleQuad circle_quadrature(const CircleManifold& c,
                             const MoGLatentModel& angle_mog, double a,
                             double h, const Vector& x, Index n) {
  const double c1 = c.u1.dot(x);
  const double c2 = c.u2.dot(x);
  const double x_sq = x.squaredNorm();
  Vector logL(n);
  Vector cs(n), sn(n);
  for (Index i = 0; i < n; ++i) {
    const double theta = 2.0 * M_PI * static_cast<double>(i) /
                         static_cast<double>(n);
    cs(i) = std::cos(theta);
    sn(i) = std::sin(theta);
    // ||x - a z(theta)||^2 expanded; only the theta-dependent cross term
    // matters per node, the rest is shared.
    const double cross = a * c.R * (c1 * cs(i) + c2 * sn(i));
    logL(i) = wrapped_log_density(angle_mog, theta) +
              (cross - 0.5 * (x_sq + a * a * c.R * c.R)) / h;
  }
  const double lse = logsumexp(logL);
  double sum_c = 0.0, sum_s = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double p = std::exp(logL(i) - lse);
    sum_c += p * cs(i);
    sum_s += p * sn(i);
  }
  CircleQuad out;
  // E[a z(theta) | x] - x, all over h.
  out.score = (a * c.R / h) * (sum_c * c.u1 + sum_s * c.u2) - x / h;
  out.log_density = lse + std::log(2.0 * M_PI / static_cast<double>(n)) -
                    0.5 * static_cast<double>(x.size()) *
                        std::log(2.0 * M_PI * h);
  return out;
}

}  // namespace

Vector quadrature_score_circle(const CircleManifold& c,
                               const MoGLatentModel& angle_mog,
                               const NoiseSchedule& sched, const Vector& x,
                               double t, Index n_quad) {
  if (angle_mog.dim() != 1) {
    throw std::invalid_argument("quadrature_score_circle: angle mog must be 1-d");
  }
  if (angle_mog.latent_std <= 0.0) {
    throw std::invalid_argument("quadrature_score_circle: need latent_std > 0");
  }
  if (n_quad < 8) {
    throw std::invalid_argument("quadrature_score_circle: n_quad too small");
  }
  const double a = sched.a(t);
  const double h = sched.h(t);
  check_h_positive(h);
  const Vector coarse = circle_quadrature(c, angle_mog, a, h, x, n_quad).score;
  const Vector fine =
      circle_quadrature(c, angle_mog, a, h, x, 2 * n_quad).score;
  const double rel =
      (fine - coarse).norm() / std::max(fine.norm(), 1e-12);
  if (rel > 1e-6) {
    throw std::runtime_error(
        "quadrature_score_circle: not converged, refine n_quad");
  }
  return fine;
}

double quadrature_log_density_circle(const CircleManifold& c,
                                     const MoGLatentModel& angle_mog,
                                     const NoiseSchedule& sched,
                                     const Vector& x, double t, Index n_quad) {
  const double a = sched.a(t);
  const double h = sched.h(t);
  check_h_positive(h);
  return circle_quadrature(c, angle_mog, a, h, x, n_quad).log_density;
}

}  // namespace sild
