// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Analytic ground-truth scores for the synthetic models. For the linear
// support the noised density is an ambient Gaussian mixture whose inverse
// covariance has a Woodbury closed form; for the circle the score is
// evaluated by quadrature over the angle. These are the reference targets
// every learned score in the lab is measured against.

#pragma once

#include <functional>

#include "sild/data.hpp"
#include "sild/manifold.hpp"

namespace sild {

// p_t for a latent MoG pushed through an orthonormal frame A and noised at
// time t: mixture of N(a A mu_c, a^2 s^2 A A^T + h I). gamma is the
// Woodbury coefficient a^2 s^2 / (h + a^2 s^2), so that
// Sigma_t^{-1} = (1/h)(I - gamma A A^T).
struct AmbientMoG {
  Matrix A;
  Vector weights;
  std::vector<Vector> latent_means;  // mu_c, un-noised
  double a = 1.0;
  double h = 0.0;
  double s = 0.0;  // latent std
  double gamma = 0.0;

  Index d() const { return A.rows(); }
  Index k() const { return A.cols(); }
};

AmbientMoG ambient_mog(const LinearManifold& m, const MoGLatentModel& mog,
                       const NoiseSchedule& sched, double t);

// Sigma_t^{-1} v via Woodbury.
Vector apply_inv_sigma(const AmbientMoG& g, const Vector& v);

// grad_x log p_t(x), exact.
Vector exact_score_linear(const AmbientMoG& g, const Vector& x);
Matrix exact_score_linear(const AmbientMoG& g, const Matrix& X);

// log p_t(x) including normalization (finite-difference oracle hook).
double log_density_linear(const AmbientMoG& g, const Vector& x);

struct ScoreDecomposition {
  Vector normal_term;  // -(x - proj(x)) / h(t)
  Vector residual;     // score - normal_term
};

// Splits any score function into the O(1/h) normal restoring part and the
// O(1) remainder. For the circle, x must be inside the half-reach tube.
ScoreDecomposition decompose_score(
    const Manifold& m, const NoiseSchedule& sched,
    const std::function<Vector(const Vector&, double)>& score_fn,
    const Vector& x, double t);

// Exact tangential residual for the linear model: the k-dimensional score
// of the blurred latent mixture sum_c pi_c N(a mu_c, (a^2 s^2 + h) I_k),
// evaluated at A^T z and lifted by A. At on-manifold z this equals
// exact_score_linear minus the normal term, at every t.
Vector residual_score(const LinearManifold& m, const MoGLatentModel& mog,
                      const NoiseSchedule& sched, const Vector& z, double t);

// Blurred latent log density log q_t(zeta) backing residual_score (for
// finite-difference checks in latent coordinates).
double residual_latent_log_density(const MoGLatentModel& mog,
                                   const NoiseSchedule& sched,
                                   const Vector& zeta, double t);

// High-noise affine approximation -x/h + (a/h) mu0 + (a^2/h^2) C0 x, with
// mu0 / C0 the ambient mean and covariance of the clean data. Exact in the
// a -> 0 limit; for a centered Gaussian the residual error is O(a^4/h^3).
Vector affine_score(const LinearManifold& m, const MoGLatentModel& mog,
                    const NoiseSchedule& sched, const Vector& x, double t);

// Circle score by trapezoid quadrature over the angle (spectrally accurate
// for the smooth periodic integrand). Evaluates at n_quad and 2*n_quad
// nodes; throws std::runtime_error if the refinement changes the result by
// more than 1e-6 relative. The angle density is the wrapped mixture.
Vector quadrature_score_circle(const CircleManifold& c,
                               const MoGLatentModel& angle_mog,
                               const NoiseSchedule& sched, const Vector& x,
                               double t, Index n_quad = 512);

// log p_t(x) for the circle model by quadrature at n_quad nodes (finite-
// difference oracle hook; same normalization convention at fixed n_quad).
double quadrature_log_density_circle(const CircleManifold& c,
                                     const MoGLatentModel& angle_mog,
                                     const NoiseSchedule& sched,
                                     const Vector& x, double t,
                                     Index n_quad = 1024);

}  // namespace sild
