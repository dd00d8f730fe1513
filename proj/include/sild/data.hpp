// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic data: a Gaussian mixture in latent coordinates pushed onto the
// manifold, plus the forward noising process x_t = a_t x_0 + sqrt(h(t)) eps
// with h(t) = 1 - alpha_bar(t). Two schedules: the variance-preserving
// linear-beta schedule and a fixed-sigma toy mode with a_t = 1.

#pragma once

#include "sild/manifold.hpp"
#include "sild/numerics.hpp"

namespace sild {

// Mixture sum_c weights[c] N(means[c], latent_std^2 I) in R^k. For the
// circle support k must be 1 and the latent variable is the angle.
struct MoGLatentModel {
  Vector weights;
  std::vector<Vector> means;
  double latent_std;

  MoGLatentModel(Vector w, std::vector<Vector> mu, double s);

  Index dim() const { return means.empty() ? 0 : means.front().size(); }
  Index components() const { return weights.size(); }
};

// Mixture mean sum_c pi_c mu_c.
Vector latent_mean(const MoGLatentModel& mog);
// Mixture covariance sum_c pi_c (mu_c mu_c^T + s^2 I) - mean mean^T.
Matrix latent_cov(const MoGLatentModel& mog);

enum class ScheduleKind { VpLinear, FixedSigma };

struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::FixedSigma;
  double beta_min = 0.1;
  double beta_max = 20.0;
  double T = 1.0;
  double fixed_sigma = 0.1;

  static NoiseSchedule vp_linear(double beta_min = 0.1, double beta_max = 20.0,
                                 double T = 1.0);
  static NoiseSchedule fixed(double sigma, double T = 1.0);

  // alpha_bar(t) = exp(-(beta_min t + (beta_max-beta_min) t^2 / (2T)));
  // identically 1 in fixed mode. Throws std::domain_error for t outside
  // [0, T].
  double alpha_bar(double t) const;
  // h(t) = 1 - alpha_bar(t) in vp mode; fixed_sigma^2 in fixed mode.
  double h(double t) const;
  // a_t = sqrt(1 - h(t)) in vp mode; 1 in fixed mode.
  double a(double t) const;
  // beta(t) = beta_min + (beta_max - beta_min) t / T. vp mode only.
  double beta(double t) const;
  // Inverse of h on [0, T]; vp mode only, h_target must be attainable.
  double time_of_h(double h_target) const;
};

// One noised draw; a and h cache the schedule values at t so that
// x_t = a x_0 + sqrt(h) eps reconstructs exactly from the stored fields.
struct ForwardSample {
  Vector x0;
  Vector x_t;
  Vector eps;
  double t = 0.0;
  double a = 1.0;
  double h = 0.0;
};

// Column-batched variant (each column one sample, shared t).
struct ForwardBatch {
  Matrix x0;
  Matrix x_t;
  Matrix eps;
  double t = 0.0;
  double a = 1.0;
  double h = 0.0;

  Index n() const { return x0.cols(); }
};

// Support + latent mixture; validates that the mixture dimension matches
// the manifold's latent parametrization (k for linear, 1 for circle).
struct DataModel {
  Manifold manifold;
  MoGLatentModel mog;

  DataModel(Manifold m, MoGLatentModel g);

  Index ambient_dim() const { return sild::ambient_dim(manifold); }
};

// n clean draws x_0 as columns of a d x n matrix.
Matrix sample_x0(const DataModel& model, Rng& rng, Index n);

ForwardSample forward_perturb(const NoiseSchedule& sched, const Vector& x0,
                              double t, Rng& rng);
ForwardBatch forward_perturb(const NoiseSchedule& sched, const Matrix& x0,
                             double t, Rng& rng);

// Denoising regression target -eps / sqrt(h); throws std::domain_error when
// h = 0 (clean data has no target).
Vector dsm_target(const ForwardSample& s);
Matrix dsm_target(const ForwardBatch& b);

// The standing example model: d = 100, k = 5, three equally weighted modes
// with means on a circle of radius 2 in the first two latent coordinates
// (remaining coordinates zero), latent std 0.5; basis A drawn uniformly
// from the Stiefel manifold via QR of a Gaussian matrix.
DataModel toy_mog_model(Rng& rng, Index d = 100, Index k = 5);
// Matching latent mixture only (for reduced-dimension variants).
MoGLatentModel toy_mog_latent(Index k = 5, double mode_radius = 2.0,
                              double latent_std = 0.5, Index components = 3);
// Fixed sigma_t = 0.1 toy schedule.
NoiseSchedule toy_schedule();

}  // namespace sild
