// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Phase II: above the manifold-regime boundary the score is globally
// smooth, so a single linear-in-time-basis random-feature head
//   s_hn(x, t) = sum_l phi_l(t) U_l (1/sqrt(m2)) tanh(V_l^T x)
// (no feature bias) is ridge-fitted over the whole window [t_max, T].
// The full model hard-gates between the two-stage score and this head at
// h(t) = gate_h; the jump at the gate is a logged diagnostic, never
// smoothed away.

#pragma once

#include "sild/stage2.hpp"

namespace sild {

// Orthonormal Fourier basis on [t_max, T] with u = (t - t_max)/(T - t_max):
// phi_0 = 1, phi_{2j-1} = sqrt(2) cos(2 pi j u), phi_{2j} = sqrt(2) sin(2
// pi j u). Throws std::domain_error for t outside the window.
Vector fourier_basis(Index L, double t_max, double T, double t);

struct HNHead {
  std::vector<Matrix> V;  // L frozen d x m2 blocks
  Matrix U;               // d x (L m2), learned
  double lambda = -1.0;
  double t_max = 0.0;
  double T = 1.0;

  Index L() const { return static_cast<Index>(V.size()); }
  Index m2() const { return V.empty() ? 0 : V.front().cols(); }
  Index d() const { return V.empty() ? 0 : V.front().rows(); }
};

HNHead init_hn_head(Rng& rng, Index d, Index m2, Index L, double t_max,
                    double T, double lambda = -1.0);

// Stacked features psi(x, t) in R^{L m2}; block l is phi_l(t) *
// (1/sqrt(m2)) tanh(V_l^T x). ||psi||^2 <= sum_l phi_l(t)^2.
Vector hn_features(const HNHead& head, const Vector& x, double t);
Matrix hn_features(const HNHead& head, const Matrix& X,
                   const std::vector<double>& ts);

// Ridge fit of the stacked coefficient matrix over samples drawn across
// the window; same normal-equation residual gate as the Stage-2 fit.
void hn_ridge_fit(HNHead& head, const Matrix& X, const std::vector<double>& ts,
                  const Matrix& Y);

Vector hn_forward(const HNHead& head, const Vector& x, double t);
Matrix hn_forward(const HNHead& head, const Matrix& X, double t);

// Hard-gated full score: the two-stage score when h(t) <= gate_h, the
// high-noise head otherwise. Bit-identical to whichever branch is active.
struct FullScore {
  Stage1Params stage1;
  RFHead rf;
  HNHead hn;
  NoiseSchedule sched;
  double gate_h = 0.5;
};

Vector full_score(const FullScore& fs, const Vector& x, double t);
Matrix full_score(const FullScore& fs, const Matrix& X, double t);

// Mean jump norm ||s_sild - s_hn|| over probe columns at the gate time
// (h(t_gate) = gate_h); the discontinuity diagnostic.
double gate_jump(const FullScore& fs, const Matrix& probes);

}  // namespace sild
