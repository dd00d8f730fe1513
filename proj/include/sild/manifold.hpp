// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// The two synthetic supports used by the lab: a k-dimensional linear
// subspace spanned by an orthonormal frame, and a circle of radius R
// embedded in a 2-plane. Both expose nearest-point projection, tangent /
// normal splitting at on-manifold points, and the curvature correction
// H(z, nu) that enters the small-noise score expansion.

#pragma once

#include <variant>

#include "sild/numerics.hpp"

namespace sild {

// Flat support: M = range(A), A in R^{d x k} with orthonormal columns.
// effective_reach is the tube radius inside which off-manifold evaluations
// are considered trustworthy; the true reach of a subspace is infinite.
struct LinearManifold {
  Matrix A;
  double effective_reach;

  LinearManifold(Matrix basis, double reach_override = -1.0);

  Index ambient_dim() const { return A.rows(); }
  Index intrinsic_dim() const { return A.cols(); }
};

// Circle of radius R in span{u1, u2} (orthonormal pair in R^d); reach = R.
struct CircleManifold {
  Vector u1;
  Vector u2;
  double R;

  CircleManifold(Vector u1_in, Vector u2_in, double radius);

  Index ambient_dim() const { return u1.size(); }
  Index intrinsic_dim() const { return 1; }
};

using Manifold = std::variant<LinearManifold, CircleManifold>;

Index ambient_dim(const Manifold& m);
Index intrinsic_dim(const Manifold& m);
double reach(const Manifold& m);

// Nearest point on M. For the circle, throws std::domain_error when x is
// within 1e-12 of the cut locus (the axis through the center orthogonal to
// the circle plane), where the projection is not unique.
Vector project(const Manifold& m, const Vector& x);

// ||x - project(x)||.
double distance(const Manifold& m, const Vector& x);

struct TangentSplit {
  Vector tangential;
  Vector normal;
};

// Splits v into components along and orthogonal to T_z M. z must lie on the
// manifold within 1e-8.
TangentSplit split_tangent_normal(const Manifold& m, const Vector& z,
                                  const Vector& v);

// Curvature correction H(z, nu) = [vp shrinkage] - 1/2 log det(I_k - B_nu),
// with (B_nu)_ij = <nu, II(e_i, e_j)> in an orthonormal tangent frame. The
// shrinkage term -1/2 <nu, z> is included only when vp_mode is set. z must
// lie on M and nu in the normal space at z (both within 1e-8). Linear
// manifolds are flat and have nu orthogonal to z, so H is identically 0
// there (the vp term included). For the circle, II(e, e) = -z / R^2, hence
// B_nu = -<nu, z> / R^2; an offset reaching the center (B_nu >= 1) is out
// of the tube and throws std::domain_error.
double h_correction(const Manifold& m, const Vector& z, const Vector& nu,
                    bool vp_mode);

}  // namespace sild
