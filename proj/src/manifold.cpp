// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sild/manifold.hpp"

#include <cmath>
#include <stdexcept>

namespace sild {

namespace {

constexpr double kOnManifoldTol = 1e-8;
constexpr double kCutLocusTol = 1e-12;

void check_on_manifold(const Manifold& m, const Vector& z) {
  if (distance(m, z) > kOnManifoldTol) {
    throw std::invalid_argument("point is not on the manifold");
  }
}

}  // namespace

LinearManifold::LinearManifold(Matrix basis, double reach_override)
    : A(std::move(basis)) {
  if (A.rows() < 1 || A.cols() < 1 || A.cols() > A.rows()) {
    throw std::invalid_argument("LinearManifold: need 1 <= k <= d");
  }
  const double ortho_err =
      (A.transpose() * A - Matrix::Identity(A.cols(), A.cols()))
          .cwiseAbs()
          .maxCoeff();
  if (ortho_err > 1e-10) {
    throw std::invalid_argument("LinearManifold: columns not orthonormal");
  }
  effective_reach = reach_override > 0.0
                        ? reach_override
                        : 10.0 * std::sqrt(static_cast<double>(A.cols()));
}

CircleManifold::CircleManifold(Vector u1_in, Vector u2_in, double radius)
    : u1(std::move(u1_in)), u2(std::move(u2_in)), R(radius) {
  if (u1.size() != u2.size() || u1.size() < 2) {
    throw std::invalid_argument("CircleManifold: need matching dims >= 2");
  }
  if (!(R > 0.0)) {
    throw std::invalid_argument("CircleManifold: radius must be positive");
  }
  const double e1 = std::abs(u1.norm() - 1.0);
  const double e2 = std::abs(u2.norm() - 1.0);
  const double e12 = std::abs(u1.dot(u2));
  if (e1 > 1e-10 || e2 > 1e-10 || e12 > 1e-10) {
    throw std::invalid_argument("CircleManifold: frame not orthonormal");
  }
}

Index ambient_dim(const Manifold& m) {
  return std::visit([](const auto& mm) { return mm.ambient_dim(); }, m);
}

Index intrinsic_dim(const Manifold& m) {
  return std::visit([](const auto& mm) { return mm.intrinsic_dim(); }, m);
}

double reach(const Manifold& m) {
  if (const auto* lin = std::get_if<LinearManifold>(&m)) {
    return lin->effective_reach;
  }
  return std::get<CircleManifold>(m).R;
}

Vector project(const Manifold& m, const Vector& x) {
  if (x.size() != ambient_dim(m)) {
    throw std::invalid_argument("project: dimension mismatch");
  }
  if (const auto* lin = std::get_if<LinearManifold>(&m)) {
    return lin->A * (lin->A.transpose() * x);
  }
  const auto& c = std::get<CircleManifold>(m);
  const double c1 = c.u1.dot(x);
  const double c2 = c.u2.dot(x);
  const double r = std::hypot(c1, c2);
  if (r <= kCutLocusTol) {
    throw std::domain_error("project: x on the cut locus of the circle");
  }
  return (c.R / r) * (c1 * c.u1 + c2 * c.u2);
}

double distance(const Manifold& m, const Vector& x) {
  return (x - project(m, x)).norm();
}

TangentSplit split_tangent_normal(const Manifold& m, const Vector& z,
                                  const Vector& v) {
  if (v.size() != ambient_dim(m)) {
    throw std::invalid_argument("split_tangent_normal: dimension mismatch");
  }
  check_on_manifold(m, z);
  if (const auto* lin = std::get_if<LinearManifold>(&m)) {
    Vector tangential = lin->A * (lin->A.transpose() * v);
    return {tangential, v - tangential};
  }
  const auto& c = std::get<CircleManifold>(m);
  // Unit tangent at angle theta: -sin(theta) u1 + cos(theta) u2.
  const double ct = c.u1.dot(z) / c.R;
  const double st = c.u2.dot(z) / c.R;
  Vector tau = -st * c.u1 + ct * c.u2;
  Vector tangential = tau.dot(v) * tau;
  return {tangential, v - tangential};
}

double h_correction(const Manifold& m, const Vector& z, const Vector& nu,
                    bool vp_mode) {
  check_on_manifold(m, z);
  const TangentSplit split = split_tangent_normal(m, z, nu);
  if (split.tangential.norm() > kOnManifoldTol * std::max(1.0, nu.norm())) {
    throw std::invalid_argument("h_correction: nu is not a normal vector");
  }
  if (std::holds_alternative<LinearManifold>(m)) {
    // Flat second fundamental form and <nu, z> = 0 exactly under the
    // preconditions; both terms vanish identically.
    return 0.0;
  }
  const auto& c = std::get<CircleManifold>(m);
  const double b = -nu.dot(z) / (c.R * c.R);  // B_nu, 1x1
  if (b >= 1.0) {
    throw std::domain_error("h_correction: offset reaches the focal point");
  }
  double out = -0.5 * std::log1p(-b);
  if (vp_mode) out += -0.5 * nu.dot(z);
  return out;
}

}  // namespace sild
