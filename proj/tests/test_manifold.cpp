// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "sild/data.hpp"
#include "sild/manifold.hpp"
#include "sild/numerics.hpp"
#include "sild/oracle.hpp"

using namespace sild;

namespace {

LinearManifold random_linear(std::uint64_t seed, Index d, Index k) {
  Rng r(seed);
  return LinearManifold(orthonormal_basis(r, d, k));
}

CircleManifold axis_circle(Index d, double radius) {
  Vector u1 = Vector::Zero(d), u2 = Vector::Zero(d);
  u1(0) = 1.0;
  u2(1) = 1.0;
  return CircleManifold(u1, u2, radius);
}

}  // namespace

TEST_CASE("linear manifold: constructor validates the frame") {
  Matrix bad = Matrix::Ones(4, 2);  // columns not orthonormal
  CHECK_THROWS_AS(LinearManifold{bad}, std::invalid_argument);
  const LinearManifold m = random_linear(1, 10, 3);
  CHECK(m.ambient_dim() == 10);
  CHECK(m.intrinsic_dim() == 3);
  // A subspace has infinite true reach; the struct carries a finite
  // trust-tube radius instead (default 10 sqrt(k), overridable).
  CHECK(reach(Manifold(m)) == doctest::Approx(10.0 * std::sqrt(3.0)));
  Rng r0(4);
  const LinearManifold m2(orthonormal_basis(r0, 10, 3), 7.5);
  CHECK(reach(Manifold(m2)) == 7.5);
  // Circle: reach equals the radius.
  CHECK(reach(Manifold(axis_circle(4, 2.0))) == 2.0);
}

TEST_CASE("linear projection: fixes on-manifold points, kills the normal space") {
  const LinearManifold lm = random_linear(2, 8, 3);
  const Manifold m(lm);
  Rng r(3);
  // On-manifold point is a fixed point.
  const Vector z = lm.A * gauss_matrix(r, 3, 1, 1.0).col(0);
  CHECK((project(m, z) - z).norm() < 1e-12);
  CHECK(distance(m, z) < 1e-12);
  // A vector in the orthogonal complement projects to zero.
  Vector w = gauss_matrix(r, 8, 1, 1.0).col(0);
  const Vector w_perp = w - lm.A * (lm.A.transpose() * w);
  CHECK(project(m, w_perp).norm() < 1e-12);
  CHECK(distance(m, w_perp) == doctest::Approx(w_perp.norm()).epsilon(1e-12));
  // General point: projection is A A^T x.
  const Vector x = gauss_matrix(r, 8, 1, 1.0).col(0);
  CHECK((project(m, x) - lm.A * (lm.A.transpose() * x)).norm() < 1e-12);
}

TEST_CASE("circle projection: radial snap and cut locus") {
  const Manifold m(axis_circle(3, 2.0));
  Vector x(3);
  x << 4.0, 0.0, 1.0;
  const Vector p = project(m, x);
  Vector expect(3);
  expect << 2.0, 0.0, 0.0;
  CHECK((p - expect).norm() < 1e-12);
  // distance^2 = (4-2)^2 + 1^2 = 5
  CHECK(distance(m, x) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
  // Points on the center axis have no unique nearest point.
  Vector axis(3);
  axis << 0.0, 0.0, 1.5;
  CHECK_THROWS_AS((void)project(m, axis), std::domain_error);
}

TEST_CASE("circle projection: generic point lands on the circle") {
  const CircleManifold c = axis_circle(5, 2.0);
  const Manifold m(c);
  Rng r(7);
  for (int i = 0; i < 20; ++i) {
    const Vector x = gauss_matrix(r, 5, 1, 1.0).col(0);
    if (std::hypot(x(0), x(1)) < 1e-6) continue;
    const Vector p = project(m, x);
    CHECK(std::abs(std::hypot(p(0), p(1)) - 2.0) < 1e-12);
    CHECK(std::abs(p(2)) + std::abs(p(3)) + std::abs(p(4)) < 1e-12);
    // Nearest-point property against a dense angle sweep.
    double best = 1e300;
    for (int a = 0; a < 2000; ++a) {
      const double th = 2.0 * M_PI * a / 2000.0;
      Vector q = Vector::Zero(5);
      q(0) = 2.0 * std::cos(th);
      q(1) = 2.0 * std::sin(th);
      best = std::min(best, (x - q).norm());
    }
    CHECK((x - p).norm() <= best + 1e-5);
  }
}

TEST_CASE("split_tangent_normal: recombination and orthogonality") {
  const LinearManifold lm = random_linear(11, 9, 4);
  const Manifold m(lm);
  Rng r(13);
  const Vector z = lm.A * gauss_matrix(r, 4, 1, 1.0).col(0);
  const Vector v = gauss_matrix(r, 9, 1, 1.0).col(0);
  const TangentSplit ts = split_tangent_normal(m, z, v);
  CHECK((ts.tangential + ts.normal - v).norm() < 1e-12);
  CHECK(std::abs(ts.tangential.dot(ts.normal)) < 1e-10);
  // Tangential part lies in range(A).
  CHECK((ts.tangential - lm.A * (lm.A.transpose() * ts.tangential)).norm() < 1e-12);

  // Circle: tangent at z = R e1 is along e2.
  const Manifold cm(axis_circle(4, 2.0));
  Vector zc = Vector::Zero(4);
  zc(0) = 2.0;
  Vector vc(4);
  vc << 0.5, 1.5, -0.25, 0.0;
  const TangentSplit cs = split_tangent_normal(cm, zc, vc);
  CHECK(cs.tangential(1) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(cs.tangential.norm() == doctest::Approx(1.5).epsilon(1e-12));
  CHECK((cs.tangential + cs.normal - vc).norm() < 1e-12);
  // Off-manifold base point rejected.
  Vector off = zc;
  off(0) = 2.5;
  CHECK_THROWS_AS((void)split_tangent_normal(cm, off, vc), std::invalid_argument);
}

TEST_CASE("h_correction: flat support gives exactly zero") {
  const LinearManifold lm = random_linear(17, 7, 2);
  const Manifold m(lm);
  Rng r(19);
  const Vector z = lm.A * gauss_matrix(r, 2, 1, 1.0).col(0);
  Vector w = gauss_matrix(r, 7, 1, 1.0).col(0);
  const Vector nu = w - lm.A * (lm.A.transpose() * w);
  CHECK(h_correction(m, z, nu, false) == 0.0);
  CHECK(h_correction(m, z, nu, true) == 0.0);
}

TEST_CASE("h_correction: circle curvature term at a radial offset") {
  // z on a radius-R circle, nu = rho * z / R (outward radial offset of
  // length rho). The shape operator gives B_nu = -rho/R, so the curvature
  // term is -1/2 log(1 + rho/R); the vp shrinkage adds -1/2 <nu, z> =
  // -1/2 rho R.
  const double R = 2.0;
  const Manifold m(axis_circle(3, R));
  Vector z = Vector::Zero(3);
  z(0) = R;
  const double rho = 0.5;
  const Vector nu = (rho / R) * z;
  const double expect_curv = -0.5 * std::log1p(rho / R);
  CHECK(h_correction(m, z, nu, false) == doctest::Approx(expect_curv).epsilon(1e-12));
  CHECK(h_correction(m, z, nu, true) ==
        doctest::Approx(expect_curv - 0.5 * rho * R).epsilon(1e-12));
  // Zero offset: no correction.
  CHECK(h_correction(m, z, Vector::Zero(3), false) == 0.0);
  // Inward offset reaching the center: outside the tube.
  const Vector inward = -(R / R) * z;  // rho = -R
  CHECK_THROWS_AS((void)h_correction(m, z, inward, true), std::domain_error);
  // Out-of-plane normal component is fine; tangential component is not.
  Vector oop = Vector::Zero(3);
  oop(2) = 0.3;
  CHECK(std::isfinite(h_correction(m, z, oop, false)));
  Vector tang = Vector::Zero(3);
  tang(1) = 0.3;  // tangent direction at z = R e1
  CHECK_THROWS_AS((void)h_correction(m, z, tang, false), std::invalid_argument);
}

TEST_CASE("h_correction: matches the density asymptotics of the circle") {
  // Small-h Laplace expansion of the noised density at x = z + nu:
  //   log p_h(x) = -||nu||^2/(2h) + log p0(z) + H(z, nu) + O(h)
  // so H(z,nu) - H(z,nu') must equal the h -> 0 limit of
  //   [log p_h(z+nu) + ||nu||^2/(2h)] - [log p_h(z+nu') + ||nu'||^2/(2h)]
  // for offsets at the same base point. Use a fixed-sigma schedule (a = 1,
  // no vp shrinkage) and quadrature densities as the reference.
  const double R = 2.0;
  const CircleManifold c = axis_circle(3, R);
  const Manifold m(c);
  // Uniform-ish smooth angle density: single wide Gaussian component.
  Vector w(1);
  w << 1.0;
  std::vector<Vector> mu(1, Vector::Zero(1));
  const MoGLatentModel mog(w, mu, 1.3);

  Vector z = Vector::Zero(3);
  z(0) = R;
  const double rho1 = 0.12, rho2 = -0.1;
  const Vector nu1 = (rho1 / R) * z;
  const Vector nu2 = (rho2 / R) * z;
  const double dH = h_correction(m, z, nu1, false) - h_correction(m, z, nu2, false);

  auto gap_at = [&](double sigma) {
    const NoiseSchedule sc = NoiseSchedule::fixed(sigma, 1.0);
    const double h = sigma * sigma;
    const double l1 =
        quadrature_log_density_circle(c, mog, sc, z + nu1, 0.5, 2048) +
        nu1.squaredNorm() / (2.0 * h);
    const double l2 =
        quadrature_log_density_circle(c, mog, sc, z + nu2, 0.5, 2048) +
        nu2.squaredNorm() / (2.0 * h);
    return l1 - l2;
  };
  // The gap approaches dH linearly in h; at h = 1e-4 the O(h) remainder is
  // far below the tolerance.
  const double g_coarse = gap_at(0.1);    // h = 1e-2
  const double g_fine = gap_at(0.01);     // h = 1e-4
  CHECK(std::abs(g_fine - dH) < 1e-3);
  CHECK(std::abs(g_fine - dH) < std::abs(g_coarse - dH));
}
