// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "sild/numerics.hpp"

using namespace sild;

TEST_CASE("rng: same seed reproduces the stream exactly") {
  Rng a(12345), b(12345);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng c(12345), d(12345);
  for (int i = 0; i < 1000; ++i) {
    CHECK(c.gaussian() == d.gaussian());
    CHECK(c.uniform() == d.uniform());
  }
}

TEST_CASE("rng: uniform lands in [0,1) and index in range") {
  Rng r(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const std::uint64_t j = r.index(7);
    CHECK(j < 7);
  }
  const double v = r.uniform(-2.0, 5.0);
  CHECK(v >= -2.0);
  CHECK(v < 5.0);
}

TEST_CASE("rng: split is pure in (seed, key) and leaves the parent alone") {
  Rng parent(99);
  // Splitting twice with the same key yields identical sub-streams.
  Rng s1 = parent.split(42);
  Rng s2 = parent.split(42);
  for (int i = 0; i < 100; ++i) CHECK(s1.next_u64() == s2.next_u64());

  // Splitting does not consume the parent stream.
  Rng ref(99);
  (void)parent.split(7);
  (void)parent.split(8);
  for (int i = 0; i < 100; ++i) CHECK(parent.next_u64() == ref.next_u64());

  // Distinct keys decorrelate.
  Rng t1 = Rng(99).split(1);
  Rng t2 = Rng(99).split(2);
  bool differ = false;
  for (int i = 0; i < 10 && !differ; ++i) differ = t1.next_u64() != t2.next_u64();
  CHECK(differ);
}

TEST_CASE("rng: gaussian mean and variance concentrate") {
  Rng r(2024);
  const int n = 1 << 20;  // ~1.05e6 draws
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = r.gaussian();
    sum += g;
    sumsq += g * g;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  // 5 sigma band for the mean of n standard normals.
  CHECK(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
  // Var of the sample variance is ~2/n; allow 5 sigma.
  CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("gauss_matrix: zero std gives the exact zero matrix") {
  Rng r(1);
  const Matrix z = gauss_matrix(r, 4, 6, 0.0);
  CHECK(z.rows() == 4);
  CHECK(z.cols() == 6);
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gauss_matrix: large-sample mean is near zero") {
  Rng r(5);
  const Matrix g = gauss_matrix(r, 1000, 1000, 1.0);
  CHECK(std::abs(g.mean()) < 0.01);
  // Entry variance close to 1 as well.
  CHECK(std::abs(g.array().square().mean() - 1.0) < 0.01);
}

TEST_CASE("gauss_matrix: deterministic under a fixed seed") {
  Rng a(7), b(7);
  const Matrix ga = gauss_matrix(a, 17, 9, 2.5);
  const Matrix gb = gauss_matrix(b, 17, 9, 2.5);
  CHECK((ga - gb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gauss_matrix: fills in row-major element order") {
  Rng a(11);
  const Matrix g = gauss_matrix(a, 2, 2, 1.0);
  Rng b(11);
  const double e00 = b.gaussian();
  const double e01 = b.gaussian();
  const double e10 = b.gaussian();
  const double e11 = b.gaussian();
  CHECK(g(0, 0) == e00);
  CHECK(g(0, 1) == e01);
  CHECK(g(1, 0) == e10);
  CHECK(g(1, 1) == e11);
}

TEST_CASE("orthonormal_basis: square case is orthogonal with |det| = 1") {
  Rng r(13);
  const Matrix q = orthonormal_basis(r, 5, 5);
  CHECK(std::abs(std::abs(q.determinant()) - 1.0) < 1e-10);
  CHECK((q.transpose() * q - Matrix::Identity(5, 5)).norm() < 1e-12);
}

TEST_CASE("orthonormal_basis: tall case has orthonormal columns") {
  Rng r(17);
  const Matrix a = orthonormal_basis(r, 100, 5);
  CHECK(a.rows() == 100);
  CHECK(a.cols() == 5);
  CHECK((a.transpose() * a - Matrix::Identity(5, 5)).norm() < 1e-12);
}

TEST_CASE("orthonormal_basis: single column is a unit vector") {
  Rng r(19);
  const Matrix v = orthonormal_basis(r, 3, 1);
  CHECK(std::abs(v.col(0).norm() - 1.0) < 1e-12);
}

TEST_CASE("orthonormal_basis: invalid shapes throw") {
  Rng r(23);
  CHECK_THROWS_AS((void)orthonormal_basis(r, 3, 4), std::invalid_argument);
  CHECK_THROWS_AS((void)orthonormal_basis(r, 3, 0), std::invalid_argument);
}

TEST_CASE("solve_spd: identity and scaled identity") {
  Rng r(29);
  const Matrix b = gauss_matrix(r, 6, 3, 1.0);
  const Matrix x1 = solve_spd(Matrix::Identity(6, 6), b);
  CHECK((x1 - b).cwiseAbs().maxCoeff() < 1e-14);
  const Matrix x2 = solve_spd(2.0 * Matrix::Identity(6, 6), b);
  CHECK((x2 - 0.5 * b).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("solve_spd: random SPD system solves to small residual") {
  Rng r(31);
  const Matrix g = gauss_matrix(r, 20, 20, 1.0);
  const Matrix m = g * g.transpose() + Matrix::Identity(20, 20);
  const Matrix b = gauss_matrix(r, 20, 4, 1.0);
  const Matrix x = solve_spd(m, b);
  CHECK((m * x - b).norm() / b.norm() < 1e-10);
}

TEST_CASE("solve_spd: non-positive-definite input throws") {
  const Matrix m = -Matrix::Identity(3, 3);
  const Matrix b = Matrix::Ones(3, 1);
  CHECK_THROWS_AS((void)solve_spd(m, b), std::domain_error);
}

TEST_CASE("sym_eigvals: diagonal matrix sorts descending") {
  Matrix m = Matrix::Zero(3, 3);
  m(0, 0) = 3.0;
  m(1, 1) = 1.0;
  m(2, 2) = 2.0;
  const std::vector<double> ev = sym_eigvals(m);
  REQUIRE(ev.size() == 3);
  CHECK(ev[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(ev[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(ev[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sym_eigvals: identity has all-ones spectrum") {
  const std::vector<double> ev = sym_eigvals(Matrix::Identity(5, 5));
  for (const double v : ev) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sym_eigvals: Gram matrices are PSD up to roundoff") {
  Rng r(37);
  const Matrix g = gauss_matrix(r, 12, 5, 1.0);
  const std::vector<double> ev = sym_eigvals(g * g.transpose());
  for (const double v : ev) CHECK(v >= -1e-10);
  // rank at most 5: trailing eigenvalues vanish
  CHECK(std::abs(ev.back()) < 1e-10);
}

TEST_CASE("sym_eigvals: asymmetric input throws") {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = 1.0;
  CHECK_THROWS_AS((void)sym_eigvals(m), std::invalid_argument);
}

TEST_CASE("logsumexp: exact small case and overflow safety") {
  Vector v(2);
  v << 1.0, 2.0;
  CHECK(logsumexp(v) ==
        doctest::Approx(std::log(std::exp(1.0) + std::exp(2.0))).epsilon(1e-14));
  Vector big(2);
  big << 1000.0, 1000.0;
  CHECK(logsumexp(big) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-14));
  Vector lop(2);
  lop << 0.0, -1e9;
  CHECK(logsumexp(lop) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("log_cosh: value, symmetry, large-argument asymptote") {
  CHECK(log_cosh(0.0) == 0.0);
  CHECK(log_cosh(1.5) == doctest::Approx(std::log(std::cosh(1.5))).epsilon(1e-14));
  CHECK(log_cosh(-3.2) == doctest::Approx(log_cosh(3.2)).epsilon(1e-14));
  // cosh(z) ~ e^|z|/2 for large |z|; naive evaluation would overflow at 1000.
  CHECK(log_cosh(1000.0) == doctest::Approx(1000.0 - std::log(2.0)).epsilon(1e-12));
}
