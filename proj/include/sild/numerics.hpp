// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic RNG and the small set of dense linear-algebra entry points
// the rest of the lab is allowed to use. Matrices are Eigen doubles; element
// order in every serialization and fill routine is fixed to row-major
// traversal so on-disk artifacts do not depend on Eigen's storage order.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace sild {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Counter-style splittable RNG. The uniform stream comes from mt19937_64
// (sequence pinned by the C++ standard); Gaussians use an explicit
// Box-Muller transform because std::normal_distribution is
// implementation-defined. split(key) is a pure function of the construction
// seed and the key — it does not consume or disturb this stream — so
// per-module and per-trajectory sub-streams are reproducible regardless of
// draw order elsewhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer on {0, ..., n-1}; n must be positive.
  std::uint64_t index(std::uint64_t n);
  // Standard normal.
  double gaussian();

  // Independent sub-stream derived from (seed, key); parent state untouched.
  Rng split(std::uint64_t key) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// rows x cols with i.i.d. N(0, std_dev^2) entries, filled in row-major
// element order from rng. std_dev = 0 gives the exact zero matrix.
Matrix gauss_matrix(Rng& rng, Index rows, Index cols, double std_dev);

// d x k with exactly orthonormal columns: QR of a Gaussian matrix, sign-fixed
// so diag(R) > 0 (makes the draw a deterministic function of the stream).
// Requires 1 <= k <= d.
Matrix orthonormal_basis(Rng& rng, Index d, Index k);

// Solves M X = B for symmetric positive definite M via Cholesky.
// Throws std::domain_error if a pivot fails (M not positive definite).
Matrix solve_spd(const Matrix& M, const Matrix& B);

// Eigenvalues of a symmetric matrix, descending. Throws
// std::invalid_argument if max |M - M^T| entry exceeds 1e-10.
std::vector<double> sym_eigvals(const Matrix& M);

// log(sum_i exp(v_i)) without overflow; -inf for empty input is not needed
// here so v must be non-empty.
double logsumexp(const Vector& v);

// log cosh(z), stable for large |z|.
double log_cosh(double z);

}  // namespace sild
