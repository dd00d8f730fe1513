// Copyright 2026 The sild-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sild/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace sild {

namespace {

// SplitMix64 finalizer; used only to derive sub-stream seeds.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  // Top 53 bits -> [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("Rng::uniform: lo must be < hi");
  return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::index: n must be positive");
  // Rejection-free modulo is fine here: n is always tiny versus 2^64, the
  // bias is < n/2^64 and irrelevant for Monte Carlo use.
  return engine_() % n;
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 in (0,1] avoids log(0).
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

Rng Rng::split(std::uint64_t key) const {
  return Rng(splitmix64(splitmix64(seed_) ^ splitmix64(key ^ 0xA0761D6478BD642Full)));
}

Matrix gauss_matrix(Rng& rng, Index rows, Index cols, double std_dev) {
  if (rows < 0 || cols < 0) {
    throw std::invalid_argument("gauss_matrix: negative shape");
  }
  if (std_dev < 0.0) {
    throw std::invalid_argument("gauss_matrix: negative std_dev");
  }
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      out(i, j) = std_dev * rng.gaussian();
    }
  }
  return out;
}

Matrix orthonormal_basis(Rng& rng, Index d, Index k) {
  if (k < 1 || k > d) {
    throw std::invalid_argument("orthonormal_basis: need 1 <= k <= d");
  }
  const Matrix G = gauss_matrix(rng, d, k, 1.0);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ() * Matrix::Identity(d, k);
  // Fix signs so diag(R) > 0: a Gaussian matrix is full rank a.s., and this
  // makes the basis a unique function of G.
  for (Index j = 0; j < k; ++j) {
    if (qr.matrixQR()(j, j) < 0.0) Q.col(j) = -Q.col(j);
  }
  const double ortho_err =
      (Q.transpose() * Q - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
  if (ortho_err > 1e-12) {
    throw std::runtime_error("orthonormal_basis: QR lost orthonormality");
  }
  return Q;
}

Matrix solve_spd(const Matrix& M, const Matrix& B) {
  if (M.rows() != M.cols()) {
    throw std::invalid_argument("solve_spd: M must be square");
  }
  if (B.rows() != M.rows()) {
    throw std::invalid_argument("solve_spd: shape mismatch");
  }
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("solve_spd: matrix is not positive definite");
  }
  return llt.solve(B);
}

std::vector<double> sym_eigvals(const Matrix& M) {
  if (M.rows() != M.cols()) {
    throw std::invalid_argument("sym_eigvals: M must be square");
  }
  const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) {
    throw std::invalid_argument("sym_eigvals: input not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("sym_eigvals: eigensolver failed");
  }
  const Vector ev = es.eigenvalues();  // ascending
  std::vector<double> out(static_cast<std::size_t>(ev.size()));
  for (Index i = 0; i < ev.size(); ++i) {
    out[static_cast<std::size_t>(i)] = ev(ev.size() - 1 - i);
  }
  return out;
}

double logsumexp(const Vector& v) {
  if (v.size() == 0) throw std::invalid_argument("logsumexp: empty input");
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf or a nan/inf propagates
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += std::exp(v(i) - m);
  return m + std::log(s);
}

double log_cosh(double z) {
  const double a = std::abs(z);
  // cosh z = e^|z| (1 + e^{-2|z|}) / 2; exact for large |z| where cosh
  // itself would overflow.
  return a + std::log1p(std::exp(-2.0 * a)) - M_LN2;
}

}  // namespace sild
