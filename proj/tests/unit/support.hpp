#pragma once

// Shared generators and brute-force oracles for the unit tests. Oracles here
// are written independently of the library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "uqc/operator.hpp"
#include "uqc/random.hpp"

namespace uqc::testing {

inline constexpr std::uint64_t kSeed = 0xC0FFEE;

/// Hand-rolled property driver: runs `body(rng, case_index)` for `cases`
/// independently seeded cases and tags failures with the case index.
template <class Body>
void for_all(std::size_t cases, std::uint64_t salt, Body&& body) {
  for (std::size_t c = 0; c < cases; ++c) {
    SCOPED_TRACE("property case " + std::to_string(c));
    Rng rng(derive_seed(kSeed ^ salt, c));
    body(rng, c);
  }
}

inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Explicit Kronecker product by the index formula, independent of Eigen's.
inline Matrix kron_oracle(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index k = 0; k < b.rows(); ++k)
        for (Eigen::Index l = 0; l < b.cols(); ++l)
          out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

inline Matrix embed_oracle(const Matrix& op, std::size_t d, std::size_t n, std::size_t site) {
  Matrix out = Matrix::Identity(1, 1);
  for (std::size_t s = 0; s < n; ++s)
    out = kron_oracle(out, s == site ? op : Matrix::Identity(d, d));
  return out;
}

inline double max_entry(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

/// Random projector of the given rank via QR of a Ginibre matrix.
inline Projector random_projector(std::size_t dim, std::size_t rank, Rng& rng) {
  if (rank == 0) return Projector::zero(dim);
  Eigen::HouseholderQR<Matrix> qr(ginibre(dim, rank, rng));
  return Projector::from_orthonormal_basis(qr.householderQ() * Matrix::Identity(dim, rank));
}

/// Random CPTP channel via a random isometry split into Kraus blocks.
inline std::vector<Matrix> random_kraus(std::size_t d, std::size_t count, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(ginibre(d * count, d, rng));
  const Matrix iso = qr.householderQ() * Matrix::Identity(d * count, d);
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(iso.middleRows(k * d, d));
  return out;
}

inline double binomial(std::size_t n, std::size_t k) {
  double out = 1.0;
  for (std::size_t j = 1; j <= k; ++j) out = out * static_cast<double>(n - k + j) / j;
  return out;
}

inline double h2(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1 - p) * std::log2(1 - p);
}

}  // namespace uqc::testing
