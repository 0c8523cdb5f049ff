#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "uqc/operator.hpp"

namespace uqc {

using Rng = std::mt19937_64;

/// splitmix64 finaliser; derives independent per-item seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Matrix of i.i.d. standard complex Gaussians (E|z|² = 1).
inline Matrix ginibre(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = Complex(normal(rng), normal(rng));
  return m;
}

inline Vector random_vector(std::size_t dim, Rng& rng) { return ginibre(dim, 1, rng).col(0); }

/// Haar-distributed unitary: QR of a Ginibre matrix with R's diagonal phases
/// moved into Q.
inline Matrix haar_unitary(std::size_t dim, Rng& rng) {
  const Matrix z = ginibre(dim, dim, rng);
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
  const Matrix& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    const Complex diag = r(j, j);
    const double mag = std::abs(diag);
    if (mag > 0.0) q.col(j) *= diag / mag;
  }
  return q;
}

inline Matrix random_hermitian(std::size_t dim, Rng& rng) {
  const Matrix g = ginibre(dim, dim, rng);
  return 0.5 * (g + g.adjoint());
}

/// Random full-rank mixed state (Hilbert-Schmidt measure).
inline DensityOperator random_density(std::size_t dim, Rng& rng) {
  const Matrix g = ginibre(dim, dim, rng);
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityOperator::from_matrix(std::move(rho));
}

inline Vector random_pure_vector(std::size_t dim, Rng& rng) {
  Vector v = random_vector(dim, rng);
  return v / v.norm();
}

inline DensityOperator random_pure_state(std::size_t dim, Rng& rng) {
  return DensityOperator::pure(random_pure_vector(dim, rng));
}

/// Uniformly random probability vector (flat Dirichlet).
inline std::vector<double> random_probability_vector(std::size_t size, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> out(size);
  double total = 0.0;
  for (auto& x : out) total += (x = expo(rng));
  for (auto& x : out) x /= total;
  return out;
}

}  // namespace uqc
