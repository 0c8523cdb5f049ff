#pragma once

// The two compression schemes. C1 keeps the projected part and sends the
// rejected weight to a flag vector in range(p); C2 postselects on p.
// Decompression is the identity on the compressed subspace.

#include <optional>
#include <vector>

#include "uqc/error.hpp"
#include "uqc/info_measures.hpp"
#include "uqc/operator.hpp"

namespace uqc {

/// Flag vector of C1: column 0 of p's range basis unless one is supplied,
/// in which case it must be a unit vector inside range(p).
inline Vector c1_flag_vector(const Projector& p, const std::optional<Vector>& flag = {}) {
  if (p.rank() == 0) throw ConfigError("C1 needs a projector with non-empty range");
  if (!flag) return p.basis().col(0);
  if (static_cast<std::size_t>(flag->size()) != p.dim())
    throw ConfigError("C1 flag vector has the wrong dimension");
  if (std::abs(flag->norm() - 1.0) > 1e-10) throw ConfigError("C1 flag vector is not unit norm");
  const double outside = p.apply_complement(*flag).norm();
  if (outside > 1e-8) throw ConfigError("C1 flag vector lies outside range(p)");
  return *flag;
}

/// {p} ∪ {|0⟩⟨i| : i in an orthonormal basis of range(I − p)}.
inline std::vector<Matrix> c1_kraus_operators(const Projector& p,
                                              const std::optional<Vector>& flag = {}) {
  const Vector zero = c1_flag_vector(p, flag);
  std::vector<Matrix> out{p.matrix()};
  const Matrix comp = p.complement_basis();
  for (Eigen::Index i = 0; i < comp.cols(); ++i) out.push_back(zero * comp.col(i).adjoint());
  return out;
}

struct C1Result {
  DensityOperator output;
  double entanglement_fidelity = 0.0;
  double accept_probability = 0.0;  ///< tr(pρ)
};

/// F_e of C1: tr(pρ)² + ‖(I − p) ρ |0⟩‖².
inline double c1_entanglement_fidelity(const Projector& p, const DensityOperator& rho,
                                       const std::optional<Vector>& flag = {}) {
  if (p.dim() != rho.dim()) throw ValidationError("C1: dimension mismatch");
  const Vector zero = c1_flag_vector(p, flag);
  const Matrix& b = p.basis();
  const double accept = (b.adjoint() * rho.matrix() * b).trace().real();
  const Vector image = rho.matrix() * zero;
  const double leak = p.apply_complement(image).squaredNorm();
  return accept * accept + leak;
}

/// Same quantity for ρ = diag(μ) without forming ρ.
inline double c1_entanglement_fidelity_diagonal(const Projector& p, std::span<const double> mu,
                                                const std::optional<Vector>& flag = {}) {
  if (p.dim() != mu.size()) throw ValidationError("C1: dimension mismatch");
  const Vector zero = c1_flag_vector(p, flag);
  const Eigen::VectorXd row_weight = p.basis().rowwise().squaredNorm();
  double accept = 0.0;
  Vector image(zero.size());
  for (std::size_t x = 0; x < mu.size(); ++x) {
    accept += mu[x] * row_weight(x);
    image(x) = mu[x] * zero(x);
  }
  return accept * accept + p.apply_complement(image).squaredNorm();
}

/// output = pρp + tr((I − p)ρ)|0⟩⟨0|
inline C1Result compress_c1(const Projector& p, const DensityOperator& rho,
                            const std::optional<Vector>& flag = {}) {
  if (p.dim() != rho.dim()) throw ValidationError("C1: dimension mismatch");
  const Vector zero = c1_flag_vector(p, flag);
  const Matrix& b = p.basis();
  const Matrix inner = b.adjoint() * rho.matrix() * b;
  const double accept = inner.trace().real();
  Matrix out = b * inner * b.adjoint();
  out += (1.0 - accept) * zero * zero.adjoint();
  const double leak = p.apply_complement(rho.matrix() * zero).squaredNorm();
  return {DensityOperator::trusted(std::move(out)), accept * accept + leak, accept};
}

/// pρp / tr(pρp); state-dependent postselection, not a linear map.
inline DensityOperator compress_c2(const Projector& p, const DensityOperator& rho) {
  if (p.dim() != rho.dim()) throw ValidationError("C2: dimension mismatch");
  const Matrix& b = p.basis();
  const Matrix inner = b.adjoint() * rho.matrix() * b;
  const double accept = inner.trace().real();
  if (accept <= 1e-12) throw ZeroOverlapError("C2: tr(pρp) is numerically zero");
  return DensityOperator::trusted(b * (inner / accept) * b.adjoint());
}

/// F_e of C2 with Kraus operator p/√tr(pρ): equals tr(pρ).
inline double c2_entanglement_fidelity(const Projector& p, const DensityOperator& rho) {
  const Matrix& b = p.basis();
  const double accept = (b.adjoint() * rho.matrix() * b).trace().real();
  if (accept <= 1e-12) throw ZeroOverlapError("C2: tr(pρp) is numerically zero");
  return accept;
}

}  // namespace uqc
