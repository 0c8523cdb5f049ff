#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "uqc/channel.hpp"
#include "uqc/classical_process.hpp"
#include "uqc/operator.hpp"
#include "uqc/quantum_source.hpp"

namespace uqc {

/// −Σ λ log₂ λ, with eigenvalues inside the −1e-10 floor clamped to zero.
inline double von_neumann_entropy(const DensityOperator& rho) {
  const RealVector ev = hermitian_eigenvalues(rho.matrix());
  double s = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double l = ev(i);
    if (l > 0.0) s -= l * std::log2(l);
  }
  return s;
}

struct EntropyRateEstimate {
  std::vector<std::pair<std::size_t, double>> values;  ///< (n, S(ρ_n)/n)
  double extrapolated = 0.0;  ///< S(ρ_n) − S(ρ_{n−1}) at the largest n, else S/n
  std::optional<double> analytic;
};

/// Exact mean entropy when the source admits a closed form.
inline std::optional<double> analytic_mean_entropy(const QuantumSource& s) {
  if (const auto* iid = s.as<IidSource>()) return von_neumann_entropy(iid->rho);
  if (const auto* cls = s.as<ClassicalSource>()) {
    if (!cls->alphabet.is_orthonormal()) return std::nullopt;
    try {
      const auto h = entropy_rate(cls->process);
      if (h.non_ergodic) return std::nullopt;
      return h.bits;
    } catch (const ValidationError&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

inline EntropyRateEstimate mean_entropy(const QuantumSource& s, std::span<const std::size_t> ns) {
  EntropyRateEstimate out;
  out.analytic = analytic_mean_entropy(s);
  std::size_t top = 0;
  for (auto n : ns) {
    if (n == 0) throw ValidationError("mean_entropy: n must be positive");
    const double sn = von_neumann_entropy(source_marginal(s, n));
    out.values.emplace_back(n, sn / static_cast<double>(n));
    top = std::max(top, n);
  }
  if (top == 0) return out;
  const double s_top = von_neumann_entropy(source_marginal(s, top));
  if (top >= 2) {
    out.extrapolated = s_top - von_neumann_entropy(source_marginal(s, top - 1));
  } else {
    out.extrapolated = s_top;
  }
  return out;
}

/// s(ψ, N): the mean entropy of the source read in N-site blocks, estimated
/// as S(ρ_{N·n}) / n.
inline double n_shift_mean_entropy(const QuantumSource& s, std::size_t N, std::size_t n) {
  return von_neumann_entropy(source_marginal(s, N * n)) / static_cast<double>(n);
}

/// Positive square root of a PSD matrix (negative drift clamped).
inline Matrix psd_sqrt(const Matrix& a) {
  const Matrix h = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  RealVector ev = solver.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::sqrt(std::max(0.0, ev(i)));
  return solver.eigenvectors() * ev.cast<Complex>().asDiagonal() *
         solver.eigenvectors().adjoint();
}

/// tr √(φ^{1/2} σ φ^{1/2}).
inline double fidelity(const DensityOperator& phi, const DensityOperator& sigma) {
  if (phi.dim() != sigma.dim()) throw ValidationError("fidelity: dimension mismatch");
  const Matrix root = psd_sqrt(phi.matrix());
  const Matrix inner = root * sigma.matrix() * root;
  const Matrix h = 0.5 * (inner + inner.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
  double f = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i)
    f += std::sqrt(std::max(0.0, solver.eigenvalues()(i)));
  return std::min(1.0, f);
}

/// Channel on the full space given as a Kraus list (not necessarily a tensor
/// power).
inline Matrix apply_kraus(std::span<const Matrix> kraus, const Matrix& rho) {
  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  for (const auto& a : kraus) out.noalias() += a * rho * a.adjoint();
  return out;
}

/// Intrinsic form Σ_i |tr(A_i ρ)|².
inline double entanglement_fidelity(const DensityOperator& rho, std::span<const Matrix> kraus) {
  double f = 0.0;
  for (const auto& a : kraus) {
    if (static_cast<std::size_t>(a.rows()) != rho.dim() || a.cols() != a.rows())
      throw ValidationError("entanglement_fidelity: Kraus operator dimension mismatch");
    f += std::norm(trace_product(a, rho.matrix()));
  }
  return f;
}

inline double entanglement_fidelity(const DensityOperator& rho, const KrausChannel& c) {
  return entanglement_fidelity(rho, std::span<const Matrix>(c.kraus()));
}

/// |Θ⟩ = Σ_k √λ_k |k⟩_R ⊗ |e_k⟩, reference factor first.
inline Vector purification(const DensityOperator& rho) {
  const auto es = hermitian_eig(rho.matrix());
  const auto d = static_cast<Eigen::Index>(rho.dim());
  Vector theta = Vector::Zero(d * d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double w = std::sqrt(std::max(0.0, es.values(k)));
    theta.segment(k * d, d) = w * es.vectors.col(k);
  }
  return theta;
}

/// ⟨Θ| (id_R ⊗ E)(|Θ⟩⟨Θ|) |Θ⟩ through an explicit purification.
inline double entanglement_fidelity_purification(const DensityOperator& rho,
                                                 std::span<const Matrix> kraus) {
  const Vector theta = purification(rho);
  const auto d = static_cast<Eigen::Index>(rho.dim());
  const Matrix id = Matrix::Identity(d, d);
  Matrix out = Matrix::Zero(d * d, d * d);
  for (const auto& a : kraus) {
    if (a.rows() != d || a.cols() != d)
      throw ValidationError("entanglement_fidelity: Kraus operator dimension mismatch");
    const Vector v = tensor_product(id, a) * theta;
    out.noalias() += v * v.adjoint();
  }
  const double fe = theta.dot(out * theta).real();
  return fe;
}

inline double entanglement_fidelity_purification(const DensityOperator& rho,
                                                 const KrausChannel& c) {
  return entanglement_fidelity_purification(rho, std::span<const Matrix>(c.kraus()));
}

/// (1/n) log₂ dim
inline double compression_rate(std::size_t n, double compressed_dim) {
  if (n == 0) throw ValidationError("compression_rate: n must be positive");
  if (compressed_dim < 1.0) throw ValidationError("compression_rate: dimension must be ≥ 1");
  return std::log2(compressed_dim) / static_cast<double>(n);
}

}  // namespace uqc
