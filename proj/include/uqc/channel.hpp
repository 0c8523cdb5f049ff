#pragma once

#include <cmath>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "uqc/error.hpp"
#include "uqc/operator.hpp"

namespace uqc {

/// Single-site channel in operator-sum form ρ ↦ Σ A_i ρ A_i†.
class KrausChannel {
 public:
  /// Shape check only; use `validate_channel` or `checked` for TPCP.
  explicit KrausChannel(std::vector<Matrix> kraus, std::string name = "custom")
      : kraus_(std::move(kraus)), name_(std::move(name)) {
    if (kraus_.empty()) throw ValidationError("channel needs at least one Kraus operator");
    const auto d = kraus_.front().rows();
    for (const auto& k : kraus_)
      if (k.rows() != d || k.cols() != d || d == 0)
        throw ValidationError("Kraus operators must be square of equal size");
  }

  /// Constructs and rejects anything that is not trace preserving and CP.
  static KrausChannel checked(std::vector<Matrix> kraus, std::string name = "custom");

  static KrausChannel identity(std::size_t d) {
    return KrausChannel({Matrix::Identity(d, d)}, "identity");
  }

  /// {√(1−3p/4) I, √(p/4) X, √(p/4) Y, √(p/4) Z}; p = 1 is fully depolarizing.
  static KrausChannel depolarizing(double p) {
    if (p < 0.0 || p > 4.0 / 3.0) throw ValidationError("depolarizing parameter out of range");
    const auto [x, y, z] = paulis();
    return KrausChannel({std::sqrt(1.0 - 0.75 * p) * Matrix::Identity(2, 2),
                         std::sqrt(p / 4.0) * x, std::sqrt(p / 4.0) * y, std::sqrt(p / 4.0) * z},
                        "depolarizing");
  }

  /// {√(1−p/2) I, √(p/2) Z}: off-diagonals scale by 1−p.
  static KrausChannel dephasing(double p) {
    if (p < 0.0 || p > 1.0) throw ValidationError("dephasing parameter out of range");
    const Matrix z = std::get<2>(paulis());
    return KrausChannel(
        {std::sqrt(1.0 - p / 2.0) * Matrix::Identity(2, 2), std::sqrt(p / 2.0) * z},
        "dephasing");
  }

  static KrausChannel amplitude_damping(double gamma) {
    if (gamma < 0.0 || gamma > 1.0) throw ValidationError("damping parameter out of range");
    Matrix a0 = Matrix::Zero(2, 2), a1 = Matrix::Zero(2, 2);
    a0(0, 0) = 1.0;
    a0(1, 1) = std::sqrt(1.0 - gamma);
    a1(0, 1) = std::sqrt(gamma);
    return KrausChannel({a0, a1}, "amplitude_damping");
  }

  std::size_t dim() const { return static_cast<std::size_t>(kraus_.front().rows()); }
  const std::vector<Matrix>& kraus() const { return kraus_; }
  const std::string& name() const { return name_; }

  /// E(ρ) on a single site.
  Matrix apply(const Matrix& rho) const {
    Matrix out = Matrix::Zero(rho.rows(), rho.cols());
    for (const auto& a : kraus_) out.noalias() += a * rho * a.adjoint();
    return out;
  }

  /// E*(a) = Σ A_i† a A_i on a single site.
  Matrix dual(const Matrix& a) const {
    Matrix out = Matrix::Zero(a.rows(), a.cols());
    for (const auto& k : kraus_) out.noalias() += k.adjoint() * a * k;
    return out;
  }

  static std::tuple<Matrix, Matrix, Matrix> paulis() {
    Matrix x(2, 2), y(2, 2), z(2, 2);
    x << 0, 1, 1, 0;
    y << 0, Complex(0, -1), Complex(0, 1), 0;
    z << 1, 0, 0, -1;
    return {x, y, z};
  }

 private:
  std::vector<Matrix> kraus_;
  std::string name_;
};

struct ChannelReport {
  double completeness_deviation = 0.0;  ///< ‖Σ A†A − I‖∞
  double min_choi_eigenvalue = 0.0;
  bool valid() const {
    return completeness_deviation <= 1e-10 && min_choi_eigenvalue >= -tol::kEigenFloor;
  }
};

/// Choi matrix Σ_ij |i⟩⟨j| ⊗ E(|i⟩⟨j|).
inline Matrix choi_matrix(const KrausChannel& c) {
  const auto d = static_cast<Eigen::Index>(c.dim());
  Matrix choi = Matrix::Zero(d * d, d * d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      Matrix e = Matrix::Zero(d, d);
      e(i, j) = 1.0;
      choi.block(i * d, j * d, d, d) = c.apply(e);
    }
  return choi;
}

inline ChannelReport validate_channel(const KrausChannel& c) {
  ChannelReport r;
  const auto d = static_cast<Eigen::Index>(c.dim());
  Matrix sum = Matrix::Zero(d, d);
  for (const auto& a : c.kraus()) sum.noalias() += a.adjoint() * a;
  r.completeness_deviation = max_abs(sum - Matrix::Identity(d, d));
  Matrix choi = choi_matrix(c);
  choi = 0.5 * (choi + choi.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(choi, Eigen::EigenvaluesOnly);
  r.min_choi_eigenvalue = solver.eigenvalues().minCoeff();
  return r;
}

inline KrausChannel KrausChannel::checked(std::vector<Matrix> kraus, std::string name) {
  KrausChannel c(std::move(kraus), std::move(name));
  const auto r = validate_channel(c);
  if (!r.valid())
    throw ValidationError("not a trace-preserving CP map (completeness deviation " +
                          std::to_string(r.completeness_deviation) + ", min Choi eigenvalue " +
                          std::to_string(r.min_choi_eigenvalue) + ")");
  return c;
}

namespace detail {
inline std::size_t sites_of(const KrausChannel& c, Eigen::Index dim, std::size_t m) {
  const auto n = exact_log(static_cast<std::size_t>(dim), c.dim());
  if (!n || *n != m)
    throw ValidationError("operator dimension is not d^m for the channel's site dimension");
  return m;
}
}  // namespace detail

/// E^{⊗m}(ρ) as m sequential single-site applications. `order` optionally
/// permutes the sites visited; the result does not depend on it.
inline Matrix apply_tensor_power(const KrausChannel& c, const Matrix& rho, std::size_t m,
                                 std::span<const std::size_t> order = {}) {
  detail::sites_of(c, rho.rows(), m);
  checked_power(c.dim(), m);
  std::vector<std::size_t> sites(m);
  if (order.empty()) {
    for (std::size_t s = 0; s < m; ++s) sites[s] = s;
  } else {
    if (order.size() != m) throw ValidationError("site order has wrong length");
    sites.assign(order.begin(), order.end());
  }
  const auto& ks = c.kraus();
  if (ks.size() == 1 && ks.front().isIdentity(0.0)) return rho;
  Matrix cur = rho;
  for (auto site : sites) {
    Matrix acc = Matrix::Zero(cur.rows(), cur.cols());
    for (const auto& a : ks) {
      Matrix term = cur;
      apply_site_left(term, c.dim(), m, site, a);
      apply_site_right_adjoint(term, c.dim(), m, site, a);
      acc += term;
    }
    cur.swap(acc);
  }
  return cur;
}

inline DensityOperator apply_tensor_power(const KrausChannel& c, const DensityOperator& rho,
                                          std::size_t m) {
  return DensityOperator::trusted(apply_tensor_power(c, rho.matrix(), m));
}

/// ã = (E*)^{⊗m}(a), so tr(E^{⊗m}(ρ) a) = tr(ρ ã).
inline Matrix heisenberg_dual(const KrausChannel& c, const Matrix& a, std::size_t m) {
  detail::sites_of(c, a.rows(), m);
  checked_power(c.dim(), m);
  Matrix cur = a;
  for (std::size_t site = 0; site < m; ++site) {
    Matrix acc = Matrix::Zero(cur.rows(), cur.cols());
    for (const auto& k : c.kraus()) {
      const Matrix kd = k.adjoint();
      Matrix term = cur;
      apply_site_left(term, c.dim(), m, site, kd);
      apply_site_right_adjoint(term, c.dim(), m, site, kd);
      acc += term;
    }
    cur.swap(acc);
  }
  return cur;
}

}  // namespace uqc
