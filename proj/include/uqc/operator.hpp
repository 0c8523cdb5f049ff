#pragma once

// Dense complex-matrix substrate: tensor products, site-local operator
// application, Hermitian eigendecomposition with deterministic eigenvectors,
// partial traces, density operators and projectors.
//
// Site convention: site 0 is the leftmost tensor factor and the most
// significant digit of a basis index.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uqc/error.hpp"

namespace uqc {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

namespace tol {
inline constexpr double kHermitian = 1e-10;
inline constexpr double kEigenFloor = 1e-10;
inline constexpr double kTrace = 1e-10;
inline constexpr double kIdempotent = 1e-8;
inline constexpr double kRankTrace = 1e-6;
inline constexpr double kSpan = 1e-8;
inline constexpr double kDegenerate = 1e-9;
inline constexpr double kLeq = 1e-8;
}  // namespace tol

// ---------------------------------------------------------------------------
// dimension cap

namespace detail {
inline std::atomic<std::size_t>& dimension_cap_storage() {
  static std::atomic<std::size_t> cap{std::size_t{1} << 14};
  return cap;
}
}  // namespace detail

/// Largest Hilbert-space dimension any operation will materialise.
inline std::size_t dimension_cap() { return detail::dimension_cap_storage().load(); }
inline void set_dimension_cap(std::size_t cap) { detail::dimension_cap_storage().store(cap); }

/// base^exp, throwing SizeError once the result exceeds `cap`.
inline std::size_t checked_power(std::size_t base, std::size_t exp, std::size_t cap) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (base != 0 && out > cap / base)
      throw SizeError("dimension " + std::to_string(base) + "^" + std::to_string(exp) +
                      " exceeds cap " + std::to_string(cap));
    out *= base;
  }
  if (out > cap)
    throw SizeError("dimension " + std::to_string(out) + " exceeds cap " + std::to_string(cap));
  return out;
}

inline std::size_t checked_power(std::size_t base, std::size_t exp) {
  return checked_power(base, exp, dimension_cap());
}

// ---------------------------------------------------------------------------
// small helpers

/// Entrywise max-abs norm; this is the ‖·‖∞ used by every tolerance check.
template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().maxCoeff();
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline bool is_hermitian(const Matrix& a, double tolerance = tol::kHermitian) {
  if (a.rows() != a.cols()) return false;
  return max_abs(a - a.adjoint()) <= tolerance;
}

inline void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0)
    throw ValidationError(std::string(what) + ": expected a non-empty square matrix");
}

inline void require_hermitian(const Matrix& a, const char* what) {
  require_square(a, what);
  if (!all_finite(a)) throw ValidationError(std::string(what) + ": non-finite entry");
  if (!is_hermitian(a)) throw ValidationError(std::string(what) + ": matrix is not Hermitian");
}

/// Integer base-d logarithm of dim, or nullopt if dim is not a power of d.
inline std::optional<std::size_t> exact_log(std::size_t dim, std::size_t d) {
  if (d < 2) return dim == 1 ? std::optional<std::size_t>{0} : std::nullopt;
  std::size_t n = 0;
  while (dim > 1) {
    if (dim % d != 0) return std::nullopt;
    dim /= d;
    ++n;
  }
  return dim == 1 ? std::optional<std::size_t>{n} : std::nullopt;
}

inline Matrix ket_bra(const Vector& ket, const Vector& bra) { return ket * bra.adjoint(); }

inline Matrix basis_projector(std::size_t dim, std::size_t index) {
  Matrix m = Matrix::Zero(dim, dim);
  m(index, index) = 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// tensor products

/// Kronecker product a ⊗ b.
inline Matrix tensor_product(const Matrix& a, const Matrix& b) {
  const auto cap = dimension_cap();
  const auto rows = static_cast<std::size_t>(a.rows()) * static_cast<std::size_t>(b.rows());
  const auto cols = static_cast<std::size_t>(a.cols()) * static_cast<std::size_t>(b.cols());
  if (rows > cap || cols > cap)
    throw SizeError("tensor product dimension " + std::to_string(std::max(rows, cols)) +
                    " exceeds cap " + std::to_string(cap));
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Left fold a₀ ⊗ a₁ ⊗ … in a fixed evaluation order.
inline Matrix tensor_product(std::span<const Matrix> factors) {
  if (factors.empty()) return Matrix::Identity(1, 1);
  Matrix out = factors.front();
  for (std::size_t i = 1; i < factors.size(); ++i) out = tensor_product(out, factors[i]);
  return out;
}

inline Matrix tensor_power(const Matrix& a, std::size_t n) {
  Matrix out = Matrix::Identity(1, 1);
  for (std::size_t i = 0; i < n; ++i) out = tensor_product(out, a);
  return out;
}

// ---------------------------------------------------------------------------
// site-local operators on uniform tensor products (C^site_dim)^{⊗num_sites}

namespace detail {
inline void check_site_shape(Eigen::Index extent, std::size_t site_dim, std::size_t num_sites,
                             std::size_t site, const Matrix& op) {
  if (site >= num_sites) throw ValidationError("site index out of range");
  if (op.rows() != static_cast<Eigen::Index>(site_dim) ||
      op.cols() != static_cast<Eigen::Index>(site_dim))
    throw ValidationError("site operator has wrong shape");
  std::size_t total = 1;
  for (std::size_t i = 0; i < num_sites; ++i) total *= site_dim;
  if (static_cast<std::size_t>(extent) != total)
    throw ValidationError("operand dimension does not match site structure");
}
}  // namespace detail

/// m ← (I ⊗ … ⊗ op ⊗ … ⊗ I) m with op acting on `site`.
inline void apply_site_left(Matrix& m, std::size_t site_dim, std::size_t num_sites,
                            std::size_t site, const Matrix& op) {
  detail::check_site_shape(m.rows(), site_dim, num_sites, site, op);
  const Eigen::Index d = static_cast<Eigen::Index>(site_dim);
  Eigen::Index lo = 1;
  for (std::size_t i = site + 1; i < num_sites; ++i) lo *= d;
  const Eigen::Index hi = m.rows() / (lo * d);
  using Strided = Eigen::Map<Matrix, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
  Matrix tmp(d, m.cols());
  for (Eigen::Index h = 0; h < hi; ++h) {
    for (Eigen::Index l = 0; l < lo; ++l) {
      Strided block(m.data() + h * d * lo + l, d, m.cols(),
                    Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(m.rows(), lo));
      tmp.noalias() = op * block;
      block = tmp;
    }
  }
}

/// m ← m (I ⊗ … ⊗ op ⊗ … ⊗ I)† with op acting on `site`.
inline void apply_site_right_adjoint(Matrix& m, std::size_t site_dim, std::size_t num_sites,
                                     std::size_t site, const Matrix& op) {
  detail::check_site_shape(m.cols(), site_dim, num_sites, site, op);
  const Eigen::Index d = static_cast<Eigen::Index>(site_dim);
  Eigen::Index lo = 1;
  for (std::size_t i = site + 1; i < num_sites; ++i) lo *= d;
  const Eigen::Index hi = m.cols() / (lo * d);
  using Strided = Eigen::Map<Matrix, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
  const Matrix op_adj = op.adjoint();
  Matrix tmp(m.rows(), d);
  for (Eigen::Index h = 0; h < hi; ++h) {
    for (Eigen::Index l = 0; l < lo; ++l) {
      Strided block(m.data() + (h * d * lo + l) * m.rows(), m.rows(), d,
                    Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(lo * m.rows(), 1));
      tmp.noalias() = block * op_adj;
      block = tmp;
    }
  }
}

/// op^{⊗num_sites} applied to the columns of m, one site at a time.
inline void apply_tensor_power_left(Matrix& m, std::size_t site_dim, std::size_t num_sites,
                                    const Matrix& op) {
  for (std::size_t s = 0; s < num_sites; ++s) apply_site_left(m, site_dim, num_sites, s, op);
}

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition

struct EigenSystem {
  RealVector values;  ///< descending
  Matrix vectors;     ///< orthonormal columns matching `values`
};

namespace detail {

inline void fix_phase(Eigen::Ref<Vector> v) {
  const double peak = v.cwiseAbs().maxCoeff();
  if (peak == 0.0) return;
  Eigen::Index pivot = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) >= peak - 1e-12) {
      pivot = i;
      break;
    }
  }
  v *= std::conj(v(pivot)) / std::abs(v(pivot));
}

// Replaces the columns of `cluster` (an orthonormal basis of a degenerate
// eigenspace) by the Gram-Schmidt orthonormalisation of the projected
// computational basis vectors, taken in index order.
inline Matrix canonical_cluster_basis(const Matrix& cluster) {
  const Eigen::Index k = cluster.cols();
  const Eigen::Index dim = cluster.rows();
  const Matrix coeffs = cluster.adjoint();  // column j = V† e_j
  Matrix q(k, k);
  Eigen::Index found = 0;
  for (Eigen::Index j = 0; j < dim && found < k; ++j) {
    Vector v = coeffs.col(j);
    for (int pass = 0; pass < 2 && found > 0; ++pass)
      v -= q.leftCols(found) * (q.leftCols(found).adjoint() * v);
    const double norm = v.norm();
    if (norm > 1e-7) q.col(found++) = v / norm;
  }
  if (found < k) throw ValidationError("degenerate eigenspace canonicalisation failed");
  return cluster * q;
}

}  // namespace detail

/// Eigenvalues only, descending.
inline RealVector hermitian_eigenvalues(const Matrix& a) {
  require_hermitian(a, "hermitian_eigenvalues");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NonConvergenceError("eigenvalue solver failed");
  return solver.eigenvalues().reverse();
}

/// Full eigendecomposition with deterministic eigenvectors: eigenvalues
/// descending, degenerate clusters (adjacent gap < 1e-9) canonicalised
/// against the computational basis, each vector phase-fixed so its first
/// largest-magnitude component is real positive.
inline EigenSystem hermitian_eig(const Matrix& a) {
  require_hermitian(a, "hermitian_eig");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw NonConvergenceError("eigen solver failed");
  EigenSystem out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  const Eigen::Index n = out.values.size();
  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index end = start + 1;
    while (end < n && out.values(end - 1) - out.values(end) < tol::kDegenerate) ++end;
    if (end - start > 1)
      out.vectors.middleCols(start, end - start) =
          detail::canonical_cluster_basis(out.vectors.middleCols(start, end - start));
    start = end;
  }
  for (Eigen::Index j = 0; j < n; ++j) detail::fix_phase(out.vectors.col(j));
  return out;
}

// ---------------------------------------------------------------------------
// partial trace

/// Traces out `traced_sites` of an operator on ⊗ C^{site_dims[i]}.
inline Matrix partial_trace(const Matrix& a, std::span<const std::size_t> site_dims,
                            std::span<const std::size_t> traced_sites) {
  require_square(a, "partial_trace");
  const std::size_t sites = site_dims.size();
  std::size_t total = 1;
  for (auto d : site_dims) total *= d;
  if (total != static_cast<std::size_t>(a.rows()))
    throw ValidationError("partial_trace: site dimensions do not match operator");
  std::vector<bool> traced(sites, false);
  for (auto s : traced_sites) {
    if (s >= sites) throw ValidationError("partial_trace: site index out of range");
    traced[s] = true;
  }
  std::size_t kept_dim = 1, traced_dim = 1;
  for (std::size_t s = 0; s < sites; ++s) (traced[s] ? traced_dim : kept_dim) *= site_dims[s];

  // Split every full index into (kept index, traced index).
  std::vector<std::size_t> kept_of(total), traced_of(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx, k = 0, t = 0, kmul = 1, tmul = 1;
    for (std::size_t s = sites; s-- > 0;) {
      const std::size_t digit = rest % site_dims[s];
      rest /= site_dims[s];
      if (traced[s]) {
        t += digit * tmul;
        tmul *= site_dims[s];
      } else {
        k += digit * kmul;
        kmul *= site_dims[s];
      }
    }
    kept_of[idx] = k;
    traced_of[idx] = t;
  }
  std::vector<std::vector<std::size_t>> groups(traced_dim);
  for (std::size_t idx = 0; idx < total; ++idx) groups[traced_of[idx]].push_back(idx);

  Matrix out = Matrix::Zero(kept_dim, kept_dim);
  for (const auto& group : groups)
    for (auto i : group)
      for (auto j : group) out(kept_of[i], kept_of[j]) += a(i, j);
  return out;
}

/// Uniform-site convenience overload.
inline Matrix partial_trace(const Matrix& a, std::size_t site_dim, std::size_t num_sites,
                            std::span<const std::size_t> traced_sites) {
  std::vector<std::size_t> dims(num_sites, site_dim);
  return partial_trace(a, dims, traced_sites);
}

// ---------------------------------------------------------------------------
// density operators

struct DensityReport {
  double hermitian_deviation = 0.0;
  double min_eigenvalue = 0.0;
  double trace_deviation = 0.0;
  bool valid = false;
};

inline DensityReport validate_density(const Matrix& m) {
  DensityReport r;
  if (m.rows() != m.cols() || m.rows() == 0 || !all_finite(m)) return r;
  r.hermitian_deviation = max_abs(m - m.adjoint());
  r.trace_deviation = std::abs(m.trace() - Complex(1.0, 0.0));
  const Matrix herm = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(herm, Eigen::EigenvaluesOnly);
  r.min_eigenvalue = solver.eigenvalues().minCoeff();
  r.valid = r.hermitian_deviation <= tol::kHermitian && r.min_eigenvalue >= -tol::kEigenFloor &&
            r.trace_deviation <= tol::kTrace;
  return r;
}

/// Hermitian, positive semidefinite, unit-trace operator.
class DensityOperator {
 public:
  /// Fully validated construction (eigenvalue check included).
  static DensityOperator from_matrix(Matrix m) {
    const auto report = validate_density(m);
    if (!report.valid)
      throw ValidationError("not a density operator (hermitian dev " +
                            std::to_string(report.hermitian_deviation) + ", min eig " +
                            std::to_string(report.min_eigenvalue) + ", trace dev " +
                            std::to_string(report.trace_deviation) + ")");
    return DensityOperator(std::move(m));
  }

  /// For operators produced by valid-by-construction maps. Only the cheap
  /// Hermiticity and trace checks run; `validate_density` asserts the rest.
  static DensityOperator trusted(Matrix m) {
    require_square(m, "DensityOperator");
    if (!is_hermitian(m, 1e-9) || std::abs(m.trace() - Complex(1.0, 0.0)) > 1e-9)
      throw ValidationError("DensityOperator::trusted: Hermiticity or trace violated");
    return DensityOperator(std::move(m));
  }

  static DensityOperator pure(const Vector& psi) {
    const double n = psi.norm();
    if (n == 0.0) throw ValidationError("pure state from zero vector");
    const Vector u = psi / n;
    return DensityOperator(u * u.adjoint());
  }

  static DensityOperator maximally_mixed(std::size_t dim) {
    return DensityOperator(Matrix::Identity(dim, dim) / static_cast<double>(dim));
  }

  static DensityOperator diagonal(std::span<const double> probs) {
    Matrix m = Matrix::Zero(probs.size(), probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) m(i, i) = probs[i];
    return from_matrix(std::move(m));
  }

  std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }
  const Matrix& matrix() const { return matrix_; }

  bool is_diagonal(double tolerance = 0.0) const {
    Matrix off = matrix_;
    off.diagonal().setZero();
    return max_abs(off) <= tolerance;
  }

 private:
  explicit DensityOperator(Matrix m) : matrix_(std::move(m)) {
    matrix_ = 0.5 * (matrix_ + matrix_.adjoint()).eval();
  }
  Matrix matrix_;
};

inline Complex trace_product(const Matrix& a, const Matrix& b) {
  // tr(a b) without forming the product
  return (a.transpose().cwiseProduct(b)).sum();
}

// ---------------------------------------------------------------------------
// projectors

/// Orthogonal projector, stored through an orthonormal basis of its range.
class Projector {
 public:
  static Projector zero(std::size_t dim) { return Projector(dim, Matrix(dim, 0)); }
  static Projector identity(std::size_t dim) {
    return Projector(dim, Matrix::Identity(dim, dim));
  }

  /// Columns must already be orthonormal (to 1e-8).
  static Projector from_orthonormal_basis(Matrix basis) {
    const auto r = basis.cols();
    if (r > 0) {
      const double dev = max_abs(basis.adjoint() * basis - Matrix::Identity(r, r));
      if (dev > tol::kIdempotent)
        throw ValidationError("projector basis is not orthonormal (deviation " +
                              std::to_string(dev) + ")");
    }
    const auto dim = static_cast<std::size_t>(basis.rows());
    return Projector(dim, std::move(basis));
  }

  /// Projector onto span(columns of `vectors`), rank decided by singular
  /// values above 1e-8 relative to the largest.
  static Projector span_of(const Matrix& vectors) {
    const auto dim = static_cast<std::size_t>(vectors.rows());
    if (vectors.cols() == 0) return zero(dim);
    Eigen::JacobiSVD<Matrix> svd(vectors, Eigen::ComputeThinU);
    const RealVector& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return zero(dim);
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > tol::kSpan * s(0)) ++rank;
    return Projector(dim, svd.matrixU().leftCols(rank));
  }

  /// Validates the projector invariants on an explicit matrix.
  static Projector from_matrix(const Matrix& m) {
    require_hermitian(m, "Projector");
    const double idem = max_abs(m * m - m);
    if (idem > tol::kIdempotent)
      throw ValidationError("projector is not idempotent (deviation " + std::to_string(idem) +
                            ")");
    const double tr = m.trace().real();
    if (std::abs(tr - std::round(tr)) > tol::kRankTrace || tr < -tol::kRankTrace)
      throw ValidationError("projector trace is not a nonnegative integer");
    const auto es = hermitian_eig(m);
    Eigen::Index rank = 0;
    while (rank < es.values.size() && es.values(rank) > 0.5) ++rank;
    return Projector(static_cast<std::size_t>(m.rows()), es.vectors.leftCols(rank));
  }

  std::size_t dim() const { return dim_; }
  std::size_t rank() const { return static_cast<std::size_t>(basis_.cols()); }
  double trace() const { return basis_.squaredNorm(); }
  const Matrix& basis() const { return basis_; }
  Matrix matrix() const {
    if (basis_.cols() == 0) return Matrix::Zero(dim_, dim_);
    return basis_ * basis_.adjoint();
  }

  /// P x
  Matrix apply(const Matrix& x) const {
    if (basis_.cols() == 0) return Matrix::Zero(x.rows(), x.cols());
    return basis_ * (basis_.adjoint() * x);
  }

  /// (I − P) x
  Matrix apply_complement(const Matrix& x) const { return x - apply(x); }

  /// Orthonormal basis of the orthogonal complement of the range.
  Matrix complement_basis() const {
    const auto dim = static_cast<Eigen::Index>(dim_);
    if (basis_.cols() == 0) return Matrix::Identity(dim, dim);
    Eigen::HouseholderQR<Matrix> qr(basis_);
    const Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
    return q.rightCols(dim - basis_.cols());
  }

 private:
  Projector(std::size_t dim, Matrix basis) : dim_(dim), basis_(std::move(basis)) {}
  std::size_t dim_;
  Matrix basis_;
};

struct ProjectorReport {
  double hermitian_deviation = 0.0;
  double idempotence_deviation = 0.0;
  double trace_integrality = 0.0;
  bool valid = false;
};

inline ProjectorReport validate_projector(const Matrix& m) {
  ProjectorReport r;
  if (m.rows() != m.cols() || m.rows() == 0 || !all_finite(m)) return r;
  r.hermitian_deviation = max_abs(m - m.adjoint());
  r.idempotence_deviation = max_abs(m * m - m);
  const double tr = m.trace().real();
  r.trace_integrality = std::abs(tr - std::round(tr));
  r.valid = r.hermitian_deviation <= tol::kHermitian &&
            r.idempotence_deviation <= tol::kIdempotent && r.trace_integrality <= tol::kRankTrace &&
            tr > -tol::kRankTrace;
  return r;
}

/// Smallest projector dominating every input (span closure of the ranges).
inline Projector projector_join(std::span<const Projector> ps, std::size_t dim) {
  Eigen::Index total = 0;
  for (const auto& p : ps) {
    if (p.dim() != dim) throw ValidationError("projector_join: dimension mismatch");
    total += static_cast<Eigen::Index>(p.rank());
  }
  Matrix stacked(dim, total);
  Eigen::Index col = 0;
  for (const auto& p : ps) {
    stacked.middleCols(col, p.rank()) = p.basis();
    col += static_cast<Eigen::Index>(p.rank());
  }
  return Projector::span_of(stacked);
}

inline Projector projector_join(std::span<const Projector> ps) {
  if (ps.empty())
    throw ValidationError("projector_join: empty list needs an explicit dimension");
  return projector_join(ps, ps.front().dim());
}

/// max-abs entry of (I − q) p, evaluated in row blocks to bound memory.
inline double leq_residual(const Projector& p, const Projector& q) {
  if (p.dim() != q.dim()) throw ValidationError("projector_leq: dimension mismatch");
  if (p.rank() == 0) return 0.0;
  const Matrix residual = q.apply_complement(p.basis());  // (I − q) B_p
  const Matrix bp_adj = p.basis().adjoint();
  double worst = 0.0;
  constexpr Eigen::Index kBlock = 512;
  for (Eigen::Index r = 0; r < residual.rows(); r += kBlock) {
    const Eigen::Index rows = std::min(kBlock, residual.rows() - r);
    worst = std::max(worst, max_abs(residual.middleRows(r, rows) * bp_adj));
  }
  return worst;
}

/// p ≤ q in the projector order: ‖(I − q) p‖∞ ≤ tolerance.
inline bool projector_leq(const Projector& p, const Projector& q,
                          double tolerance = tol::kLeq) {
  return leq_residual(p, q) <= tolerance;
}

}  // namespace uqc
