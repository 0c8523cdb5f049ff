#pragma once

// Quantum sources as consistent marginal families {ρ_n}, operator-form
// consistency / stationarity / ergodicity diagnostics, pinching, and the
// restriction of a source to a classical measure in a fixed eigenbasis.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "uqc/channel.hpp"
#include "uqc/classical_process.hpp"
#include "uqc/error.hpp"
#include "uqc/operator.hpp"
#include "uqc/random.hpp"

namespace uqc {

inline constexpr double kAlphabetConditionLimit = 1e8;

/// d linearly independent unit vectors of C^d, stored as the columns of A.
class QuantumAlphabet {
 public:
  static QuantumAlphabet from_columns(Matrix vectors) {
    if (vectors.rows() == 0 || vectors.rows() != vectors.cols())
      throw ValidationError("quantum alphabet needs d vectors in C^d");
    if (!vectors.allFinite()) throw ValidationError("quantum alphabet has non-finite entries");
    for (Eigen::Index j = 0; j < vectors.cols(); ++j)
      if (std::abs(vectors.col(j).norm() - 1.0) > 1e-12)
        throw ValidationError("quantum alphabet vector " + std::to_string(j) +
                              " is not unit norm");
    const Matrix gram = vectors.adjoint() * vectors;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
    const double lo = solver.eigenvalues().minCoeff();
    const double hi = solver.eigenvalues().maxCoeff();
    const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(cond <= kAlphabetConditionLimit))
      throw ValidationError("quantum alphabet Gram matrix is ill-conditioned (condition number " +
                            std::to_string(cond) + ")");
    return QuantumAlphabet(std::move(vectors));
  }

  static QuantumAlphabet computational(std::size_t d) {
    return QuantumAlphabet(Matrix::Identity(d, d));
  }

  std::size_t dim() const { return static_cast<std::size_t>(vectors_.rows()); }
  const Matrix& vectors() const { return vectors_; }
  bool is_computational() const { return vectors_.isIdentity(0.0); }
  bool is_orthonormal(double tolerance = 1e-12) const {
    return max_abs(vectors_.adjoint() * vectors_ - Matrix::Identity(dim(), dim())) <= tolerance;
  }

 private:
  explicit QuantumAlphabet(Matrix v) : vectors_(std::move(v)) {}
  Matrix vectors_;
};

class QuantumSource;

struct IidSource {
  DensityOperator rho;
};

struct ClassicalSource {
  ClassicalProcess process;
  QuantumAlphabet alphabet;
};

struct ChannelSource {
  std::shared_ptr<const QuantumSource> inner;
  KrausChannel channel;
};

class QuantumSource {
 public:
  using Kind = std::variant<IidSource, ClassicalSource, ChannelSource>;

  static QuantumSource iid(DensityOperator rho) {
    const auto d = rho.dim();
    return QuantumSource(d, IidSource{std::move(rho)});
  }

  static QuantumSource classical(ClassicalProcess process, QuantumAlphabet alphabet) {
    if (process.alphabet_size() != alphabet.dim())
      throw ValidationError("process alphabet size must equal the number of alphabet vectors");
    const auto d = alphabet.dim();
    return QuantumSource(d, ClassicalSource{std::move(process), std::move(alphabet)});
  }

  static QuantumSource transformed(QuantumSource inner, KrausChannel channel) {
    if (channel.dim() != inner.dim())
      throw ValidationError("channel site dimension differs from the source");
    const auto d = inner.dim();
    return QuantumSource(
        d, ChannelSource{std::make_shared<const QuantumSource>(std::move(inner)),
                         std::move(channel)});
  }

  std::size_t dim() const { return d_; }
  const Kind& kind() const { return kind_; }
  template <class T>
  const T* as() const {
    return std::get_if<T>(&kind_);
  }
  std::string kind_name() const {
    static const char* names[] = {"iid", "classical", "channel"};
    return names[kind_.index()];
  }

  /// True when every marginal is diagonal in the computational basis.
  bool is_diagonal() const {
    if (const auto* s = as<IidSource>()) return s->rho.is_diagonal();
    if (const auto* s = as<ClassicalSource>()) return s->alphabet.is_computational();
    return false;
  }

 private:
  QuantumSource(std::size_t d, Kind kind) : d_(d), kind_(std::move(kind)) {}
  std::size_t d_;
  Kind kind_;
};

// ---------------------------------------------------------------------------
// marginals

/// A^{⊗n} X A^{⊗n}† for a site operator A.
inline Matrix conjugate_tensor_power(Matrix x, const Matrix& a, std::size_t n) {
  const auto d = static_cast<std::size_t>(a.rows());
  for (std::size_t s = 0; s < n; ++s) apply_site_left(x, d, n, s, a);
  for (std::size_t s = 0; s < n; ++s) apply_site_right_adjoint(x, d, n, s, a);
  return x;
}

inline Matrix source_marginal_matrix(const QuantumSource& s, std::size_t n) {
  const std::size_t dim = checked_power(s.dim(), n);
  if (const auto* iid = s.as<IidSource>()) return tensor_power(iid->rho.matrix(), n);
  if (const auto* cls = s.as<ClassicalSource>()) {
    const auto mu = marginal(cls->process, n, true);
    Matrix x = Matrix::Zero(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) x(i, i) = mu.values()[i];
    if (cls->alphabet.is_computational()) return x;
    return conjugate_tensor_power(std::move(x), cls->alphabet.vectors(), n);
  }
  const auto& ch = *s.as<ChannelSource>();
  return apply_tensor_power(ch.channel, source_marginal_matrix(*ch.inner, n), n);
}

/// ρ_n of the source.
inline DensityOperator source_marginal(const QuantumSource& s, std::size_t n) {
  if (n == 0) throw ValidationError("marginal length must be positive");
  return DensityOperator::trusted(source_marginal_matrix(s, n));
}

/// Diagonal of ρ_n for sources diagonal in the computational basis, without
/// forming the matrix.
inline std::vector<double> diagonal_marginal(const QuantumSource& s, std::size_t n) {
  if (!s.is_diagonal()) throw ValidationError("diagonal_marginal: source is not diagonal");
  if (const auto* iid = s.as<IidSource>()) {
    std::vector<double> probs(s.dim());
    double total = 0.0;
    for (std::size_t i = 0; i < s.dim(); ++i)
      total += probs[i] = std::max(0.0, iid->rho.matrix()(i, i).real());
    for (auto& x : probs) x /= total;
    return marginal(ClassicalProcess::iid(std::move(probs)), n, true).values();
  }
  return marginal(s.as<ClassicalSource>()->process, n, true).values();
}

/// Thread-safe memo of ρ_n. Readers share the lock; a miss computes outside
/// the lock and the first writer wins.
class MarginalCache {
 public:
  explicit MarginalCache(QuantumSource source) : source_(std::move(source)) {}

  std::shared_ptr<const DensityOperator> get(std::size_t n) const {
    {
      std::shared_lock lock(mutex_);
      if (auto it = cache_.find(n); it != cache_.end()) return it->second;
    }
    auto fresh = std::make_shared<const DensityOperator>(source_marginal(source_, n));
    std::unique_lock lock(mutex_);
    return cache_.emplace(n, std::move(fresh)).first->second;
  }

  const QuantumSource& source() const { return source_; }

 private:
  QuantumSource source_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::size_t, std::shared_ptr<const DensityOperator>> cache_;
};

// ---------------------------------------------------------------------------
// consistency and stationarity

using MarginalFamily = std::function<Matrix(std::size_t)>;

namespace detail {

inline double operator_form_deviation(const MarginalFamily& family, std::size_t d, std::size_t m,
                                      std::size_t i, std::size_t trials, std::uint64_t seed,
                                      bool drop_first) {
  const Matrix small = family(m);
  const Matrix big = family(m + i);
  std::vector<std::size_t> traced(i);
  for (std::size_t u = 0; u < i; ++u) traced[u] = drop_first ? u : m + u;
  // tr(ρ_{m+i} (a ⊗ I)) = tr(tr_rest(ρ_{m+i}) a)
  const Matrix reduced = partial_trace(big, d, m + i, traced);
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const Matrix a = random_hermitian(small.rows(), rng);
    const double scale = max_abs(a);
    const Complex lhs = trace_product(small, a);
    const Complex rhs = trace_product(reduced, a);
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

}  // namespace detail

/// max over random Hermitian a of |tr(ρ_m a) − tr(ρ_{m+i}(a ⊗ I^{⊗i}))| / ‖a‖∞
inline double check_consistency(const MarginalFamily& family, std::size_t d, std::size_t m,
                                std::size_t i, std::size_t trials, std::uint64_t seed = 1) {
  return detail::operator_form_deviation(family, d, m, i, trials, seed, false);
}

/// max over random Hermitian a of |tr(ρ_m a) − tr(ρ_{m+i}(I^{⊗i} ⊗ a))| / ‖a‖∞
inline double check_stationarity(const MarginalFamily& family, std::size_t d, std::size_t m,
                                 std::size_t i, std::size_t trials, std::uint64_t seed = 1) {
  return detail::operator_form_deviation(family, d, m, i, trials, seed, true);
}

inline MarginalFamily family_of(const QuantumSource& s) {
  return [s](std::size_t n) { return source_marginal_matrix(s, n); };
}

inline double check_consistency(const QuantumSource& s, std::size_t m, std::size_t i,
                                std::size_t trials, std::uint64_t seed = 1) {
  return check_consistency(family_of(s), s.dim(), m, i, trials, seed);
}

inline double check_stationarity(const QuantumSource& s, std::size_t m, std::size_t i,
                                 std::size_t trials, std::uint64_t seed = 1) {
  return check_stationarity(family_of(s), s.dim(), m, i, trials, seed);
}

// ---------------------------------------------------------------------------
// ergodicity diagnostics

struct ErgodicityGap {
  std::size_t m = 0;
  std::size_t N = 0;
  double cesaro = 0.0;       ///< (1/(N−m+1)) Σ_{i=m}^{N} tr(ρ_{m+i}(a ⊗ I ⊗ b))
  double product = 0.0;      ///< tr(ρ_m a) tr(ρ_m b)
  double weak_mixing = 0.0;  ///< (1/(N−m+1)) Σ |term_i − product|
  double tail = 0.0;         ///< |term_N − product|
  double slope = 0.0;        ///< log-log slope of |cesaro − product| over N/8..N
  bool slope_defined = false;
  std::vector<double> terms;  ///< term_i for i = m..N

  double gap() const { return std::abs(cesaro - product); }
};

namespace detail {

inline ErgodicityGap summarize_terms(std::vector<double> terms, double product, std::size_t m,
                                     std::size_t N) {
  ErgodicityGap g;
  g.m = m;
  g.N = N;
  g.product = product;
  std::vector<double> prefix(terms.size() + 1, 0.0);
  double weak = 0.0;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    prefix[j + 1] = prefix[j] + terms[j];
    weak += std::abs(terms[j] - product);
  }
  const double count = static_cast<double>(terms.size());
  g.cesaro = prefix.back() / count;
  g.weak_mixing = weak / count;
  g.tail = std::abs(terms.back() - product);
  std::vector<double> xs, ys;
  for (std::size_t div : {8, 4, 2, 1}) {
    const std::size_t n_point = N / div;
    if (n_point < m) continue;
    const std::size_t len = n_point - m + 1;
    const double gap = std::abs(prefix[len] / static_cast<double>(len) - product);
    if (gap > 1e-300) {
      xs.push_back(std::log(static_cast<double>(n_point)));
      ys.push_back(std::log(gap));
    }
  }
  if (xs.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t j = 0; j < xs.size(); ++j) mx += xs[j], my += ys[j];
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxy = 0, sxx = 0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      sxy += (xs[j] - mx) * (ys[j] - my);
      sxx += (xs[j] - mx) * (xs[j] - mx);
    }
    if (sxx > 0) {
      g.slope = sxy / sxx;
      g.slope_defined = true;
    }
  }
  g.terms = std::move(terms);
  return g;
}

// Real diagonal of A^{⊗m}† a A^{⊗m}: the expectation of a in each product
// alphabet state. Exact for any a, since middle sites contribute ⟨ψ|ψ⟩ = 1.
inline std::vector<double> alphabet_expectations(const Matrix& a, const QuantumAlphabet& alph,
                                                 std::size_t m) {
  Matrix x = a;
  if (!alph.is_computational()) {
    const Matrix adj = alph.vectors().adjoint();
    x = conjugate_tensor_power(std::move(x), adj, m);
  }
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = x(i, i).real();
  return out;
}

inline std::vector<double> correlation_terms(const QuantumSource& s, const Matrix& a,
                                             const Matrix& b, std::size_t m, std::size_t N,
                                             double& product) {
  if (const auto* iid = s.as<IidSource>()) {
    const Matrix rho_m = tensor_power(iid->rho.matrix(), m);
    product = trace_product(rho_m, a).real() * trace_product(rho_m, b).real();
    return std::vector<double>(N - m + 1, product);
  }
  if (const auto* cls = s.as<ClassicalSource>()) {
    const auto f = alphabet_expectations(a, cls->alphabet, m);
    const auto g = alphabet_expectations(b, cls->alphabet, m);
    product = block_expectation(cls->process, f, m) * block_expectation(cls->process, g, m);
    return block_correlations(cls->process, f, g, m, N);
  }
  // E^{⊗(m+i)} acting on (a ⊗ I ⊗ b) dualises to (ã ⊗ I ⊗ b̃).
  const auto& ch = *s.as<ChannelSource>();
  const Matrix at = heisenberg_dual(ch.channel, a, m);
  const Matrix bt = heisenberg_dual(ch.channel, b, m);
  return correlation_terms(*ch.inner, at, bt, m, N, product);
}

}  // namespace detail

/// Cesàro, weak-mixing and tail diagnostics for observables a, b on m sites.
/// Every source kind reduces to classical block correlations, so N can be
/// large without materialising ρ_{m+N}.
inline ErgodicityGap ergodicity_gap(const QuantumSource& s, const Matrix& a, const Matrix& b,
                                    std::size_t m, std::size_t N) {
  require_hermitian(a, "ergodicity_gap observable a");
  require_hermitian(b, "ergodicity_gap observable b");
  const std::size_t dim = checked_power(s.dim(), m);
  if (static_cast<std::size_t>(a.rows()) != dim || static_cast<std::size_t>(b.rows()) != dim)
    throw ValidationError("ergodicity_gap observables must act on d^m");
  if (m == 0 || N < m) throw ValidationError("ergodicity_gap needs 1 ≤ m ≤ N");
  double product = 0.0;
  auto terms = detail::correlation_terms(s, a, b, m, N, product);
  return detail::summarize_terms(std::move(terms), product, m, N);
}

/// Same quantity by explicit ρ_{m+i} and a ⊗ I ⊗ b; for cross-checks at small N.
inline ErgodicityGap ergodicity_gap_dense(const QuantumSource& s, const Matrix& a,
                                          const Matrix& b, std::size_t m, std::size_t N) {
  require_hermitian(a, "ergodicity_gap observable a");
  require_hermitian(b, "ergodicity_gap observable b");
  try {
    checked_power(s.dim(), m + N);
  } catch (const SizeError&) {
    throw SizeError("ergodicity_gap_dense: d^(m+N) exceeds the dimension cap; use "
                    "ergodicity_gap, which reduces to classical correlations");
  }
  const Matrix rho_m = source_marginal_matrix(s, m);
  const double product = trace_product(rho_m, a).real() * trace_product(rho_m, b).real();
  std::vector<double> terms;
  for (std::size_t i = m; i <= N; ++i) {
    const Matrix rho = source_marginal_matrix(s, m + i);
    const Matrix obs =
        tensor_product(tensor_product(a, Matrix::Identity(checked_power(s.dim(), i - m),
                                                          checked_power(s.dim(), i - m))),
                       b);
    terms.push_back(trace_product(rho, obs).real());
  }
  return detail::summarize_terms(std::move(terms), product, m, N);
}

// ---------------------------------------------------------------------------
// conditional expectation

inline void require_orthonormal_basis(const Matrix& basis) {
  if (basis.rows() == 0 || basis.rows() != basis.cols())
    throw ValidationError("basis must be a square matrix of column vectors");
  const double dev = max_abs(basis.adjoint() * basis - Matrix::Identity(basis.cols(), basis.cols()));
  if (dev > 1e-10)
    throw ValidationError("basis is not orthonormal (deviation " + std::to_string(dev) + ")");
}

/// Pinching Σ_k |e_k⟩⟨e_k| a |e_k⟩⟨e_k| onto the maximal abelian algebra of
/// the basis.
inline Matrix conditional_expectation(const Matrix& a, const Matrix& basis) {
  require_square(a, "conditional_expectation");
  require_orthonormal_basis(basis);
  if (basis.rows() != a.rows()) throw ValidationError("basis dimension mismatch");
  const Matrix in_basis = basis.adjoint() * a * basis;
  return basis * in_basis.diagonal().asDiagonal() * basis.adjoint();
}

// ---------------------------------------------------------------------------
// abelian restriction

/// Classical measure view of a source pinched into the product eigenbasis of
/// ρ_l. Symbols are eigenvector indices of ρ_l (descending eigenvalue).
class AbelianRestriction {
 public:
  AbelianRestriction(QuantumSource source, std::size_t l) : source_(std::move(source)), l_(l) {
    if (l == 0) throw ValidationError("block length must be positive");
    const auto es = hermitian_eig(source_marginal_matrix(source_, l));
    basis_ = es.vectors;
    eigenvalues_ = es.values;
  }

  std::size_t block_length() const { return l_; }
  std::size_t alphabet_size() const { return static_cast<std::size_t>(basis_.cols()); }
  const Matrix& basis() const { return basis_; }
  const RealVector& eigenvalues() const { return eigenvalues_; }
  const QuantumSource& source() const { return source_; }

  /// V^{⊗n}† ρ_{ln} V^{⊗n} before pinching.
  Matrix rotated_marginal(std::size_t n) const {
    Matrix rho = source_marginal_matrix(source_, l_ * n);
    return conjugate_tensor_power(std::move(rho), basis_.adjoint(), n);
  }

  /// μ_n(ω) = ⟨ω| V^{⊗n}† ρ_{ln} V^{⊗n} |ω⟩.
  Distribution marginal(std::size_t n) const {
    const Matrix rot = rotated_marginal(n);
    std::vector<double> mu(static_cast<std::size_t>(rot.rows()));
    for (Eigen::Index i = 0; i < rot.rows(); ++i)
      mu[static_cast<std::size_t>(i)] = std::max(0.0, rot(i, i).real());
    return Distribution(alphabet_size(), n, std::move(mu));
  }

  /// Pinched ρ_{ln} in the product eigenbasis, back in the original frame.
  Matrix pinched_marginal(std::size_t n) const {
    const Matrix product_basis = tensor_power(basis_, n);
    return conditional_expectation(source_marginal_matrix(source_, l_ * n), product_basis);
  }

  /// f^{-1}: projector onto span{V^{⊗n}|ω⟩ : ω ∈ set}.
  Projector projector_of(std::span<const std::uint64_t> sequences, std::size_t n) const {
    const std::size_t dim = checked_power(alphabet_size(), n);
    Matrix cols = Matrix::Zero(dim, sequences.size());
    for (std::size_t c = 0; c < sequences.size(); ++c) {
      if (sequences[c] >= dim) throw ValidationError("sequence index out of range");
      cols(sequences[c], c) = 1.0;
    }
    for (std::size_t s = 0; s < n; ++s) apply_site_left(cols, alphabet_size(), n, s, basis_);
    return Projector::from_orthonormal_basis(std::move(cols));
  }

  /// f: sequences admitted by a projector diagonal in the product eigenbasis.
  std::vector<std::uint64_t> sequences_of(const Projector& p, std::size_t n) const {
    Matrix rot = p.basis();
    for (std::size_t s = 0; s < n; ++s)
      apply_site_left(rot, alphabet_size(), n, s, basis_.adjoint());
    const Matrix m = rot * rot.adjoint();
    Matrix off = m;
    off.diagonal().setZero();
    if (max_abs(off) > 1e-8) throw ValidationError("projector is not diagonal in this basis");
    std::vector<std::uint64_t> out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double v = m(i, i).real();
      if (std::abs(v - 1.0) <= 1e-8)
        out.push_back(static_cast<std::uint64_t>(i));
      else if (std::abs(v) > 1e-8)
        throw ValidationError("projector is not diagonal in this basis");
    }
    return out;
  }

  double stationarity_deviation(std::size_t n, std::size_t i) const {
    const auto big = marginal(n + i);
    const auto small = marginal(n);
    return max_abs_difference(marginalize_first(big, i), small.values());
  }

  double consistency_deviation(std::size_t n, std::size_t i) const {
    const auto big = marginal(n + i);
    const auto small = marginal(n);
    return max_abs_difference(marginalize_last(big, i), small.values());
  }

 private:
  QuantumSource source_;
  std::size_t l_;
  Matrix basis_;
  RealVector eigenvalues_;
};

inline AbelianRestriction abelian_restriction(const QuantumSource& s, std::size_t l) {
  return AbelianRestriction(s, l);
}

}  // namespace uqc
