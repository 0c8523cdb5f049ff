#pragma once

// Universal projector construction: the i_m schedule, code projectors, the
// unitary-orbit join w = ∨_U U^{⊗n} p U^{†⊗n} (randomised span saturation),
// and assembly of q_r^{(m)} with its rate bounds.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "uqc/classical_process.hpp"
#include "uqc/error.hpp"
#include "uqc/operator.hpp"
#include "uqc/quantum_source.hpp"
#include "uqc/random.hpp"
#include "uqc/universal_code.hpp"

namespace uqc {

// ---------------------------------------------------------------------------
// schedule

struct Schedule {
  std::uint64_t m = 0;
  std::uint64_t d = 0;
  double r = 0.0;
  unsigned i = 0;
  std::uint64_t l = 1;
  std::uint64_t n = 0;
  double R = 0.0;
};

namespace detail {
inline std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  if (a != 0 && b > kMax / a) return kMax;
  return a * b;
}
}  // namespace detail

/// 2^i · d^{3·2^i}, saturating at 2^64 − 1.
inline std::uint64_t schedule_threshold(unsigned i, std::uint64_t d) {
  if (i >= 63) return std::numeric_limits<std::uint64_t>::max();
  std::uint64_t out = std::uint64_t{1} << i;
  const std::uint64_t exponent = 3 * (std::uint64_t{1} << i);
  for (std::uint64_t e = 0; e < exponent; ++e) {
    out = detail::saturating_mul(out, d);
    if (out == std::numeric_limits<std::uint64_t>::max()) break;
  }
  return out;
}

/// The unique i_m with 2^i d^{3·2^i} ≤ m < 2^{i+1} d^{3·2^{i+1}}.
inline Schedule schedule(std::uint64_t m, std::uint64_t d, double r) {
  if (d < 2) throw ValidationError("schedule: site dimension must be at least 2");
  if (m < schedule_threshold(0, d))
    throw ValidationError("schedule: m = " + std::to_string(m) + " is below d^3");
  Schedule s;
  s.m = m;
  s.d = d;
  s.r = r;
  while (schedule_threshold(s.i + 1, d) <= m) ++s.i;
  s.l = std::uint64_t{1} << s.i;
  s.n = m / s.l;
  s.R = static_cast<double>(s.l) * r;
  return s;
}

// ---------------------------------------------------------------------------
// rate bounds

/// d^{2l} log₂(n+1)/(l n) + r + log₂ d / n: the trace-rate upper bound at an
/// explicit (l, n).
inline double rate_upper_bound(double d, double l, double n, double r) {
  return std::pow(d, 2.0 * l) * std::log2(n + 1.0) / (l * n) + r + std::log2(d) / n;
}

/// The same bound with n = d^{3l}, as reached by the schedule.
inline double schedule_rate_upper_bound(double d, double l, double r) {
  return rate_upper_bound(d, l, std::pow(d, 3.0 * l), r);
}

/// log₂ of (n+1)^{d^{2l}} · tr(p) · d^l, the symmetric-subspace trace bound.
inline double log2_join_trace_bound(double d, double l, double n, double trace_p) {
  return std::pow(d, 2.0 * l) * std::log2(n + 1.0) + std::log2(trace_p) + l * std::log2(d);
}

// ---------------------------------------------------------------------------
// code projector and orbit join

/// Σ_{ω ∈ code} V^{⊗n}|ω⟩⟨ω|V^{⊗n}† for a single-block basis V.
inline Projector code_projector(const Matrix& block_basis, const BlockCode& code) {
  require_orthonormal_basis(block_basis);
  const auto alphabet = static_cast<std::size_t>(block_basis.rows());
  if (code.alphabet_size() != alphabet)
    throw ValidationError("code alphabet size differs from the basis dimension");
  const std::size_t n = code.length();
  const std::size_t dim = checked_power(alphabet, n);
  const auto& members = code.members();
  Matrix cols = Matrix::Zero(dim, members.size());
  for (std::size_t c = 0; c < members.size(); ++c) cols(members[c], c) = 1.0;
  if (!block_basis.isIdentity(0.0))
    for (std::size_t s = 0; s < n; ++s) apply_site_left(cols, alphabet, n, s, block_basis);
  return Projector::from_orthonormal_basis(std::move(cols));
}

struct JoinOptions {
  double tolerance = 1e-6;       ///< post-hoc invariance threshold
  std::size_t budget = 32;       ///< consecutive rank-stable samples required
  std::uint64_t seed = 0x5eed;
  std::size_t verify_samples = 8;
};

struct JoinResult {
  Projector w;
  std::size_t samples = 0;
  double invariance_residual = 0.0;  ///< worst ‖(I−w) U^{⊗n} p‖∞ over fresh U
};

namespace detail {

// Threshold on the pivoted-QR diagonal of residuals of unit columns. Rounding
// noise in a contained image sits near 1e-15; directions below 1e-8 in one
// sample are picked up by later samples.
inline constexpr double kJoinNoise = 1e-8;

// True when every column is a distinct computational basis vector.
inline bool is_column_selection(const Matrix& b) {
  for (Eigen::Index c = 0; c < b.cols(); ++c) {
    Eigen::Index ones = 0;
    for (Eigen::Index r = 0; r < b.rows(); ++r) {
      const Complex v = b(r, c);
      if (v == Complex(1.0, 0.0)) {
        ++ones;
      } else if (v != Complex(0.0, 0.0)) {
        return false;
      }
    }
    if (ones != 1) return false;
  }
  return true;
}

inline double invariance_residual(const Matrix& q, const Matrix& p_basis, const Matrix& x) {
  const Matrix residual = x - q * (q.adjoint() * x);  // (I − w) U^{⊗n} B_p
  // R B_p† only relocates the columns of R when B_p selects basis vectors.
  if (is_column_selection(p_basis)) return max_abs(residual);
  const Matrix bp_adj = p_basis.adjoint();
  double worst = 0.0;
  constexpr Eigen::Index kBlock = 512;
  for (Eigen::Index r = 0; r < residual.rows(); r += kBlock) {
    const Eigen::Index rows = std::min(kBlock, residual.rows() - r);
    worst = std::max(worst, max_abs(residual.middleRows(r, rows) * bp_adj));
  }
  return worst;
}

}  // namespace detail

/// Approximates ∨_U U^{⊗n} p U^{†⊗n} over unitaries U on one l-block
/// (dimension d^l), by adjoining Haar-random images until the rank has been
/// stable for `budget` consecutive samples, then checking invariance on
/// fresh samples.
///
/// After a full image U^{⊗n} B_p adds nothing, later samples probe a single
/// random vector of range(p): if the current span misses part of the orbit,
/// such a probe lands outside it with probability one. Any growth switches
/// back to full images.
inline JoinResult orbit_join(const Projector& p, std::size_t d, std::size_t l, std::size_t n,
                             const JoinOptions& opt = {}) {
  const std::size_t block = checked_power(d, l);
  const std::size_t dim = checked_power(block, n);
  if (p.dim() != dim) throw ValidationError("orbit_join: projector dimension is not d^{ln}");
  if (p.rank() == 0 || p.rank() == dim) return {p, 0, 0.0};

  Rng rng(opt.seed);
  const Matrix& bp = p.basis();
  Matrix q = bp;
  std::size_t stable = 0, samples = 0;
  bool full = true;
  const std::size_t max_samples = 100 * std::max<std::size_t>(opt.budget, 1);
  while (stable < opt.budget && static_cast<std::size_t>(q.cols()) < dim) {
    if (samples >= max_samples)
      throw NonConvergenceError("orbit_join: rank " + std::to_string(q.cols()) +
                                " still growing after " + std::to_string(samples) + " samples");
    const Matrix u = haar_unitary(block, rng);
    Matrix x;
    if (full) {
      x = bp;
    } else {
      Vector g = random_vector(static_cast<std::size_t>(bp.cols()), rng);
      x = bp * g.normalized();
    }
    apply_tensor_power_left(x, block, n, u);
    ++samples;
    const Matrix c = q.adjoint() * x;
    const double worst_miss = (1.0 - c.colwise().squaredNorm().array()).maxCoeff();
    if (worst_miss < 1e-12) {
      ++stable;
      full = false;
      continue;
    }
    Matrix res = x - q * c;
    res -= q * (q.adjoint() * res);
    Eigen::ColPivHouseholderQR<Matrix> rrqr(res);
    const auto& r = rrqr.matrixR();
    Eigen::Index keep = 0;
    while (keep < std::min(r.rows(), r.cols()) && std::abs(r(keep, keep)) > detail::kJoinNoise)
      ++keep;
    if (keep == 0) {
      ++stable;
      full = false;
      continue;
    }
    Matrix basis = rrqr.householderQ() * Matrix::Identity(dim, keep);
    basis -= q * (q.adjoint() * basis);
    Eigen::HouseholderQR<Matrix> qr(basis);
    basis = qr.householderQ() * Matrix::Identity(dim, keep);
    Matrix grown(dim, q.cols() + keep);
    grown << q, basis;
    q.swap(grown);
    stable = 0;
    full = true;
  }
  if (static_cast<std::size_t>(q.cols()) >= dim) return {Projector::identity(dim), samples, 0.0};

  JoinResult out{Projector::from_orthonormal_basis(q), samples, 0.0};
  for (std::size_t t = 0; t < opt.verify_samples; ++t) {
    const Matrix u = haar_unitary(block, rng);
    Matrix x = bp;
    apply_tensor_power_left(x, block, n, u);
    out.invariance_residual =
        std::max(out.invariance_residual, detail::invariance_residual(q, bp, x));
  }
  if (out.invariance_residual > opt.tolerance)
    throw NonConvergenceError("orbit_join: invariance residual " +
                              std::to_string(out.invariance_residual) + " exceeds tolerance");
  return out;
}

// ---------------------------------------------------------------------------
// assembly of q_r^{(m)}

struct ScheduleOverride {
  std::size_t l = 1;
  std::size_t n = 1;
  std::optional<double> R;  ///< rate per l-block; defaults to l·r
};

struct AssembleOptions {
  std::optional<ScheduleOverride> override_schedule;
  std::size_t context_order = 0;
  JoinOptions join;
};

struct UniversalProjector {
  std::size_t m = 0;
  std::size_t d = 0;
  double r = 0.0;
  std::size_t l = 1;
  std::size_t n = 0;
  double R = 0.0;
  std::size_t context_order = 0;
  bool overridden = false;
  Projector q = Projector::zero(1);
  std::size_t code_size = 0;
  std::size_t join_rank = 0;
  std::size_t samples = 0;
  double invariance_residual = 0.0;
  std::uint64_t seed = 0;

  double trace() const { return q.trace(); }
  /// (1/m) log₂ tr(q)
  double trace_log_rate() const { return std::log2(static_cast<double>(q.rank())) / m; }
  bool meets_rate_floor() const { return trace_log_rate() >= r - 1e-12; }
  /// Upper bound at the (l, n) actually used.
  double rate_bound() const {
    return rate_upper_bound(static_cast<double>(d), static_cast<double>(l),
                            static_cast<double>(n), r);
  }
};

/// q = w when m = l·n, else w ⊗ I^{⊗(m − l·n)}, with w the orbit join of the
/// computational-basis code projector of build_code(d^l, R, n, k).
inline UniversalProjector assemble_q(std::size_t m, std::size_t d, double r,
                                     const AssembleOptions& opt = {}) {
  if (!(r > 0.0) || r > std::log2(static_cast<double>(d)) + 1e-12)
    throw ValidationError("target rate must lie in (0, log2 d]");
  UniversalProjector up;
  up.m = m;
  up.d = d;
  up.r = r;
  up.context_order = opt.context_order;
  up.seed = opt.join.seed;
  if (opt.override_schedule) {
    const auto& o = *opt.override_schedule;
    if (o.l == 0 || o.n == 0) throw ValidationError("override needs positive l and n");
    if (o.l * o.n > m) throw ValidationError("override l·n exceeds m");
    up.l = o.l;
    up.n = o.n;
    up.R = o.R.value_or(static_cast<double>(o.l) * r);
    up.overridden = true;
  } else {
    const auto s = schedule(m, d, r);
    up.l = static_cast<std::size_t>(s.l);
    up.n = static_cast<std::size_t>(s.n);
    up.R = s.R;
  }
  const std::size_t block = checked_power(d, up.l);
  checked_power(block, up.n);
  const std::size_t pad = checked_power(d, m - up.l * up.n);
  checked_power(d, m);

  const auto code = build_code(block, up.R, up.n, opt.context_order);
  up.code_size = static_cast<std::size_t>(code.size());
  const auto p = code_projector(Matrix::Identity(block, block), code);
  auto join = orbit_join(p, d, up.l, up.n, opt.join);
  up.join_rank = join.w.rank();
  up.samples = join.samples;
  up.invariance_residual = join.invariance_residual;
  if (pad == 1) {
    up.q = std::move(join.w);
  } else {
    up.q = Projector::from_orthonormal_basis(
        tensor_product(join.w.basis(), Matrix::Identity(pad, pad)));
  }
  return up;
}

/// tr(q ρ_m). Diagonal sources use Σ_x μ_x ‖row_x(Q)‖²; others the dense trace.
inline double acceptance_probability(const Projector& q, const QuantumSource& s) {
  const auto n = exact_log(q.dim(), s.dim());
  if (!n) throw ValidationError("projector dimension is not a power of the site dimension");
  const Matrix& b = q.basis();
  if (s.is_diagonal()) {
    const auto mu = diagonal_marginal(s, *n);
    const Eigen::VectorXd row_weight = b.rowwise().squaredNorm();
    double out = 0.0;
    for (std::size_t x = 0; x < mu.size(); ++x) out += mu[x] * row_weight(x);
    return out;
  }
  const Matrix rho = source_marginal_matrix(s, *n);
  return (b.adjoint() * rho * b).trace().real();
}

}  // namespace uqc
