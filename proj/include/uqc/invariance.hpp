#pragma once

#include <algorithm>
#include <cstdint>

#include "uqc/channel.hpp"
#include "uqc/quantum_source.hpp"
#include "uqc/random.hpp"

namespace uqc {

struct InvarianceOptions {
  std::size_t trials = 8;
  std::uint64_t seed = 7;
  std::size_t observable_sites = 1;  ///< m of the ergodicity observables
  std::optional<Matrix> a;           ///< defaults to |0⟩⟨0| ⊗ I
  std::optional<Matrix> b;           ///< defaults to a
  std::size_t duality_max_sites = 6;
};

struct InvarianceReport {
  double consistency = 0.0;  ///< worst over 1 ≤ m, 1 ≤ i, m + i ≤ m_max
  double stationarity = 0.0;
  double duality = 0.0;  ///< worst |tr(E(ρ)(a⊗I⊗b)) − tr(ρ(ã⊗I⊗b̃))|
  ErgodicityGap ergodicity;
};

/// Runs the consistency, stationarity and ergodicity diagnostics on the
/// channel-transformed source E^{⊗}(s).
inline InvarianceReport verify_invariance(const QuantumSource& s, const KrausChannel& c,
                                          std::size_t m_max, std::size_t N,
                                          const InvarianceOptions& opt = {}) {
  const auto t = QuantumSource::transformed(s, c);
  InvarianceReport r;
  for (std::size_t total = 2; total <= m_max; ++total)
    for (std::size_t m = 1; m < total; ++m) {
      const std::size_t i = total - m;
      const auto seed = derive_seed(opt.seed, total * 64 + m);
      r.consistency = std::max(r.consistency, check_consistency(t, m, i, opt.trials, seed));
      r.stationarity = std::max(r.stationarity, check_stationarity(t, m, i, opt.trials, seed));
    }

  const std::size_t mo = opt.observable_sites;
  const std::size_t dim = checked_power(s.dim(), mo);
  Matrix a = Matrix::Zero(dim, dim);
  if (opt.a) {
    a = *opt.a;
  } else {
    a(0, 0) = 1.0;
  }
  const Matrix b = opt.b ? *opt.b : a;
  r.ergodicity = ergodicity_gap(t, a, b, mo, N);

  Rng rng(derive_seed(opt.seed, 0xd0a1));
  for (std::size_t total = 2; total <= std::min(m_max, opt.duality_max_sites); ++total) {
    for (std::size_t m = 1; 2 * m <= total; ++m) {
      const std::size_t i = total - m;  // b sits on sites i..i+m−1
      const Matrix ra = random_hermitian(checked_power(s.dim(), m), rng);
      const Matrix rb = random_hermitian(checked_power(s.dim(), m), rng);
      const std::size_t gap_dim = checked_power(s.dim(), i - m);
      const Matrix obs =
          tensor_product(tensor_product(ra, Matrix::Identity(gap_dim, gap_dim)), rb);
      const Matrix dual_obs = tensor_product(
          tensor_product(heisenberg_dual(c, ra, m), Matrix::Identity(gap_dim, gap_dim)),
          heisenberg_dual(c, rb, m));
      const Matrix rho = source_marginal_matrix(s, total);
      const Complex lhs = trace_product(apply_tensor_power(c, rho, total), obs);
      const Complex rhs = trace_product(rho, dual_obs);
      r.duality = std::max(r.duality, std::abs(lhs - rhs) / (max_abs(ra) * max_abs(rb)));
    }
  }
  return r;
}

}  // namespace uqc
