#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"
#include "uqc/info_measures.hpp"

namespace uqc {
namespace {

using testing::for_all;
using testing::h2;

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

DensityOperator dens(const Matrix& m) { return DensityOperator::from_matrix(m); }

RealMatrix two_state(double p01, double p10) {
  RealMatrix t(2, 2);
  t << 1 - p01, p01, p10, 1 - p10;
  return t;
}

TEST(VonNeumannEntropy, Examples) {
  EXPECT_NEAR(von_neumann_entropy(dens(Matrix::Identity(2, 2) / 2.0)), 1.0, 1e-15);
  EXPECT_NEAR(von_neumann_entropy(dens(diag2(0.9, 0.1))), 0.46900, 5e-6);
  EXPECT_NEAR(von_neumann_entropy(dens(diag2(0.9, 0.1))), h2(0.1), 1e-14);
  Rng rng(61);
  for (int t = 0; t < 10; ++t) EXPECT_NEAR(von_neumann_entropy(random_pure_state(4, rng)), 0.0, 1e-9);
}

TEST(VonNeumannEntropy, UnitaryInvariantAndBounded) {
  for_all(50, 62, [](Rng& rng, std::size_t) {
    const std::size_t d = testing::uniform_index(rng, 2, 8);
    const auto rho = random_density(d, rng);
    const Matrix u = haar_unitary(d, rng);
    const double s = von_neumann_entropy(rho);
    EXPECT_NEAR(von_neumann_entropy(DensityOperator::trusted(u * rho.matrix() * u.adjoint())), s,
                1e-10);
    EXPECT_GE(s, -1e-12);
    EXPECT_LE(s, std::log2(static_cast<double>(d)) + 1e-12);
  });
}

TEST(MeanEntropy, IidIsAdditive) {
  const auto s = QuantumSource::iid(dens(diag2(0.9, 0.1)));
  const std::vector<std::size_t> ns{1, 2, 3, 5, 8};
  const auto est = mean_entropy(s, ns);
  for (const auto& [n, v] : est.values) EXPECT_NEAR(v, h2(0.1), 1e-12) << n;
  ASSERT_TRUE(est.analytic.has_value());
  EXPECT_NEAR(*est.analytic, 0.46900, 5e-6);
  EXPECT_NEAR(est.extrapolated, h2(0.1), 1e-12);
}

TEST(MeanEntropy, OrthonormalMarkovEqualsClassicalBlockEntropies) {
  const auto proc = ClassicalProcess::markov(two_state(0.1, 0.2));
  const auto s = QuantumSource::classical(proc, QuantumAlphabet::computational(2));
  const std::vector<std::size_t> ns{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto est = mean_entropy(s, ns);
  double prev = 1e9;
  for (const auto& [n, v] : est.values) {
    EXPECT_NEAR(v, shannon_entropy(marginal(proc, n, true)) / static_cast<double>(n), 1e-10);
    EXPECT_LE(v, prev + 1e-9);
    prev = v;
  }
  const double rate = (2.0 / 3.0) * h2(0.1) + (1.0 / 3.0) * h2(0.2);
  ASSERT_TRUE(est.analytic.has_value());
  EXPECT_NEAR(*est.analytic, rate, 1e-12);
  // S(ρ_n) − S(ρ_{n−1}) is the conditional entropy, exact for a first-order chain
  EXPECT_NEAR(est.extrapolated, rate, 1e-10);
}

TEST(MeanEntropy, NonIncreasingForStationarySources) {
  Rng rng(63);
  Matrix v(2, 2);
  v << 1, 1 / std::sqrt(2.0), 0, 1 / std::sqrt(2.0);
  const std::vector<QuantumSource> sources{
      QuantumSource::classical(ClassicalProcess::markov(two_state(0.3, 0.6)),
                               QuantumAlphabet::from_columns(v)),
      QuantumSource::transformed(
          QuantumSource::classical(ClassicalProcess::periodic({0, 1, 1}),
                                   QuantumAlphabet::computational(2)),
          KrausChannel::depolarizing(0.3))};
  const std::vector<std::size_t> ns{1, 2, 3, 4, 5, 6, 7, 8};
  for (const auto& s : sources) {
    const auto est = mean_entropy(s, ns);
    for (std::size_t j = 1; j < est.values.size(); ++j)
      EXPECT_LE(est.values[j].second, est.values[j - 1].second + 1e-9) << s.kind_name();
  }
}

TEST(MeanEntropy, PureIidIsZero) {
  Rng rng(64);
  const auto s = QuantumSource::iid(random_pure_state(2, rng));
  const std::vector<std::size_t> ns{1, 2, 4};
  for (const auto& [n, v] : mean_entropy(s, ns).values) EXPECT_NEAR(v, 0.0, 1e-8);
}

TEST(MeanEntropy, NShiftScalesByBlockLength) {
  const auto s = QuantumSource::classical(ClassicalProcess::markov(two_state(0.1, 0.2)),
                                          QuantumAlphabet::computational(2));
  const double rate = (2.0 / 3.0) * h2(0.1) + (1.0 / 3.0) * h2(0.2);
  // S(ρ_{Nn})/n → N·s; for a first-order chain the error is S(ρ_1) − s over n
  const double s1 = h2(1.0 / 3.0);
  for (std::size_t N : {2, 3}) {
    const std::size_t n = 9 / N;
    EXPECT_NEAR(n_shift_mean_entropy(s, N, n),
                (s1 + (static_cast<double>(N * n) - 1) * rate) / static_cast<double>(n), 1e-10);
  }
}

TEST(Fidelity, Examples) {
  Rng rng(65);
  const auto rho = random_density(3, rng);
  EXPECT_NEAR(fidelity(rho, rho), 1.0, 1e-7);
  EXPECT_NEAR(fidelity(dens(diag2(1, 0)), dens(diag2(0, 1))), 0.0, 1e-15);
  EXPECT_NEAR(fidelity(dens(Matrix::Identity(2, 2) / 2.0), dens(diag2(1, 0))), std::sqrt(0.5),
              1e-12);
  EXPECT_NEAR(std::sqrt(0.5), 0.70711, 5e-6);
}

TEST(Fidelity, SymmetricAndBounded) {
  for_all(50, 66, [](Rng& rng, std::size_t) {
    const std::size_t d = testing::uniform_index(rng, 2, 6);
    const auto a = random_density(d, rng), b = random_density(d, rng);
    const double f = fidelity(a, b);
    EXPECT_NEAR(f, fidelity(b, a), 1e-9);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  });
}

TEST(Fidelity, PureStatesGiveOverlap) {
  for_all(20, 67, [](Rng& rng, std::size_t) {
    const Vector u = random_pure_vector(3, rng), v = random_pure_vector(3, rng);
    const auto a = DensityOperator::trusted(u * u.adjoint());
    const auto b = DensityOperator::trusted(v * v.adjoint());
    EXPECT_NEAR(fidelity(a, b), std::abs(u.dot(v)), 1e-7);
  });
}

TEST(EntanglementFidelity, IdentityChannelIsOne) {
  Rng rng(68);
  const auto rho = random_density(4, rng);
  EXPECT_NEAR(entanglement_fidelity(rho, KrausChannel::identity(4)), 1.0, 1e-12);
  EXPECT_NEAR(entanglement_fidelity_purification(rho, KrausChannel::identity(4)), 1.0, 1e-12);
}

TEST(EntanglementFidelity, PureInputIsOutputOverlap) {
  for_all(20, 69, [](Rng& rng, std::size_t) {
    const Vector psi = random_pure_vector(2, rng);
    const auto rho = DensityOperator::trusted(psi * psi.adjoint());
    const KrausChannel c(testing::random_kraus(2, 3, rng));
    const double overlap = psi.dot(c.apply(rho.matrix()) * psi).real();
    EXPECT_NEAR(entanglement_fidelity(rho, c), overlap, 1e-12);
  });
}

TEST(EntanglementFidelity, DualPathAgreement) {
  for_all(100, 70, [](Rng& rng, std::size_t) {
    const std::size_t d = testing::uniform_index(rng, 0, 1) == 0 ? 2 : 4;
    const auto rho = random_density(d, rng);
    const auto kraus = testing::random_kraus(d, testing::uniform_index(rng, 1, 4), rng);
    const double a = entanglement_fidelity(rho, kraus);
    const double b = entanglement_fidelity_purification(rho, kraus);
    EXPECT_NEAR(a, b, 1e-9);
    // bounded by the state fidelity of input and output, squared-fidelity convention
    const auto out = DensityOperator::trusted(apply_kraus(kraus, rho.matrix()));
    const double f = fidelity(rho, out);
    EXPECT_LE(a, f * f + 1e-9);
    EXPECT_GE(a, -1e-12);
  });
}

TEST(EntanglementFidelity, DimensionMismatch) {
  Rng rng(71);
  EXPECT_THROW(entanglement_fidelity(random_density(4, rng), KrausChannel::identity(2)),
               ValidationError);
}

TEST(CompressionRate, Examples) {
  EXPECT_DOUBLE_EQ(compression_rate(4, 16), 1.0);
  EXPECT_DOUBLE_EQ(compression_rate(4, 1), 0.0);
  EXPECT_NEAR(compression_rate(10, 128), 0.7, 1e-15);
  EXPECT_THROW(compression_rate(4, 0.5), ValidationError);
  EXPECT_THROW(compression_rate(0, 2), ValidationError);
}

}  // namespace
}  // namespace uqc
