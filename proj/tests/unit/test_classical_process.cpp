#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"
#include "uqc/classical_process.hpp"

namespace uqc {
namespace {

using testing::for_all;
using testing::h2;

RealMatrix two_state(double p01, double p10) {
  RealMatrix t(2, 2);
  t << 1 - p01, p01, p10, 1 - p10;
  return t;
}

ClassicalProcess reference_markov() { return ClassicalProcess::markov(two_state(0.1, 0.2)); }

RealMatrix random_transition(std::size_t n, Rng& rng) {
  RealMatrix t(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = random_probability_vector(n, rng);
    for (std::size_t j = 0; j < n; ++j) t(i, j) = row[j];
  }
  return t;
}

std::vector<ClassicalProcess> process_zoo(Rng& rng) {
  std::vector<ClassicalProcess> out;
  out.push_back(ClassicalProcess::iid(random_probability_vector(2, rng)));
  out.push_back(ClassicalProcess::iid(random_probability_vector(3, rng)));
  out.push_back(ClassicalProcess::markov(random_transition(2, rng)));
  out.push_back(ClassicalProcess::markov(random_transition(3, rng)));
  out.push_back(ClassicalProcess::periodic({0, 1, 1}));
  out.push_back(ClassicalProcess::periodic({0, 2, 1, 1}, 3));
  out.push_back(ClassicalProcess::mixture(
      {0.3, 0.7}, {ClassicalProcess::iid({0.9, 0.1}), ClassicalProcess::markov(two_state(0.3, 0.4))}));
  return out;
}

// Brute-force Markov path probability by explicit vector-matrix products.
double markov_oracle(const std::vector<double>& pi, const RealMatrix& t, const Sequence& s) {
  double out = pi[s[0]];
  for (std::size_t j = 1; j < s.size(); ++j) out *= t(s[j - 1], s[j]);
  return out;
}

TEST(Marginal, IidBernoulli) {
  const auto p = ClassicalProcess::iid({0.9, 0.1});
  const auto mu = marginal(p, 2, true).values();
  EXPECT_NEAR(mu[0], 0.81, 1e-15);
  EXPECT_NEAR(mu[1], 0.09, 1e-15);
  EXPECT_NEAR(mu[2], 0.09, 1e-15);
  EXPECT_NEAR(mu[3], 0.01, 1e-15);
}

TEST(Marginal, MarkovStartsAtClosedFormStationaryLaw) {
  const auto p = reference_markov();
  // π = (p10, p01)/(p01 + p10) for a two-state chain
  const std::vector<double> pi{0.2 / 0.3, 0.1 / 0.3};
  const auto mu1 = marginal(p, 1, true).values();
  EXPECT_NEAR(mu1[0], 2.0 / 3.0, 1e-12);
  const auto mu = marginal(p, 5, true);
  for (std::uint64_t idx = 0; idx < 32; ++idx)
    EXPECT_NEAR(mu.at(idx), markov_oracle(pi, two_state(0.1, 0.2), index_to_sequence(idx, 2, 5)),
                1e-14);
}

TEST(Marginal, PeriodicTwoCycle) {
  const auto p = ClassicalProcess::periodic({0, 1});
  const auto mu = marginal(p, 2, true).values();
  EXPECT_DOUBLE_EQ(mu[0b00], 0.0);
  EXPECT_DOUBLE_EQ(mu[0b01], 0.5);
  EXPECT_DOUBLE_EQ(mu[0b10], 0.5);
  EXPECT_DOUBLE_EQ(mu[0b11], 0.0);
}

TEST(Marginal, DenseMatchesPointwiseProbability) {
  Rng rng(21);
  for (const auto& p : process_zoo(rng)) {
    const std::size_t n = 4;
    const auto mu = marginal(p, n, true);
    double total = 0.0;
    for (std::uint64_t idx = 0; idx < mu.values().size(); ++idx) {
      const auto s = index_to_sequence(idx, p.alphabet_size(), n);
      EXPECT_NEAR(mu.at(idx), probability(p, s), 1e-14) << p.kind_name();
      total += mu.at(idx);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Marginal, EvaluatorBeyondDenseLimit) {
  const auto p = ClassicalProcess::iid({0.5, 0.5});
  const auto mu = marginal(p, 30);
  EXPECT_FALSE(mu.is_dense());
  EXPECT_THROW(mu.values(), SizeError);
  EXPECT_NEAR(mu(Sequence(30, 0)), std::pow(0.5, 30), 1e-25);
  EXPECT_THROW(marginal(p, 30, true), SizeError);
}

TEST(Marginal, ConsistencyAndStationarityInvariants) {
  Rng rng(22);
  for (const auto& p : process_zoo(rng)) {
    const std::size_t n_max = p.alphabet_size() == 2 ? 10 : 6;
    for (std::size_t n = 1; n <= n_max; ++n)
      for (std::size_t i = 1; i <= 4; ++i) {
        EXPECT_LE(consistency_deviation(p, n, i), 1e-12) << p.kind_name() << n << i;
        EXPECT_LE(stationarity_deviation(p, n, i), 1e-12) << p.kind_name() << n << i;
      }
  }
}

TEST(Marginal, NonStationaryInitialIsDetected) {
  const auto p = ClassicalProcess::markov(two_state(0.1, 0.2), {1.0, 0.0});
  EXPECT_LE(consistency_deviation(p, 3, 2), 1e-12);
  EXPECT_GT(stationarity_deviation(p, 1, 1), 0.05);
  EXPECT_THROW(entropy_rate(p), ValidationError);
}

TEST(Process, RejectsInvalidInputs) {
  EXPECT_THROW(ClassicalProcess::iid({0.5, 0.6}), ValidationError);
  EXPECT_THROW(ClassicalProcess::markov(two_state(0.1, 1.2)), ValidationError);
  EXPECT_THROW(ClassicalProcess::periodic({}), ValidationError);
  EXPECT_THROW(ClassicalProcess::periodic({0, 3}, 2), ValidationError);
  EXPECT_THROW(ClassicalProcess::mixture({0.5, 0.6}, {ClassicalProcess::iid({1.0}),
                                                     ClassicalProcess::iid({1.0})}),
               ValidationError);
}

TEST(EntropyRate, Examples) {
  EXPECT_NEAR(entropy_rate(ClassicalProcess::iid({0.9, 0.1})).bits, 0.46900, 5e-6);
  EXPECT_NEAR(entropy_rate(ClassicalProcess::iid({0.9, 0.1})).bits, h2(0.1), 1e-15);
  const double markov = (2.0 / 3.0) * h2(0.1) + (1.0 / 3.0) * h2(0.2);
  EXPECT_NEAR(markov, 0.553306, 5e-7);
  EXPECT_NEAR(entropy_rate(reference_markov()).bits, markov, 1e-12);
  EXPECT_EQ(entropy_rate(ClassicalProcess::periodic({0, 1, 1})).bits, 0.0);
  const auto mix = entropy_rate(ClassicalProcess::mixture(
      {0.5, 0.5}, {ClassicalProcess::iid({0.9, 0.1}), ClassicalProcess::iid({0.5, 0.5})}));
  EXPECT_TRUE(mix.non_ergodic);
  EXPECT_NEAR(mix.bits, 0.5 * h2(0.1) + 0.5, 1e-12);
}

TEST(EntropyRate, IidEqualsInfimumOfBlockEntropies) {
  for_all(10, 23, [](Rng& rng, std::size_t) {
    const auto p = ClassicalProcess::iid(random_probability_vector(2, rng));
    const double h = entropy_rate(p).bits;
    double inf = 1e9;
    for (std::size_t n = 1; n <= 12; ++n)
      inf = std::min(inf, shannon_entropy(marginal(p, n, true)) / static_cast<double>(n));
    EXPECT_NEAR(inf, h, 1e-9);
  });
}

TEST(EntropyRate, MarkovBlockEntropyPerSymbolNonIncreasing) {
  for_all(10, 24, [](Rng& rng, std::size_t) {
    const auto p = ClassicalProcess::markov(random_transition(3, rng));
    double prev = 1e9;
    for (std::size_t n = 1; n <= 9; ++n) {
      const double v = shannon_entropy(marginal(p, n, true)) / static_cast<double>(n);
      EXPECT_LE(v, prev + 1e-12);
      EXPECT_GE(v, entropy_rate(p).bits - 1e-12);
      prev = v;
    }
  });
}

TEST(ShannonEntropy, Examples) {
  EXPECT_NEAR(entropy_bits(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 2.0, 1e-15);
  EXPECT_EQ(entropy_bits(std::vector<double>{1.0, 0.0}), 0.0);
  const auto p = ClassicalProcess::iid({0.9, 0.1});
  const double blockwise = shannon_entropy(marginal(p, 2, true));
  EXPECT_NEAR(blockwise, 2 * h2(0.1), 1e-14);
  EXPECT_NEAR(blockwise, 2 * 0.46900, 1e-5);
}

TEST(BlockProcess, IdentityAndIidRegrouping) {
  const auto p = ClassicalProcess::iid({0.9, 0.1});
  const auto b1 = block_process(p, 1);
  EXPECT_EQ(marginal(b1, 3, true).values(), marginal(p, 3, true).values());
  const auto b2 = block_process(p, 2);
  ASSERT_NE(b2.as<IidProcess>(), nullptr);
  const auto& probs = b2.as<IidProcess>()->probs;
  EXPECT_NEAR(probs[0], 0.81, 1e-15);
  EXPECT_NEAR(probs[1], 0.09, 1e-15);
  EXPECT_NEAR(probs[2], 0.09, 1e-15);
  EXPECT_NEAR(probs[3], 0.01, 1e-15);
}

TEST(BlockProcess, RegroupedMarginalsMatchExactly) {
  Rng rng(25);
  for (const auto& p : process_zoo(rng)) {
    for (std::size_t l = 2; l <= 3; ++l) {
      const auto b = block_process(p, l);
      const std::size_t j_max = p.alphabet_size() == 2 ? 3 : 2;
      for (std::size_t j = 1; j <= j_max; ++j) {
        // big-endian regrouping keeps the index, so the vectors coincide
        EXPECT_LE(max_abs_difference(marginal(b, j, true).values(),
                                     marginal(p, l * j, true).values()),
                  1e-14)
            << p.kind_name() << " l=" << l << " j=" << j;
      }
    }
  }
}

TEST(BlockProcess, MarkovEntropyRateScales) {
  const auto p = reference_markov();
  for (std::size_t l = 2; l <= 3; ++l) {
    const auto b = block_process(p, l);
    ASSERT_NE(b.as<MarkovProcess>(), nullptr);
    EXPECT_NEAR(entropy_rate(b).bits, l * entropy_rate(p).bits, 1e-10);
  }
}

TEST(ErgodicDecomposition, PeriodicTwoCycleBlocksOfTwo) {
  const auto p = ClassicalProcess::periodic({0, 1});
  const auto dec = ergodic_decomposition_l(p, 2);
  EXPECT_EQ(dec.k, 2u);
  ASSERT_EQ(dec.components.size(), 2u);
  // component 0 is the point mass on (01)^∞, component 1 on (10)^∞
  EXPECT_DOUBLE_EQ(probability(dec.components[0], Sequence{0, 1, 0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(probability(dec.components[1], Sequence{1, 0, 1, 0}), 1.0);
}

TEST(ErgodicDecomposition, ThreeCycle) {
  const auto p = ClassicalProcess::periodic({0, 1, 2});
  EXPECT_EQ(ergodic_decomposition_l(p, 3).k, 3u);
  EXPECT_EQ(ergodic_decomposition_l(p, 2).k, 1u);
}

TEST(ErgodicDecomposition, IrreducibleAperiodicMarkovIsSingle) {
  for_all(10, 26, [](Rng& rng, std::size_t) {
    const auto p = ClassicalProcess::markov(random_transition(3, rng));
    for (std::size_t l = 1; l <= 4; ++l) {
      const auto dec = ergodic_decomposition_l(p, l);
      EXPECT_EQ(dec.k, 1u);
      EXPECT_EQ(marginal(dec.components[0], 4, true).values(), marginal(p, 4, true).values());
    }
  });
}

TEST(ErgodicDecomposition, PeriodicMarkovSplitsIntoShiftedPhases) {
  // period-2 chain on {0,1,2}: 0 → {1,2}, {1,2} → 0
  RealMatrix t(3, 3);
  t << 0, 0.4, 0.6, 1, 0, 0, 1, 0, 0;
  const auto p = ClassicalProcess::markov(t);
  EXPECT_EQ(markov_period(t), 2u);
  const auto dec = ergodic_decomposition_l(p, 2);
  ASSERT_EQ(dec.k, 2u);
  for (std::size_t n = 2; n <= 6; n += 2) {
    const auto mu = marginal(p, n, true).values();
    const auto a = marginal(dec.components[0], n, true).values();
    const auto b = marginal(dec.components[1], n, true).values();
    for (std::size_t w = 0; w < mu.size(); ++w) EXPECT_NEAR(mu[w], 0.5 * (a[w] + b[w]), 1e-12);
  }
  // component 1 is component 0 shifted by one symbol
  EXPECT_LE(max_abs_difference(marginal(shifted(dec.components[0], 1), 4, true).values(),
                               marginal(dec.components[1], 4, true).values()),
            1e-12);
}

TEST(ErgodicDecomposition, ReconstructionAndShiftProperty) {
  for (const Sequence& cycle : {Sequence{0, 1}, Sequence{0, 1, 1}, Sequence{0, 0, 1, 1, 2, 1}}) {
    const auto p = ClassicalProcess::periodic(cycle);
    for (std::size_t l = 1; l <= 4; ++l) {
      const auto dec = ergodic_decomposition_l(p, l);
      const std::size_t n = 2 * l;
      const auto mu = marginal(p, n, true).values();
      std::vector<double> avg(mu.size(), 0.0);
      for (const auto& c : dec.components) {
        const auto v = marginal(c, n, true).values();
        for (std::size_t w = 0; w < v.size(); ++w) avg[w] += v[w] / static_cast<double>(dec.k);
      }
      EXPECT_LE(max_abs_difference(avg, mu), 1e-12);
      for (std::size_t x = 1; x < dec.k; ++x)
        EXPECT_LE(max_abs_difference(marginal(shifted(dec.components[0], x), n, true).values(),
                                     marginal(dec.components[x], n, true).values()),
                  1e-12);
      // each component is l-stationary
      for (const auto& c : dec.components)
        EXPECT_LE(max_abs_difference(marginal(shifted(c, l), n, true).values(),
                                     marginal(c, n, true).values()),
                  1e-12);
    }
  }
}

TEST(ErgodicDecomposition, MixtureIsNotImplemented) {
  const auto p = ClassicalProcess::mixture(
      {0.5, 0.5}, {ClassicalProcess::iid({0.9, 0.1}), ClassicalProcess::iid({0.5, 0.5})});
  EXPECT_THROW(ergodic_decomposition_l(p, 2), NotImplementedError);
}

TEST(HighEntropyComponents, Examples) {
  const auto iid = ClassicalProcess::iid({0.9, 0.1});
  const auto dec_iid = ergodic_decomposition_l(iid, 1);
  EXPECT_TRUE(high_entropy_components(dec_iid, h2(0.1), 1.0 - h2(0.1) + 0.01, 4).empty());

  const auto per = ClassicalProcess::periodic({0, 1, 1});
  EXPECT_TRUE(high_entropy_components(ergodic_decomposition_l(per, 3), 0.0, 0.1, 3).empty());

  ErgodicDecomposition mixed;
  mixed.l = 2;
  mixed.k = 2;
  mixed.components = {ClassicalProcess::periodic({0, 1}), ClassicalProcess::iid({0.5, 0.5})};
  const auto idx = high_entropy_components(mixed, 0.3, 0.2, 4);
  ASSERT_EQ(idx.size(), 1u);
  EXPECT_EQ(idx[0], 1u);
}

// E[f(X_0..X_{m-1}) g(X_i..X_{i+m-1})] by summing the joint law of length i + m.
double correlation_oracle(const ClassicalProcess& p, const std::vector<double>& f,
                          const std::vector<double>& g, std::size_t m, std::size_t i) {
  const std::size_t L = p.alphabet_size();
  const auto mu = marginal(p, i + m, true).values();
  double out = 0.0;
  for (std::uint64_t idx = 0; idx < mu.size(); ++idx) {
    const auto s = index_to_sequence(idx, L, i + m);
    std::uint64_t a = 0, b = 0;
    for (std::size_t j = 0; j < m; ++j) {
      a = a * L + s[j];
      b = b * L + s[i + j];
    }
    out += mu[idx] * f[a] * g[b];
  }
  return out;
}

TEST(BlockCorrelations, MatchBruteForceForEveryKind) {
  Rng rng(27);
  for (const auto& p : process_zoo(rng)) {
    for (std::size_t m = 1; m <= 2; ++m) {
      const std::size_t words = sequence_count(p.alphabet_size(), m);
      std::vector<double> f(words), g(words);
      for (auto& x : f) x = testing::uniform_real(rng, -1, 1);
      for (auto& x : g) x = testing::uniform_real(rng, -1, 1);
      const std::size_t N = p.alphabet_size() == 2 ? 8 : 5;
      const auto terms = block_correlations(p, f, g, m, N);
      ASSERT_EQ(terms.size(), N - m + 1);
      for (std::size_t i = m; i <= N; ++i)
        EXPECT_NEAR(terms[i - m], correlation_oracle(p, f, g, m, i), 1e-12)
            << p.kind_name() << " m=" << m << " i=" << i;
    }
  }
}

}  // namespace
}  // namespace uqc
