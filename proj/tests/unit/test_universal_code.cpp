#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"
#include "uqc/universal_code.hpp"

namespace uqc {
namespace {

using testing::binomial;
using testing::for_all;

// n·H_k of the cyclic sequence, straight from the counting definition.
double cyclic_entropy_oracle(const Sequence& s, std::size_t L, std::size_t k) {
  const std::size_t n = s.size();
  std::map<Sequence, double> ctx;
  std::map<std::pair<Sequence, Symbol>, double> pair;
  for (std::size_t j = 0; j < n; ++j) {
    Sequence c;
    for (std::size_t u = k; u > 0; --u) c.push_back(s[(j + n * k - u) % n]);
    ctx[c] += 1;
    pair[{c, s[j]}] += 1;
  }
  (void)L;
  double h = 0.0;
  for (const auto& [key, v] : pair) h -= v * std::log2(v / ctx[key.first]);
  return h;
}

// Members of G(L, R, n) by sorting all L^n sequences on (entropy, index).
std::vector<std::uint64_t> code_oracle(std::size_t L, double R, std::size_t n, std::size_t k) {
  const auto total = sequence_count(L, n);
  std::vector<std::pair<long long, std::uint64_t>> keyed;
  for (std::uint64_t idx = 0; idx < total; ++idx)
    keyed.emplace_back(std::llround(cyclic_entropy_oracle(index_to_sequence(idx, L, n), L, k) * 1e6),
                       idx);
  std::sort(keyed.begin(), keyed.end());
  const auto size =
      std::min<std::uint64_t>(total, std::uint64_t{1} << static_cast<std::size_t>(
                                                             std::floor(n * R + 1e-9)));
  std::vector<std::uint64_t> out;
  for (std::uint64_t j = 0; j < size; ++j) out.push_back(keyed[j].second);
  std::sort(out.begin(), out.end());
  return out;
}

// μ(G) for Bernoulli(1 - theta) (P(1) = theta), k = 0: whole weight classes by
// binomial sums, the partial class group by brute-force lexicographic count.
double bernoulli_measure_oracle(double theta, std::size_t n, double R) {
  const double size = std::ldexp(1.0, static_cast<int>(std::floor(n * R + 1e-9)));
  // weight classes w and n - w share an entropy, and h(w/n) increases toward n/2
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t w = 0; 2 * w <= n; ++w)
    groups.push_back(2 * w == n ? std::vector<std::size_t>{w} : std::vector<std::size_t>{w, n - w});
  auto weight_prob = [&](std::size_t w) {
    return std::pow(theta, static_cast<double>(w)) * std::pow(1 - theta, static_cast<double>(n - w));
  };
  double taken = 0.0, mu = 0.0;
  for (const auto& g : groups) {
    double count = 0.0;
    for (auto w : g) count += binomial(n, w);
    if (taken + count <= size) {
      taken += count;
      for (auto w : g) mu += binomial(n, w) * weight_prob(w);
      continue;
    }
    // partial group: lexicographically first members
    double remaining = size - taken;
    const std::set<std::size_t> weights(g.begin(), g.end());
    for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << n) && remaining > 0; ++idx) {
      const auto w = static_cast<std::size_t>(__builtin_popcountll(idx));
      if (weights.count(w) == 0) continue;
      mu += weight_prob(w);
      remaining -= 1;
    }
    break;
  }
  return mu;
}

TEST(BuildCode, FullRateIsEverything) {
  const auto c = build_code(2, 1.0, 3, 0);
  EXPECT_EQ(c.size(), 8u);
  EXPECT_FALSE(c.degenerate());
  EXPECT_EQ(c.members(), (std::vector<std::uint64_t>{0, 1, 2, 3, 4, 5, 6, 7}));
}

TEST(BuildCode, TwoThirdsRateExample) {
  const auto c = build_code(2, 2.0 / 3.0, 3, 0);
  ASSERT_EQ(c.size(), 4u);
  // 000, 111 have entropy 0; then 001, 010 are the lexicographically first 0.918 sequences
  EXPECT_EQ(c.members(), (std::vector<std::uint64_t>{0b000, 0b001, 0b010, 0b111}));
  EXPECT_EQ(c.listing(), "000\n001\n010\n111\n");
  EXPECT_NEAR(empirical_entropy(Sequence{0, 0, 1}, 2, 0), 0.918296, 1e-6);
}

TEST(BuildCode, MatchesSortOracle) {
  for_all(30, 31, [](Rng& rng, std::size_t) {
    const std::size_t L = testing::uniform_index(rng, 2, 3);
    const std::size_t n = testing::uniform_index(rng, 2, L == 2 ? 10 : 6);
    const std::size_t k = testing::uniform_index(rng, 0, 2);
    const double R = testing::uniform_real(rng, 0.1, std::log2(static_cast<double>(L)));
    const auto c = build_code(L, R, n, k);
    EXPECT_EQ(c.members(), code_oracle(L, R, n, k)) << "L=" << L << " n=" << n << " k=" << k;
  });
}

TEST(BuildCode, EntropyKeyMatchesCountingDefinition) {
  for_all(200, 32, [](Rng& rng, std::size_t) {
    const std::size_t L = testing::uniform_index(rng, 2, 4);
    const std::size_t n = testing::uniform_index(rng, 1, 20);
    const std::size_t k = testing::uniform_index(rng, 0, 3);
    Sequence s(n);
    for (auto& x : s) x = testing::uniform_index(rng, 0, L - 1);
    EXPECT_NEAR(empirical_entropy(s, L, k) * n, cyclic_entropy_oracle(s, L, k), 1e-8);
  });
}

TEST(BuildCode, SizeLaw) {
  for_all(40, 33, [](Rng& rng, std::size_t) {
    const std::size_t L = testing::uniform_index(rng, 2, 4);
    const std::size_t n = testing::uniform_index(rng, 1, L == 2 ? 14 : 7);
    const double R = testing::uniform_real(rng, 0.05, std::log2(static_cast<double>(L)));
    const auto c = build_code(L, R, n, testing::uniform_index(rng, 0, 1));
    const std::uint64_t want = std::uint64_t{1} << code_log_size(n, R);
    EXPECT_EQ(c.size(), want);
    EXPECT_EQ(c.members().size(), want);
    EXPECT_FALSE(c.degenerate());
  });
}

TEST(BuildCode, FloorGuardForExactProducts) {
  EXPECT_EQ(code_log_size(3, 2.0 / 3.0), 2u);
  EXPECT_EQ(code_log_size(10, 0.7), 7u);
  EXPECT_EQ(code_log_size(7, 0.5), 3u);
}

TEST(BuildCode, DegenerateWhenRateExceedsAlphabet) {
  const auto c = build_code(2, 1.5, 4, 0);
  EXPECT_TRUE(c.degenerate());
  EXPECT_EQ(c.size(), 16u);
}

TEST(BuildCode, Errors) {
  EXPECT_THROW(build_code(1, 0.5, 4, 0), ValidationError);
  EXPECT_THROW(build_code(2, 0.0, 4, 0), ValidationError);
  EXPECT_THROW(build_code(2, 0.5, 0, 0), ValidationError);
  EXPECT_THROW(build_code(2, 0.5, 30, 1), NotImplementedError);
  EXPECT_THROW(build_code(2, 0.5, 80, 0), SizeError);
}

TEST(CodeMeasure, AllSequencesGiveOne) {
  const auto c = build_code(2, 1.0, 5, 0);
  EXPECT_NEAR(code_measure(ClassicalProcess::markov(RealMatrix{{0.9, 0.1}, {0.2, 0.8}}), c), 1.0,
              1e-12);
}

TEST(CodeMeasure, BernoulliMatchesBinomialOracle) {
  const auto c = build_code(2, 0.8, 10, 0);
  const double mu = code_measure(ClassicalProcess::iid({0.9, 0.1}), c);
  EXPECT_NEAR(mu, bernoulli_measure_oracle(0.1, 10, 0.8), 1e-12);
  // the dense member sum is a second route
  const auto dense = marginal(ClassicalProcess::iid({0.9, 0.1}), 10, true).values();
  double direct = 0.0;
  for (auto idx : c.members()) direct += dense[idx];
  EXPECT_NEAR(mu, direct, 1e-12);
}

TEST(CodeMeasure, PeriodicFirstOrderAdmitsBothPhases) {
  const auto c = build_code(2, 0.5, 4, 1);
  EXPECT_TRUE(c.contains(Sequence{0, 1, 0, 1}));
  EXPECT_TRUE(c.contains(Sequence{1, 0, 1, 0}));
  EXPECT_NEAR(code_measure(ClassicalProcess::periodic({0, 1}), c), 1.0, 1e-15);
}

TEST(CodeMeasure, AlphabetMismatch) {
  EXPECT_THROW(code_measure(ClassicalProcess::iid({0.5, 0.25, 0.25}), build_code(2, 0.5, 4, 0)),
               ValidationError);
}

TEST(PredicateCode, DenseAndPredicateAgreeOnMeasure) {
  // n = 21 is past the dense limit; compare against the binomial oracle
  for (double R : {0.5, 0.6, 0.75}) {
    const auto c = build_code(2, R, 21, 0);
    EXPECT_FALSE(c.is_dense());
    EXPECT_EQ(c.size(), std::uint64_t{1} << code_log_size(21, R));
    EXPECT_NEAR(c.iid_measure(std::vector<double>{0.9, 0.1}), bernoulli_measure_oracle(0.1, 21, R),
                1e-12)
        << R;
  }
}

TEST(PredicateCode, EnumerationAgreesWithPredicate) {
  const auto c = build_code(2, 0.5, 22, 0);
  std::uint64_t count = 0;
  double mass = 0.0;
  long long worst_member = -1;
  const auto p = ClassicalProcess::iid({0.8, 0.2});
  c.for_each_member([&](std::span<const Symbol> s) {
    ++count;
    EXPECT_TRUE(c.contains(s));
    mass += probability(p, s);
    worst_member = std::max(worst_member, static_cast<long long>(empirical_entropy_key(s, 2, 0)));
  });
  EXPECT_EQ(count, c.size());
  EXPECT_NEAR(mass, code_measure(p, c), 1e-12);
  EXPECT_NEAR(mass, c.iid_measure(std::vector<double>{0.8, 0.2}), 1e-12);
  // random non-members never have a strictly smaller key than a member
  Rng rng(34);
  for (int t = 0; t < 2000; ++t) {
    Sequence s(22);
    for (auto& x : s) x = testing::uniform_index(rng, 0, 1);
    if (!c.contains(s)) {
      EXPECT_GE(static_cast<long long>(empirical_entropy_key(s, 2, 0)), worst_member);
    }
  }
}

TEST(CodeMeasure, MonotoneUniversalityCurve) {
  std::vector<double> mu(61, 0.0);
  for (std::size_t n = 10; n <= 60; ++n) {
    mu[n] = build_code(2, 0.8, n, 0).iid_measure(std::vector<double>{0.9, 0.1});
  }
  for (std::size_t n = 20; n <= 60; ++n) EXPECT_GE(mu[n], mu[n - 10] - 1e-12) << n;
  EXPECT_GE(mu[60], 0.99);
}

TEST(CodeMeasure, ConverseForFairCoin) {
  for (std::size_t n = 5; n <= 60; n += 5) {
    const double mu = build_code(2, 0.8, n, 0).iid_measure(std::vector<double>{0.5, 0.5});
    const double bound = std::ldexp(1.0, static_cast<int>(code_log_size(n, 0.8)) - static_cast<int>(n));
    EXPECT_LE(mu, bound * (1 + 1e-12));
    EXPECT_NEAR(mu, bound, 1e-12 * std::max(1.0, bound));
  }
}

TEST(Superblock, IdentityAndCount) {
  const auto c = build_code(2, 0.5, 6, 1);
  const auto same = superblock_code(c, 1);
  EXPECT_EQ(same.members(), c.members());
  const auto r = superblock_code(c, 3);
  EXPECT_EQ(r.alphabet_size(), 8u);
  EXPECT_EQ(r.length(), 2u);
  EXPECT_EQ(r.size(), c.size());
  EXPECT_NEAR(r.rate(), 1.5, 1e-15);
  EXPECT_THROW(superblock_code(c, 4), ValidationError);
}

TEST(Superblock, RegroupingIsBijective) {
  const auto c = build_code(3, 1.0, 4, 0);
  const auto r = superblock_code(c, 2);
  std::set<Sequence> from_fine;
  for (auto idx : c.members()) {
    const auto s = index_to_sequence(idx, 3, 4);
    from_fine.insert(Sequence{s[0] * 3 + s[1], s[2] * 3 + s[3]});
  }
  std::set<Sequence> from_r;
  for (auto idx : r.members()) from_r.insert(index_to_sequence(idx, 9, 2));
  EXPECT_EQ(from_fine, from_r);
}

TEST(Superblock, InclusionAtTheClassicalLevel) {
  // fine: L = 2, n = 4, R = 1/2; direct: L = 4, n = 2, R = 1
  const auto fine = build_code(2, 0.5, 4, 1);
  const auto direct = build_code(4, 1.0, 2, 0);
  const auto report = superblock_inclusion(fine, 2, direct);
  EXPECT_EQ(fine.size(), 4u);
  EXPECT_EQ(direct.size(), 4u);
  EXPECT_TRUE(report.regrouped_within_direct());
  EXPECT_TRUE(report.equal());
}

}  // namespace
}  // namespace uqc
