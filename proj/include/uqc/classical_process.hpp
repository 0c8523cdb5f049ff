#pragma once

// Finite-alphabet stationary processes with exact marginals.
//
// Sequences are indexed big-endian: symbol 0 of a length-n sequence is the
// most significant base-L digit, so index order is lexicographic order and
// regrouping a length l·j sequence into l-blocks leaves its index unchanged.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "uqc/error.hpp"
#include "uqc/operator.hpp"

namespace uqc {

using Symbol = std::size_t;
using Sequence = std::vector<Symbol>;

inline constexpr std::uint64_t kDenseDistributionLimit = std::uint64_t{1} << 20;
inline constexpr double kProbabilityTolerance = 1e-12;

// ---------------------------------------------------------------------------
// sequence indexing

/// L^n, or SizeError when it exceeds `cap`.
inline std::uint64_t sequence_count(std::size_t alphabet, std::size_t n,
                                    std::uint64_t cap = std::uint64_t{1} << 62) {
  std::uint64_t out = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (out > cap / alphabet)
      throw SizeError(std::to_string(alphabet) + "^" + std::to_string(n) +
                      " sequences exceed the enumeration cap");
    out *= alphabet;
  }
  return out;
}

inline Sequence index_to_sequence(std::uint64_t index, std::size_t alphabet, std::size_t n) {
  Sequence s(n);
  for (std::size_t j = n; j-- > 0;) {
    s[j] = static_cast<Symbol>(index % alphabet);
    index /= alphabet;
  }
  return s;
}

inline std::uint64_t sequence_to_index(std::span<const Symbol> s, std::size_t alphabet) {
  std::uint64_t idx = 0;
  for (auto x : s) idx = idx * alphabet + x;
  return idx;
}

/// Shannon entropy in bits of a probability vector, 0·log 0 = 0.
inline double entropy_bits(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

inline double binary_entropy(double p) {
  const double v[2] = {p, 1.0 - p};
  return entropy_bits(v);
}

// ---------------------------------------------------------------------------
// process kinds

class ClassicalProcess;

struct IidProcess {
  std::vector<double> probs;
};

struct MarkovProcess {
  RealMatrix transition;        ///< row-stochastic
  std::vector<double> initial;  ///< distribution of the first symbol
  bool custom_initial = false;  ///< true when not derived as the stationary law
};

/// Deterministic cycle started at a uniformly random phase from `phases`
/// (all phases for the stationary process).
struct PeriodicProcess {
  Sequence cycle;
  std::vector<std::size_t> phases;
  bool all_phases() const { return phases.size() == cycle.size(); }
};

struct MixtureProcess {
  std::vector<double> weights;
  std::vector<ClassicalProcess> components;
};

namespace detail {

inline void require_probability_vector(std::span<const double> p, const char* what) {
  if (p.empty()) throw ValidationError(std::string(what) + ": empty probability vector");
  double total = 0.0;
  for (double x : p) {
    if (!std::isfinite(x) || x < 0.0)
      throw ValidationError(std::string(what) + ": negative or non-finite probability");
    total += x;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance)
    throw ValidationError(std::string(what) + ": probabilities sum to " + std::to_string(total));
}

inline std::size_t primitive_period(const Sequence& cycle) {
  const std::size_t t = cycle.size();
  for (std::size_t p = 1; p < t; ++p) {
    if (t % p != 0) continue;
    bool ok = true;
    for (std::size_t j = 0; j + p < t && ok; ++j) ok = cycle[j] == cycle[j + p];
    if (ok) return p;
  }
  return t;
}

}  // namespace detail

/// Stationary law of a row-stochastic matrix; error unless unique.
inline std::vector<double> stationary_distribution(const RealMatrix& transition) {
  const Eigen::Index n = transition.rows();
  RealMatrix a = transition.transpose() - RealMatrix::Identity(n, n);
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  Eigen::FullPivLU<RealMatrix> lu(a);
  if (lu.rank() < n)
    throw ValidationError("Markov chain has no unique stationary distribution");
  const Eigen::VectorXd pi = lu.solve(b);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::max(0.0, pi(i));
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  for (auto& x : out) x /= total;
  return out;
}

class ClassicalProcess {
 public:
  using Kind = std::variant<IidProcess, MarkovProcess, PeriodicProcess, MixtureProcess>;

  static ClassicalProcess iid(std::vector<double> probs) {
    detail::require_probability_vector(probs, "IID process");
    const auto size = probs.size();
    return ClassicalProcess(size, IidProcess{std::move(probs)});
  }

  /// Markov chain started at its stationary distribution.
  static ClassicalProcess markov(RealMatrix transition) {
    check_transition(transition);
    auto pi = stationary_distribution(transition);
    const auto size = static_cast<std::size_t>(transition.rows());
    return ClassicalProcess(size, MarkovProcess{std::move(transition), std::move(pi), false});
  }

  /// Markov chain with an explicit initial law (may be non-stationary).
  static ClassicalProcess markov(RealMatrix transition, std::vector<double> initial) {
    check_transition(transition);
    detail::require_probability_vector(initial, "Markov initial distribution");
    if (initial.size() != static_cast<std::size_t>(transition.rows()))
      throw ValidationError("Markov initial distribution has wrong length");
    const auto size = initial.size();
    return ClassicalProcess(size, MarkovProcess{std::move(transition), std::move(initial), true});
  }

  /// Stationary periodic process: the cycle started at a uniform phase.
  /// `alphabet` 0 means max symbol + 1.
  static ClassicalProcess periodic(Sequence cycle, std::size_t alphabet = 0) {
    if (cycle.empty()) throw ValidationError("periodic process: empty cycle");
    cycle.resize(detail::primitive_period(cycle));
    std::vector<std::size_t> phases(cycle.size());
    std::iota(phases.begin(), phases.end(), std::size_t{0});
    return periodic_phases(std::move(cycle), std::move(phases), alphabet);
  }

  /// Periodic process with the starting phase uniform over a subset.
  static ClassicalProcess periodic_phases(Sequence cycle, std::vector<std::size_t> phases,
                                          std::size_t alphabet = 0) {
    if (cycle.empty()) throw ValidationError("periodic process: empty cycle");
    const Symbol top = *std::max_element(cycle.begin(), cycle.end());
    if (alphabet == 0) alphabet = top + 1;
    if (top >= alphabet) throw ValidationError("periodic process: symbol outside alphabet");
    std::sort(phases.begin(), phases.end());
    phases.erase(std::unique(phases.begin(), phases.end()), phases.end());
    if (phases.empty() || phases.back() >= cycle.size())
      throw ValidationError("periodic process: invalid phase set");
    return ClassicalProcess(alphabet, PeriodicProcess{std::move(cycle), std::move(phases)});
  }

  static ClassicalProcess mixture(std::vector<double> weights,
                                  std::vector<ClassicalProcess> components) {
    detail::require_probability_vector(weights, "mixture weights");
    if (weights.size() != components.size())
      throw ValidationError("mixture: weight and component counts differ");
    const auto size = components.front().alphabet_size();
    for (const auto& c : components)
      if (c.alphabet_size() != size)
        throw ValidationError("mixture: components have different alphabets");
    return ClassicalProcess(size, MixtureProcess{std::move(weights), std::move(components)});
  }

  std::size_t alphabet_size() const { return alphabet_; }
  const Kind& kind() const { return kind_; }

  template <class T>
  const T* as() const {
    return std::get_if<T>(&kind_);
  }

  std::string kind_name() const {
    static const char* names[] = {"iid", "markov", "periodic", "mixture"};
    return names[kind_.index()];
  }

 private:
  ClassicalProcess(std::size_t alphabet, Kind kind) : alphabet_(alphabet), kind_(std::move(kind)) {}

  static void check_transition(const RealMatrix& p) {
    if (p.rows() == 0 || p.rows() != p.cols())
      throw ValidationError("Markov transition matrix must be square and non-empty");
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      std::vector<double> row(p.cols());
      for (Eigen::Index j = 0; j < p.cols(); ++j) row[j] = p(i, j);
      detail::require_probability_vector(row, "Markov transition row");
    }
  }

  std::size_t alphabet_;
  Kind kind_;
};

// ---------------------------------------------------------------------------
// probabilities and marginals

/// Probability of the cylinder set {X_0..X_{n-1} = seq}.
inline double probability(const ClassicalProcess& p, std::span<const Symbol> seq) {
  for (auto x : seq)
    if (x >= p.alphabet_size()) return 0.0;
  if (const auto* iid = p.as<IidProcess>()) {
    double out = 1.0;
    for (auto x : seq) out *= iid->probs[x];
    return out;
  }
  if (const auto* mk = p.as<MarkovProcess>()) {
    if (seq.empty()) return 1.0;
    double out = mk->initial[seq[0]];
    for (std::size_t j = 1; j < seq.size() && out != 0.0; ++j)
      out *= mk->transition(static_cast<Eigen::Index>(seq[j - 1]),
                            static_cast<Eigen::Index>(seq[j]));
    return out;
  }
  if (const auto* per = p.as<PeriodicProcess>()) {
    const std::size_t t = per->cycle.size();
    std::size_t hits = 0;
    for (auto phase : per->phases) {
      bool match = true;
      for (std::size_t j = 0; j < seq.size() && match; ++j)
        match = per->cycle[(phase + j) % t] == seq[j];
      hits += match ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(per->phases.size());
  }
  const auto& mix = *p.as<MixtureProcess>();
  double out = 0.0;
  for (std::size_t c = 0; c < mix.components.size(); ++c)
    out += mix.weights[c] * probability(mix.components[c], seq);
  return out;
}

/// Law of the first n symbols: dense when L^n ≤ 2^20, evaluator otherwise.
class Distribution {
 public:
  using Evaluator = std::function<double(std::span<const Symbol>)>;

  Distribution(std::size_t alphabet, std::size_t length, std::vector<double> dense)
      : alphabet_(alphabet), length_(length), dense_(std::move(dense)) {}
  Distribution(std::size_t alphabet, std::size_t length, Evaluator evaluator)
      : alphabet_(alphabet), length_(length), evaluator_(std::move(evaluator)) {}

  std::size_t alphabet_size() const { return alphabet_; }
  std::size_t length() const { return length_; }
  bool is_dense() const { return !evaluator_; }

  const std::vector<double>& values() const {
    if (!is_dense()) throw SizeError("distribution is too large for dense access");
    return dense_;
  }

  double operator()(std::span<const Symbol> seq) const {
    if (seq.size() != length_) throw ValidationError("sequence has wrong length");
    if (is_dense()) return dense_[sequence_to_index(seq, alphabet_)];
    return evaluator_(seq);
  }

  double at(std::uint64_t index) const {
    if (is_dense()) return dense_.at(index);
    const auto seq = index_to_sequence(index, alphabet_, length_);
    return evaluator_(seq);
  }

 private:
  std::size_t alphabet_;
  std::size_t length_;
  std::vector<double> dense_;
  Evaluator evaluator_;
};

namespace detail {

inline std::vector<double> dense_marginal(const ClassicalProcess& p, std::size_t n) {
  const std::size_t L = p.alphabet_size();
  const std::uint64_t total = sequence_count(L, n, kDenseDistributionLimit);
  if (const auto* iid = p.as<IidProcess>()) {
    std::vector<double> out{1.0};
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<double> next(out.size() * L);
      for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t a = 0; a < L; ++a) next[i * L + a] = out[i] * iid->probs[a];
      out.swap(next);
    }
    return out;
  }
  if (const auto* mk = p.as<MarkovProcess>()) {
    if (n == 0) return {1.0};
    std::vector<double> out = mk->initial;
    for (std::size_t s = 1; s < n; ++s) {
      std::vector<double> next(out.size() * L);
      for (std::size_t i = 0; i < out.size(); ++i) {
        const auto last = static_cast<Eigen::Index>(i % L);
        for (std::size_t a = 0; a < L; ++a)
          next[i * L + a] = out[i] * mk->transition(last, static_cast<Eigen::Index>(a));
      }
      out.swap(next);
    }
    return out;
  }
  if (const auto* per = p.as<PeriodicProcess>()) {
    std::vector<double> out(total, 0.0);
    const double w = 1.0 / static_cast<double>(per->phases.size());
    const std::size_t t = per->cycle.size();
    for (auto phase : per->phases) {
      std::uint64_t idx = 0;
      for (std::size_t j = 0; j < n; ++j) idx = idx * L + per->cycle[(phase + j) % t];
      out[idx] += w;
    }
    return out;
  }
  const auto& mix = *p.as<MixtureProcess>();
  std::vector<double> out(total, 0.0);
  for (std::size_t c = 0; c < mix.components.size(); ++c) {
    const auto part = dense_marginal(mix.components[c], n);
    for (std::size_t i = 0; i < total; ++i) out[i] += mix.weights[c] * part[i];
  }
  return out;
}

}  // namespace detail

/// Marginal law of X_0..X_{n-1}. With `require_dense`, an oversize request
/// throws instead of falling back to an evaluator.
inline Distribution marginal(const ClassicalProcess& p, std::size_t n, bool require_dense = false) {
  const std::size_t L = p.alphabet_size();
  bool fits = true;
  try {
    sequence_count(L, n, kDenseDistributionLimit);
  } catch (const SizeError&) {
    fits = false;
  }
  if (fits) return Distribution(L, n, detail::dense_marginal(p, n));
  if (require_dense)
    throw SizeError("dense marginal of length " + std::to_string(n) + " exceeds 2^20 entries");
  auto shared = std::make_shared<const ClassicalProcess>(p);
  return Distribution(L, n, [shared](std::span<const Symbol> s) { return probability(*shared, s); });
}

/// Sums out the last `i` symbols of a dense distribution.
inline std::vector<double> marginalize_last(const Distribution& d, std::size_t i) {
  if (i > d.length()) throw ValidationError("marginalize_last: too many symbols");
  const auto& v = d.values();
  const std::uint64_t block = sequence_count(d.alphabet_size(), i);
  std::vector<double> out(v.size() / block, 0.0);
  for (std::size_t idx = 0; idx < v.size(); ++idx) out[idx / block] += v[idx];
  return out;
}

/// Sums out the first `i` symbols of a dense distribution.
inline std::vector<double> marginalize_first(const Distribution& d, std::size_t i) {
  if (i > d.length()) throw ValidationError("marginalize_first: too many symbols");
  const auto& v = d.values();
  const std::uint64_t keep = sequence_count(d.alphabet_size(), d.length() - i);
  std::vector<double> out(keep, 0.0);
  for (std::size_t idx = 0; idx < v.size(); ++idx) out[idx % keep] += v[idx];
  return out;
}

inline double max_abs_difference(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("vectors differ in length");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

/// max |Σ_{last i} μ_{n+i} − μ_n|
inline double consistency_deviation(const ClassicalProcess& p, std::size_t n, std::size_t i) {
  const auto big = marginal(p, n + i, true);
  const auto small = marginal(p, n, true);
  return max_abs_difference(marginalize_last(big, i), small.values());
}

/// max |Σ_{first i} μ_{n+i} − μ_n|
inline double stationarity_deviation(const ClassicalProcess& p, std::size_t n, std::size_t i) {
  const auto big = marginal(p, n + i, true);
  const auto small = marginal(p, n, true);
  return max_abs_difference(marginalize_first(big, i), small.values());
}

inline double shannon_entropy(const Distribution& d) { return entropy_bits(d.values()); }

// ---------------------------------------------------------------------------
// entropy rate

struct EntropyRate {
  double bits = 0.0;
  bool non_ergodic = false;  ///< mixtures: value is the weighted component average
};

inline EntropyRate entropy_rate(const ClassicalProcess& p) {
  if (const auto* iid = p.as<IidProcess>()) return {entropy_bits(iid->probs), false};
  if (const auto* mk = p.as<MarkovProcess>()) {
    const auto n = mk->transition.rows();
    Eigen::Map<const Eigen::RowVectorXd> init(mk->initial.data(), n);
    const double drift = (init * mk->transition - init).cwiseAbs().maxCoeff();
    if (drift > kProbabilityTolerance)
      throw ValidationError("entropy_rate: Markov initial distribution is not stationary");
    double h = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::vector<double> row(static_cast<std::size_t>(n));
      for (Eigen::Index j = 0; j < n; ++j) row[j] = mk->transition(i, j);
      h += mk->initial[i] * entropy_bits(row);
    }
    return {h, false};
  }
  if (p.as<PeriodicProcess>()) return {0.0, false};
  const auto& mix = *p.as<MixtureProcess>();
  double h = 0.0;
  for (std::size_t c = 0; c < mix.components.size(); ++c)
    h += mix.weights[c] * entropy_rate(mix.components[c]).bits;
  return {h, true};
}

// ---------------------------------------------------------------------------
// shifts, blocks, decompositions

/// Law of X_x, X_{x+1}, ...
inline ClassicalProcess shifted(const ClassicalProcess& p, std::size_t x) {
  if (p.as<IidProcess>() || x == 0) return p;
  if (const auto* mk = p.as<MarkovProcess>()) {
    if (!mk->custom_initial) return p;
    const auto n = mk->transition.rows();
    Eigen::RowVectorXd v = Eigen::Map<const Eigen::RowVectorXd>(mk->initial.data(), n);
    for (std::size_t s = 0; s < x; ++s) v = v * mk->transition;
    std::vector<double> init(v.data(), v.data() + n);
    const double total = std::accumulate(init.begin(), init.end(), 0.0);
    for (auto& w : init) w /= total;
    return ClassicalProcess::markov(mk->transition, std::move(init));
  }
  if (const auto* per = p.as<PeriodicProcess>()) {
    std::vector<std::size_t> phases;
    for (auto ph : per->phases) phases.push_back((ph + x) % per->cycle.size());
    return ClassicalProcess::periodic_phases(per->cycle, std::move(phases), p.alphabet_size());
  }
  const auto& mix = *p.as<MixtureProcess>();
  std::vector<ClassicalProcess> comps;
  for (const auto& c : mix.components) comps.push_back(shifted(c, x));
  return ClassicalProcess::mixture(mix.weights, std::move(comps));
}

/// Process of l-blocks over the alphabet L^l (supersymbol = big-endian index).
inline ClassicalProcess block_process(const ClassicalProcess& p, std::size_t l) {
  if (l == 0) throw ValidationError("block length must be positive");
  if (l == 1) return p;
  const std::size_t L = p.alphabet_size();
  const auto big = static_cast<std::size_t>(sequence_count(L, l, std::uint64_t{1} << 16));
  if (p.as<IidProcess>()) return ClassicalProcess::iid(detail::dense_marginal(p, l));
  if (const auto* mk = p.as<MarkovProcess>()) {
    if (big > 4096) throw SizeError("blocked Markov chain has too many states");
    RealMatrix t(big, big);
    std::vector<double> within(big);
    for (std::size_t b = 0; b < big; ++b) {
      const auto s = index_to_sequence(b, L, l);
      double w = 1.0;
      for (std::size_t j = 1; j < l; ++j)
        w *= mk->transition(static_cast<Eigen::Index>(s[j - 1]), static_cast<Eigen::Index>(s[j]));
      within[b] = w;
    }
    for (std::size_t a = 0; a < big; ++a) {
      const auto last = static_cast<Eigen::Index>(a % L);
      for (std::size_t b = 0; b < big; ++b) {
        const auto first = static_cast<Eigen::Index>(b / (big / L));
        t(a, b) = mk->transition(last, first) * within[b];
      }
    }
    // rows sum to one up to rounding; renormalise so the validator accepts them
    for (Eigen::Index a = 0; a < t.rows(); ++a) t.row(a) /= t.row(a).sum();
    auto init = detail::dense_marginal(p, l);
    return ClassicalProcess::markov(std::move(t), std::move(init));
  }
  if (const auto* per = p.as<PeriodicProcess>()) {
    const std::size_t t = per->cycle.size();
    const std::size_t g = std::gcd(t, l);
    const std::size_t block_period = t / g;
    std::vector<double> weights;
    std::vector<ClassicalProcess> comps;
    for (std::size_t r = 0; r < g; ++r) {
      Sequence cycle(block_period);
      for (std::size_t j = 0; j < block_period; ++j) {
        std::uint64_t idx = 0;
        for (std::size_t u = 0; u < l; ++u) idx = idx * L + per->cycle[(r + j * l + u) % t];
        cycle[j] = static_cast<Symbol>(idx);
      }
      std::vector<std::size_t> phases;
      for (std::size_t j = 0; j < block_period; ++j) {
        const std::size_t phase = (r + j * l) % t;
        if (std::binary_search(per->phases.begin(), per->phases.end(), phase))
          phases.push_back(j);
      }
      if (phases.empty()) continue;
      weights.push_back(static_cast<double>(phases.size()) /
                        static_cast<double>(per->phases.size()));
      comps.push_back(ClassicalProcess::periodic_phases(std::move(cycle), std::move(phases), big));
    }
    if (comps.size() == 1) return comps.front();
    return ClassicalProcess::mixture(std::move(weights), std::move(comps));
  }
  const auto& mix = *p.as<MixtureProcess>();
  std::vector<ClassicalProcess> comps;
  for (const auto& c : mix.components) comps.push_back(block_process(c, l));
  return ClassicalProcess::mixture(mix.weights, std::move(comps));
}

struct ErgodicDecomposition {
  std::size_t l = 1;
  std::size_t k = 1;
  std::vector<ClassicalProcess> components;  ///< p = (1/k) Σ components
};

namespace detail {

inline std::vector<std::vector<std::size_t>> support_graph(const RealMatrix& p) {
  std::vector<std::vector<std::size_t>> adj(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      if (p(i, j) > 0.0) adj[i].push_back(static_cast<std::size_t>(j));
  return adj;
}

inline std::vector<long> bfs_levels(const std::vector<std::vector<std::size_t>>& adj) {
  std::vector<long> level(adj.size(), -1);
  std::vector<std::size_t> queue{0};
  level[0] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const auto u = queue[head];
    for (auto v : adj[u])
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
  }
  return level;
}

}  // namespace detail

/// Whether the support graph of the chain is strongly connected.
inline bool is_irreducible(const RealMatrix& transition) {
  const auto adj = detail::support_graph(transition);
  const RealMatrix reversed = transition.transpose();
  const auto radj = detail::support_graph(reversed);
  const auto fwd = detail::bfs_levels(adj);
  const auto bwd = detail::bfs_levels(radj);
  for (std::size_t i = 0; i < adj.size(); ++i)
    if (fwd[i] < 0 || bwd[i] < 0) return false;
  return true;
}

/// Period of an irreducible chain (gcd of cycle lengths).
inline std::size_t markov_period(const RealMatrix& transition) {
  const auto adj = detail::support_graph(transition);
  const auto level = detail::bfs_levels(adj);
  long g = 0;
  for (std::size_t u = 0; u < adj.size(); ++u)
    for (auto v : adj[u]) g = std::gcd(g, std::labs(level[u] + 1 - level[v]));
  return static_cast<std::size_t>(g == 0 ? 1 : g);
}

/// Decomposition of a stationary process into k l-ergodic components, each the
/// shift of component 0. Implemented for IID, periodic and irreducible Markov.
inline ErgodicDecomposition ergodic_decomposition_l(const ClassicalProcess& p, std::size_t l) {
  if (l == 0) throw ValidationError("block length must be positive");
  ErgodicDecomposition out;
  out.l = l;
  if (p.as<IidProcess>()) {
    out.components = {p};
    return out;
  }
  if (const auto* per = p.as<PeriodicProcess>()) {
    if (!per->all_phases())
      throw NotImplementedError("ergodic decomposition needs a stationary periodic process");
    const std::size_t t = per->cycle.size();
    out.k = std::gcd(t, l);
    for (std::size_t x = 0; x < out.k; ++x) {
      std::vector<std::size_t> phases;
      for (std::size_t ph = x; ph < t; ph += out.k) phases.push_back(ph);
      out.components.push_back(
          ClassicalProcess::periodic_phases(per->cycle, std::move(phases), p.alphabet_size()));
    }
    return out;
  }
  if (const auto* mk = p.as<MarkovProcess>()) {
    if (!is_irreducible(mk->transition))
      throw NotImplementedError("ergodic decomposition of a reducible Markov chain");
    const auto adj = detail::support_graph(mk->transition);
    const auto level = detail::bfs_levels(adj);
    const std::size_t period = markov_period(mk->transition);
    out.k = std::gcd(period, l);
    const auto pi = stationary_distribution(mk->transition);
    for (std::size_t x = 0; x < out.k; ++x) {
      std::vector<double> init(pi.size(), 0.0);
      for (std::size_t s = 0; s < pi.size(); ++s)
        if (static_cast<std::size_t>(level[s]) % out.k == x) init[s] = pi[s];
      const double total = std::accumulate(init.begin(), init.end(), 0.0);
      for (auto& w : init) w /= total;
      if (out.k == 1)
        out.components.push_back(p);
      else
        out.components.push_back(ClassicalProcess::markov(mk->transition, std::move(init)));
    }
    return out;
  }
  throw NotImplementedError("ergodic decomposition of a mixture process");
}

/// Indices x with H(component_x on block_len symbols)/block_len ≥ s + eta.
inline std::vector<std::size_t> high_entropy_components(const ErgodicDecomposition& decomposition,
                                                        double s, double eta,
                                                        std::size_t block_len) {
  std::vector<std::size_t> out;
  for (std::size_t x = 0; x < decomposition.components.size(); ++x) {
    const double h =
        shannon_entropy(marginal(decomposition.components[x], block_len, true)) /
        static_cast<double>(block_len);
    if (h >= s + eta - 1e-12) out.push_back(x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// two-block correlations

/// E[f(X_0..X_{m-1}) · g(X_i..X_{i+m-1})] for i = m..N, with f, g indexed by
/// big-endian m-sequences. Cost is linear in N for every process kind.
inline std::vector<double> block_correlations(const ClassicalProcess& p,
                                              std::span<const double> f,
                                              std::span<const double> g, std::size_t m,
                                              std::size_t N) {
  const std::size_t L = p.alphabet_size();
  const std::uint64_t words = sequence_count(L, m, kDenseDistributionLimit);
  if (f.size() != words || g.size() != words)
    throw ValidationError("block_correlations: observable length is not L^m");
  if (N < m) throw ValidationError("block_correlations: need N ≥ m");
  std::vector<double> out;
  out.reserve(N - m + 1);
  if (p.as<IidProcess>()) {
    const auto mu = marginal(p, m, true).values();
    double ef = 0.0, eg = 0.0;
    for (std::size_t w = 0; w < words; ++w) {
      ef += mu[w] * f[w];
      eg += mu[w] * g[w];
    }
    out.assign(N - m + 1, ef * eg);
    return out;
  }
  if (const auto* mk = p.as<MarkovProcess>()) {
    const auto mu = marginal(p, m, true).values();
    const auto n = static_cast<Eigen::Index>(L);
    Eigen::RowVectorXd fv = Eigen::RowVectorXd::Zero(n);
    Eigen::VectorXd gv = Eigen::VectorXd::Zero(n);
    for (std::size_t w = 0; w < words; ++w) {
      fv(static_cast<Eigen::Index>(w % L)) += mu[w] * f[w];
      const auto s = index_to_sequence(w, L, m);
      double within = 1.0;
      for (std::size_t j = 1; j < m; ++j)
        within *= mk->transition(static_cast<Eigen::Index>(s[j - 1]),
                                 static_cast<Eigen::Index>(s[j]));
      gv(static_cast<Eigen::Index>(s[0])) += within * g[w];
    }
    Eigen::RowVectorXd v = fv * mk->transition;  // gap i − m + 1 = 1 at i = m
    for (std::size_t i = m; i <= N; ++i) {
      out.push_back(v.dot(gv.transpose()));
      v = v * mk->transition;
    }
    return out;
  }
  if (const auto* per = p.as<PeriodicProcess>()) {
    const std::size_t t = per->cycle.size();
    std::vector<double> fval(t), gval(t);
    for (std::size_t ph = 0; ph < t; ++ph) {
      std::uint64_t idx = 0;
      for (std::size_t j = 0; j < m; ++j) idx = idx * L + per->cycle[(ph + j) % t];
      fval[ph] = f[idx];
      gval[ph] = g[idx];
    }
    const double w = 1.0 / static_cast<double>(per->phases.size());
    for (std::size_t i = m; i <= N; ++i) {
      double acc = 0.0;
      for (auto ph : per->phases) acc += fval[ph] * gval[(ph + i) % t];
      out.push_back(w * acc);
    }
    return out;
  }
  const auto& mix = *p.as<MixtureProcess>();
  out.assign(N - m + 1, 0.0);
  for (std::size_t c = 0; c < mix.components.size(); ++c) {
    const auto part = block_correlations(mix.components[c], f, g, m, N);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += mix.weights[c] * part[i];
  }
  return out;
}

/// E[f(X_0..X_{m-1})]
inline double block_expectation(const ClassicalProcess& p, std::span<const double> f,
                                std::size_t m) {
  const auto mu = marginal(p, m, true).values();
  if (f.size() != mu.size()) throw ValidationError("block_expectation: length mismatch");
  double out = 0.0;
  for (std::size_t w = 0; w < mu.size(); ++w) out += mu[w] * f[w];
  return out;
}

}  // namespace uqc
