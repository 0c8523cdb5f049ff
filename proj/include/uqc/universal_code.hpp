#pragma once

// Fixed-rate block codes built from empirical types: the members of
// G(L, R, n) are the first 2^⌊nR⌋ sequences of {0..L-1}^n ordered by cyclic
// k-th order empirical conditional entropy, ties broken lexicographically.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "uqc/classical_process.hpp"
#include "uqc/error.hpp"

namespace uqc {

using Count = unsigned __int128;

/// Scale of the integer ordering key (n·H quantised to 1e-9 bits).
inline constexpr double kKeyScale = 1e9;
inline constexpr std::uint64_t kDenseCodeLimit = std::uint64_t{1} << 20;
inline constexpr std::uint64_t kEnumerationLimit = std::uint64_t{1} << 22;

namespace detail {

inline double xlog2x(std::uint64_t x) {
  return x == 0 ? 0.0 : static_cast<double>(x) * std::log2(static_cast<double>(x));
}

/// n·H from context counts and (context, symbol) counts. Both lists are
/// summed in sorted order so equal multisets give bit-identical keys.
inline std::int64_t empirical_key(std::vector<std::uint64_t> contexts,
                                  std::vector<std::uint64_t> pairs) {
  std::sort(contexts.begin(), contexts.end());
  std::sort(pairs.begin(), pairs.end());
  double acc = 0.0;
  for (auto c : contexts) acc += xlog2x(c);
  for (auto c : pairs) acc -= xlog2x(c);
  return std::llround(acc * kKeyScale);
}

inline std::int64_t type_key(std::span<const std::uint64_t> counts, std::size_t n) {
  std::vector<std::uint64_t> pairs;
  for (auto c : counts)
    if (c > 0) pairs.push_back(c);
  return empirical_key({n}, std::move(pairs));
}

inline const std::vector<std::vector<Count>>& pascal() {
  static const auto table = [] {
    std::vector<std::vector<Count>> t(65);
    for (std::size_t n = 0; n <= 64; ++n) {
      t[n].assign(n + 1, 1);
      for (std::size_t k = 1; k < n; ++k) t[n][k] = t[n - 1][k - 1] + t[n - 1][k];
    }
    return t;
  }();
  return table;
}

inline Count multinomial(std::span<const std::uint64_t> counts) {
  Count out = 1;
  std::uint64_t total = 0;
  for (auto c : counts) {
    total += c;
    out *= pascal()[total][c];
  }
  return out;
}

inline double count_to_double(Count c) { return static_cast<double>(c); }

}  // namespace detail

/// Cyclic k-th order empirical conditional entropy of seq, times n, as the
/// integer ordering key.
inline std::int64_t empirical_entropy_key(std::span<const Symbol> seq, std::size_t alphabet,
                                          std::size_t k) {
  const std::size_t n = seq.size();
  if (n == 0) return 0;
  std::uint64_t contexts = 1;
  bool small = true;
  for (std::size_t u = 0; u < k && small; ++u) {
    contexts *= alphabet;
    small = contexts <= 4096;
  }
  std::vector<std::uint64_t> a, b;
  if (small) {
    thread_local std::vector<std::uint64_t> ctx, pair;
    thread_local std::vector<std::uint64_t> touched;
    ctx.assign(contexts, 0);
    pair.assign(contexts * alphabet, 0);
    touched.clear();
    for (std::size_t j = 0; j < n; ++j) {
      std::uint64_t c = 0;
      for (std::size_t u = k; u > 0; --u) c = c * alphabet + seq[(j + n * k - u) % n];
      if (ctx[c]++ == 0) touched.push_back(c);
      ++pair[c * alphabet + seq[j]];
    }
    for (auto c : touched) {
      a.push_back(ctx[c]);
      for (std::size_t x = 0; x < alphabet; ++x)
        if (pair[c * alphabet + x] > 0) b.push_back(pair[c * alphabet + x]);
    }
  } else {
    std::map<std::uint64_t, std::uint64_t> ctx, pair;
    for (std::size_t j = 0; j < n; ++j) {
      std::uint64_t c = 0;
      for (std::size_t u = k; u > 0; --u) c = c * alphabet + seq[(j + n * k - u) % n];
      ++ctx[c];
      ++pair[c * alphabet + seq[j]];
    }
    for (const auto& [key, v] : ctx) a.push_back(v);
    for (const auto& [key, v] : pair) b.push_back(v);
  }
  return detail::empirical_key(std::move(a), std::move(b));
}

/// Empirical conditional entropy in bits per symbol.
inline double empirical_entropy(std::span<const Symbol> seq, std::size_t alphabet,
                                std::size_t k) {
  if (seq.empty()) return 0.0;
  return static_cast<double>(empirical_entropy_key(seq, alphabet, k)) /
         (kKeyScale * static_cast<double>(seq.size()));
}

/// ⌊nR⌋ with a 1e-9 guard against rates like 2/3 rounding below an integer.
inline std::size_t code_log_size(std::size_t n, double rate) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * rate + 1e-9));
}

namespace detail {

// Predicate-mode data (k = 0): type classes grouped by key.
struct TypeCode {
  std::vector<std::vector<std::uint64_t>> types;  ///< every composition of n into L parts
  std::vector<std::int64_t> keys;
  std::int64_t boundary_key = 0;
  Count boundary_remainder = 0;  ///< members taken from the boundary group
  bool has_boundary = false;
  std::vector<std::size_t> boundary_group;  ///< indices into `types`
  std::map<std::vector<std::uint64_t>, std::size_t> lookup;
};

inline void compositions(std::size_t parts, std::uint64_t total, std::vector<std::uint64_t>& cur,
                         std::vector<std::vector<std::uint64_t>>& out) {
  if (cur.size() + 1 == parts) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (std::uint64_t c = 0; c <= total; ++c) {
    cur.push_back(c);
    compositions(parts, total - c, cur, out);
    cur.pop_back();
  }
}

}  // namespace detail

class BlockCode {
 public:
  std::size_t alphabet_size() const { return alphabet_; }
  std::size_t length() const { return length_; }
  double rate() const { return rate_; }
  std::size_t context_order() const { return order_; }
  bool degenerate() const { return degenerate_; }
  bool is_dense() const { return !typed_; }
  std::uint64_t size() const { return size_; }

  /// Dense mode: member indices in ascending (lexicographic) order.
  const std::vector<std::uint64_t>& members() const {
    if (!is_dense()) throw SizeError("predicate-mode code has no explicit member list");
    return members_;
  }

  bool contains(std::span<const Symbol> seq) const {
    if (seq.size() != length_) return false;
    for (auto x : seq)
      if (x >= alphabet_) return false;
    if (is_dense())
      return std::binary_search(members_.begin(), members_.end(),
                                sequence_to_index(seq, alphabet_));
    std::vector<std::uint64_t> counts(alphabet_, 0);
    for (auto x : seq) ++counts[x];
    const auto key = detail::type_key(counts, length_);
    if (!typed_->has_boundary || key < typed_->boundary_key) return true;
    if (key > typed_->boundary_key) return false;
    return boundary_rank(seq) < typed_->boundary_remainder;
  }

  /// Calls `visit` once per member. Predicate mode is limited to 2^22 members.
  void for_each_member(const std::function<void(std::span<const Symbol>)>& visit) const {
    if (is_dense()) {
      for (auto idx : members_) {
        const auto s = index_to_sequence(idx, alphabet_, length_);
        visit(s);
      }
      return;
    }
    if (size_ > kEnumerationLimit) throw SizeError("code too large to enumerate");
    for (std::size_t t = 0; t < typed_->types.size(); ++t) {
      if (typed_->has_boundary && typed_->keys[t] >= typed_->boundary_key) continue;
      Sequence s;
      for (std::size_t a = 0; a < alphabet_; ++a) s.insert(s.end(), typed_->types[t][a], a);
      do visit(s);
      while (std::next_permutation(s.begin(), s.end()));
    }
    if (!typed_->has_boundary) return;
    Count remaining = typed_->boundary_remainder;
    Sequence prefix;
    std::vector<std::uint64_t> pc(alphabet_, 0);
    std::function<void()> descend = [&] {
      if (remaining == 0) return;
      if (prefix.size() == length_) {
        visit(prefix);
        --remaining;
        return;
      }
      for (std::size_t a = 0; a < alphabet_ && remaining > 0; ++a) {
        ++pc[a];
        prefix.push_back(a);
        if (completions(pc) > 0) descend();
        prefix.pop_back();
        --pc[a];
      }
    };
    descend();
  }

  /// Σ over members of Π probs[x_j] for an i.i.d. law, exact by type classes.
  double iid_measure(std::span<const double> probs) const {
    if (probs.size() != alphabet_) throw ValidationError("alphabet size mismatch");
    if (is_dense()) {
      long double out = 0.0L;
      for (auto idx : members_) {
        const auto s = index_to_sequence(idx, alphabet_, length_);
        long double w = 1.0L;
        for (auto x : s) w *= probs[x];
        out += w;
      }
      return static_cast<double>(out);
    }
    auto type_prob = [&](std::span<const std::uint64_t> t) {
      double w = 1.0;
      for (std::size_t a = 0; a < alphabet_; ++a)
        w *= std::pow(probs[a], static_cast<double>(t[a]));
      return w;
    };
    double out = 0.0;
    for (std::size_t t = 0; t < typed_->types.size(); ++t) {
      if (typed_->has_boundary && typed_->keys[t] >= typed_->boundary_key) continue;
      out += detail::count_to_double(detail::multinomial(typed_->types[t])) *
             type_prob(typed_->types[t]);
    }
    if (!typed_->has_boundary) return out;
    // Lexicographic descent through the boundary group.
    Count remaining = typed_->boundary_remainder;
    std::vector<std::uint64_t> pc(alphabet_, 0);
    for (std::size_t j = 0; j < length_ && remaining > 0; ++j) {
      for (std::size_t a = 0; a < alphabet_; ++a) {
        ++pc[a];
        const Count cnt = completions(pc);
        if (cnt <= remaining) {
          for (auto t : typed_->boundary_group) {
            const auto& ty = typed_->types[t];
            std::vector<std::uint64_t> rest(alphabet_);
            bool ok = true;
            for (std::size_t b = 0; b < alphabet_ && ok; ++b) {
              ok = ty[b] >= pc[b];
              if (ok) rest[b] = ty[b] - pc[b];
            }
            if (ok) out += detail::count_to_double(detail::multinomial(rest)) * type_prob(ty);
          }
          remaining -= cnt;
          --pc[a];
          if (remaining == 0) break;
        } else {
          break;  // descend into symbol a
        }
      }
    }
    return out;
  }

  /// Sorted newline-delimited listing of the members (dense mode).
  std::string listing() const {
    std::ostringstream os;
    for (auto idx : members()) {
      const auto s = index_to_sequence(idx, alphabet_, length_);
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (alphabet_ > 10 && j > 0) os << ',';
        os << s[j];
      }
      os << '\n';
    }
    return os.str();
  }

 private:
  friend BlockCode build_code(std::size_t, double, std::size_t, std::size_t);
  friend BlockCode superblock_code(const BlockCode&, std::size_t);

  BlockCode() = default;

  Count completions(std::span<const std::uint64_t> pc) const {
    Count total = 0;
    std::vector<std::uint64_t> rest(alphabet_);
    for (auto t : typed_->boundary_group) {
      const auto& ty = typed_->types[t];
      bool ok = true;
      for (std::size_t b = 0; b < alphabet_ && ok; ++b) {
        ok = ty[b] >= pc[b];
        if (ok) rest[b] = ty[b] - pc[b];
      }
      if (ok) total += detail::multinomial(rest);
    }
    return total;
  }

  Count boundary_rank(std::span<const Symbol> seq) const {
    Count rank = 0;
    std::vector<std::uint64_t> pc(alphabet_, 0);
    for (std::size_t j = 0; j < seq.size(); ++j) {
      for (std::size_t a = 0; a < seq[j]; ++a) {
        ++pc[a];
        rank += completions(pc);
        --pc[a];
      }
      ++pc[seq[j]];
    }
    return rank;
  }

  std::size_t alphabet_ = 0;
  std::size_t length_ = 0;
  double rate_ = 0.0;
  std::size_t order_ = 0;
  bool degenerate_ = false;
  std::uint64_t size_ = 0;
  std::vector<std::uint64_t> members_;
  std::shared_ptr<const detail::TypeCode> typed_;
};

/// G(L, R, n) with context order k. Dense when L^n ≤ 2^20; otherwise a
/// membership predicate over type classes (k = 0 only, n ≤ 64).
inline BlockCode build_code(std::size_t alphabet, double rate, std::size_t n, std::size_t k) {
  if (alphabet < 2) throw ValidationError("code alphabet must have at least two symbols");
  if (n == 0) throw ValidationError("code length must be positive");
  if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("code rate must be positive");
  BlockCode code;
  code.alphabet_ = alphabet;
  code.length_ = n;
  code.rate_ = rate;
  code.order_ = k;
  const std::size_t log_size = code_log_size(n, rate);
  if (log_size > 62) throw SizeError("code size 2^" + std::to_string(log_size) + " too large");
  const std::uint64_t wanted = std::uint64_t{1} << log_size;

  std::uint64_t total = 0;
  bool dense = true;
  try {
    total = sequence_count(alphabet, n, kDenseCodeLimit);
  } catch (const SizeError&) {
    dense = false;
  }

  if (dense) {
    code.degenerate_ = wanted > total;
    code.size_ = std::min(wanted, total);
    if (code.size_ == total) {
      code.members_.resize(total);
      std::iota(code.members_.begin(), code.members_.end(), std::uint64_t{0});
      return code;
    }
    std::vector<std::pair<std::int64_t, std::uint64_t>> keyed(total);
    Sequence s(n, 0);
    for (std::uint64_t idx = 0; idx < total; ++idx) {
      keyed[idx] = {empirical_entropy_key(s, alphabet, k), idx};
      for (std::size_t j = n; j-- > 0;) {  // increment big-endian counter
        if (++s[j] < alphabet) break;
        s[j] = 0;
      }
    }
    const auto cut = keyed.begin() + static_cast<std::ptrdiff_t>(code.size_);
    std::nth_element(keyed.begin(), cut - 1, keyed.end());
    code.members_.reserve(code.size_);
    for (auto it = keyed.begin(); it != cut; ++it) code.members_.push_back(it->second);
    std::sort(code.members_.begin(), code.members_.end());
    return code;
  }

  if (k != 0)
    throw NotImplementedError("predicate-mode codes support context order 0 only");
  if (n > 64) throw SizeError("predicate-mode codes need n ≤ 64");
  // L^n must fit the 128-bit type-class counts.
  {
    Count t = 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (t > (~Count{0} >> 2) / alphabet) throw SizeError("L^n exceeds 2^126");
      t *= alphabet;
    }
  }
  auto data = std::make_shared<detail::TypeCode>();
  std::vector<std::uint64_t> cur;
  detail::compositions(alphabet, n, cur, data->types);
  data->keys.resize(data->types.size());
  for (std::size_t t = 0; t < data->types.size(); ++t) {
    data->keys[t] = detail::type_key(data->types[t], n);
    data->lookup[data->types[t]] = t;
  }
  std::map<std::int64_t, Count> group_sizes;
  for (std::size_t t = 0; t < data->types.size(); ++t)
    group_sizes[data->keys[t]] += detail::multinomial(data->types[t]);
  Count taken = 0;
  for (const auto& [key, count] : group_sizes) {
    if (taken + count >= wanted) {
      if (taken + count > wanted) {
        data->has_boundary = true;
        data->boundary_key = key;
        data->boundary_remainder = wanted - taken;
      } else {
        // group fills the code exactly; everything with a larger key is out
        data->has_boundary = true;
        data->boundary_key = key;
        data->boundary_remainder = count;
      }
      taken = wanted;
      break;
    }
    taken += count;
  }
  code.degenerate_ = taken < wanted;
  code.size_ = static_cast<std::uint64_t>(taken);
  if (data->has_boundary)
    for (std::size_t t = 0; t < data->types.size(); ++t)
      if (data->keys[t] == data->boundary_key) data->boundary_group.push_back(t);
  code.typed_ = std::move(data);
  return code;
}

/// μ(G) for the first n symbols of p.
inline double code_measure(const ClassicalProcess& p, const BlockCode& code) {
  if (p.alphabet_size() != code.alphabet_size())
    throw ValidationError("code_measure: alphabet size mismatch");
  if (const auto* iid = p.as<IidProcess>()) return code.iid_measure(iid->probs);
  if (code.is_dense()) {
    const auto mu = marginal(p, code.length(), true);
    long double out = 0.0L;
    for (auto idx : code.members()) out += mu.values()[idx];
    return static_cast<double>(out);
  }
  double out = 0.0;
  code.for_each_member([&](std::span<const Symbol> s) { out += probability(p, s); });
  return out;
}

/// Regroups a length i·j code over L into a length-j code over L^i.
inline BlockCode superblock_code(const BlockCode& c, std::size_t i) {
  if (i == 0 || c.length() % i != 0)
    throw ValidationError("superblock_code: block size must divide the code length");
  if (!c.is_dense()) throw SizeError("superblock_code needs a dense code");
  BlockCode out;
  out.alphabet_ = static_cast<std::size_t>(sequence_count(c.alphabet_size(), i));
  out.length_ = c.length() / i;
  out.rate_ = c.rate() * static_cast<double>(i);
  out.order_ = c.context_order();
  out.degenerate_ = c.degenerate();
  out.size_ = c.size();
  out.members_ = c.members();  // big-endian regrouping keeps every index
  return out;
}

struct InclusionReport {
  std::vector<std::uint64_t> regrouped_not_in_direct;
  std::vector<std::uint64_t> direct_not_in_regrouped;
  bool regrouped_within_direct() const { return regrouped_not_in_direct.empty(); }
  bool equal() const {
    return regrouped_not_in_direct.empty() && direct_not_in_regrouped.empty();
  }
};

/// Compares superblock_code(fine, i) with a directly built code on L^i.
inline InclusionReport superblock_inclusion(const BlockCode& fine, std::size_t i,
                                            const BlockCode& direct) {
  const auto regrouped = superblock_code(fine, i);
  if (regrouped.alphabet_size() != direct.alphabet_size() ||
      regrouped.length() != direct.length())
    throw ValidationError("superblock_inclusion: codes live on different sequence spaces");
  InclusionReport r;
  const auto& a = regrouped.members();
  const auto& b = direct.members();
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                      std::back_inserter(r.regrouped_not_in_direct));
  std::set_difference(b.begin(), b.end(), a.begin(), a.end(),
                      std::back_inserter(r.direct_not_in_regrouped));
  return r;
}

}  // namespace uqc
