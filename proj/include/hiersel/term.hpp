#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hiersel {

/// Upper bounds on the number of main effects and the per-variable exponent.
/// Together they let an exponent vector pack into 128 bits (4 bits per variable).
inline constexpr std::size_t kMaxVariables = 32;
inline constexpr unsigned kMaxDegree = 15;

/// A polynomial node, identified by its exponent multi-index.
///
/// The all-zero term is the intercept. Terms compare equal when their
/// exponent vectors are equal; `canonical_less` gives the order used to
/// index nodes everywhere else in the library (order-major, then
/// lexicographically descending so that x1 precedes x2).
class Term {
 public:
  Term() = default;

  explicit Term(std::vector<std::uint8_t> exponents) : exps_(std::move(exponents)) { validate(); }

  Term(std::initializer_list<int> exponents) {
    exps_.reserve(exponents.size());
    for (int e : exponents) {
      if (e < 0 || e > static_cast<int>(kMaxDegree))
        throw std::invalid_argument("Term: exponent out of range [0, 15]");
      exps_.push_back(static_cast<std::uint8_t>(e));
    }
    validate();
  }

  static Term intercept(std::size_t p) { return Term(std::vector<std::uint8_t>(p, 0)); }

  /// The main effect x_{j+1} (0-based variable index j).
  static Term main_effect(std::size_t p, std::size_t j) {
    std::vector<std::uint8_t> e(p, 0);
    e.at(j) = 1;
    return Term(std::move(e));
  }

  std::size_t dimension() const noexcept { return exps_.size(); }
  std::uint8_t operator[](std::size_t j) const { return exps_[j]; }
  const std::vector<std::uint8_t>& exponents() const noexcept { return exps_; }

  bool is_intercept() const noexcept {
    return std::all_of(exps_.begin(), exps_.end(), [](auto e) { return e == 0; });
  }

  /// Sum of exponents.
  unsigned order() const noexcept {
    unsigned s = 0;
    for (auto e : exps_) s += e;
    return s;
  }

  /// Number of variables with a nonzero exponent.
  std::size_t length() const noexcept {
    return static_cast<std::size_t>(std::count_if(exps_.begin(), exps_.end(), [](auto e) { return e != 0; }));
  }

  /// Nonzero exponents in ascending order.
  std::vector<unsigned> type() const {
    std::vector<unsigned> t;
    for (auto e : exps_)
      if (e != 0) t.push_back(e);
    std::sort(t.begin(), t.end());
    return t;
  }

  /// Two 64-bit words holding the exponents at 4 bits each.
  std::pair<std::uint64_t, std::uint64_t> packed() const noexcept {
    std::uint64_t lo = 0, hi = 0;
    for (std::size_t j = 0; j < exps_.size(); ++j) {
      const std::uint64_t v = exps_[j];
      if (j < 16)
        lo |= v << (4 * j);
      else
        hi |= v << (4 * (j - 16));
    }
    return {lo, hi};
  }

  /// Human-readable monomial, e.g. "x1^2*x3"; the intercept renders as "1".
  std::string to_string() const {
    if (is_intercept()) return "1";
    std::string s;
    for (std::size_t j = 0; j < exps_.size(); ++j) {
      if (exps_[j] == 0) continue;
      if (!s.empty()) s += '*';
      s += 'x' + std::to_string(j + 1);
      if (exps_[j] > 1) s += '^' + std::to_string(exps_[j]);
    }
    return s;
  }

  /// Exponent tuple, e.g. "(2,0,1)".
  std::string to_tuple_string() const {
    std::string s = "(";
    for (std::size_t j = 0; j < exps_.size(); ++j) {
      if (j) s += ',';
      s += std::to_string(exps_[j]);
    }
    return s + ")";
  }

  /// Parses the output of `to_string` for a p-variable space.
  static Term parse(std::string_view text, std::size_t p) {
    auto trim = [](std::string_view v) {
      while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
      while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
      return v;
    };
    text = trim(text);
    std::vector<std::uint8_t> e(p, 0);
    if (text == "1") return Term(std::move(e));
    if (text.empty()) throw std::invalid_argument("Term::parse: empty term");
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto star = text.find('*', pos);
      auto factor = trim(text.substr(pos, star == std::string_view::npos ? std::string_view::npos : star - pos));
      if (factor.size() < 2 || factor[0] != 'x')
        throw std::invalid_argument("Term::parse: bad factor '" + std::string(factor) + "'");
      const auto caret = factor.find('^');
      const std::string var(factor.substr(1, caret == std::string_view::npos ? std::string_view::npos : caret - 1));
      int power = 1;
      std::size_t idx = 0;
      try {
        idx = std::stoul(var);
        if (caret != std::string_view::npos) power = std::stoi(std::string(factor.substr(caret + 1)));
      } catch (const std::exception&) {
        throw std::invalid_argument("Term::parse: bad factor '" + std::string(factor) + "'");
      }
      if (idx < 1 || idx > p) throw std::invalid_argument("Term::parse: variable index out of range in '" + std::string(text) + "'");
      if (power < 1 || e[idx - 1] + power > static_cast<int>(kMaxDegree))
        throw std::invalid_argument("Term::parse: bad exponent in '" + std::string(text) + "'");
      e[idx - 1] = static_cast<std::uint8_t>(e[idx - 1] + power);
      if (star == std::string_view::npos) break;
      pos = star + 1;
    }
    return Term(std::move(e));
  }

  friend bool operator==(const Term& a, const Term& b) noexcept { return a.exps_ == b.exps_; }
  friend bool operator!=(const Term& a, const Term& b) noexcept { return !(a == b); }

 private:
  void validate() const {
    if (exps_.size() > kMaxVariables) throw std::invalid_argument("Term: more than 32 variables");
    for (auto e : exps_)
      if (e > kMaxDegree) throw std::invalid_argument("Term: exponent above 15");
  }

  std::vector<std::uint8_t> exps_;
};

/// Canonical node order: ascending order, then lexicographically descending exponents.
inline bool canonical_less(const Term& a, const Term& b) {
  const auto oa = a.order(), ob = b.order();
  if (oa != ob) return oa < ob;
  return std::lexicographical_compare(b.exponents().begin(), b.exponents().end(), a.exponents().begin(),
                                      a.exponents().end());
}

struct TermHash {
  std::size_t operator()(const Term& t) const noexcept {
    const auto [lo, hi] = t.packed();
    std::uint64_t h = lo * 0x9E3779B97F4A7C15ull ^ (hi + 0x632BE59BD9B4E019ull + (lo << 6) + (lo >> 2));
    h ^= static_cast<std::uint64_t>(t.dimension()) << 59;
    return static_cast<std::size_t>(h);
  }
};

/// Component-wise order: `a` precedes `b` when a_j <= b_j for every j.
inline bool precedes(const Term& a, const Term& b) {
  if (a.dimension() != b.dimension()) throw std::invalid_argument("precedes: dimension mismatch");
  for (std::size_t j = 0; j < a.dimension(); ++j)
    if (a[j] > b[j]) return false;
  return true;
}

/// Terms obtained by decrementing one strictly positive exponent.
inline std::vector<Term> parents(const Term& t) {
  std::vector<Term> out;
  for (std::size_t j = 0; j < t.dimension(); ++j) {
    if (t[j] == 0) continue;
    auto e = t.exponents();
    --e[j];
    out.emplace_back(std::move(e));
  }
  return out;
}

/// Terms of `full` obtained by incrementing one exponent of `t`.
inline std::vector<Term> children_within(const Term& t, const std::vector<Term>& full) {
  std::vector<Term> out;
  const auto target = t.order() + 1;
  for (const auto& c : full) {
    if (c.dimension() != t.dimension() || c.order() != target) continue;
    if (precedes(t, c)) out.push_back(c);
  }
  return out;
}

/// C(n, k) with overflow detection; throws std::overflow_error.
inline std::uint64_t checked_binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t num = n - k + i;
    // r * num / i stays integral at every step; divide by gcd first to delay overflow.
    const std::uint64_t g = std::gcd(r, i);
    const std::uint64_t rr = r / g, ii = i / g;
    const std::uint64_t nn = num / ii;  // ii divides num * rr and gcd(rr, ii) == 1
    if (nn != 0 && rr > std::numeric_limits<std::uint64_t>::max() / nn)
      throw std::overflow_error("binomial coefficient overflows 64 bits");
    r = rr * nn;
  }
  return r;
}

/// All terms of order <= degree in p variables, intercept included, in canonical order.
inline std::vector<Term> generate_full_surface(std::size_t p, unsigned degree) {
  if (p < 1 || degree < 1) throw std::invalid_argument("generate_full_surface: need p >= 1 and degree >= 1");
  if (p > kMaxVariables) throw std::invalid_argument("generate_full_surface: p exceeds 32");
  if (degree > kMaxDegree) throw std::invalid_argument("generate_full_surface: degree exceeds 15");
  const auto count = checked_binomial(p + degree, degree);
  if (count > std::vector<Term>().max_size() || count > std::numeric_limits<std::size_t>::max())
    throw std::overflow_error("generate_full_surface: term count exceeds index capacity");

  std::vector<Term> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<std::uint8_t> e(p, 0);
  // Within an order, emit lexicographically descending exponent vectors.
  std::function<void(std::size_t, unsigned)> fill = [&](std::size_t j, unsigned remaining) {
    if (j + 1 == p) {
      e[j] = static_cast<std::uint8_t>(remaining);
      out.emplace_back(e);
      return;
    }
    for (int v = static_cast<int>(remaining); v >= 0; --v) {
      e[j] = static_cast<std::uint8_t>(v);
      fill(j + 1, remaining - static_cast<unsigned>(v));
    }
  };
  for (unsigned o = 0; o <= degree; ++o) fill(0, o);
  return out;
}

}  // namespace hiersel
