#pragma once

#include <algorithm>
#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "hiersel/term.hpp"

namespace hiersel {

using BigCount = boost::multiprecision::cpp_int;

enum class Heredity { Strong, Weak };

inline std::string to_string(Heredity hc) { return hc == Heredity::Strong ? "strong" : "weak"; }

inline Heredity parse_heredity(const std::string& s) {
  if (s == "strong" || s == "SHC" || s == "shc") return Heredity::Strong;
  if (s == "weak" || s == "WHC" || s == "whc") return Heredity::Weak;
  throw std::invalid_argument("unknown heredity condition '" + s + "' (expected strong|weak)");
}

/// Raised when enumeration would produce more models than the caller allows.
class CapExceeded : public std::runtime_error {
 public:
  explicit CapExceeded(std::size_t cap)
      : std::runtime_error("model space has more than " + std::to_string(cap) + " models"), cap_(cap) {}
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t cap_;
};

/// Set of selectable nodes, stored as a bitset over the space's node indices.
///
/// A Model carries no reference to its space; the base terms are implied.
/// Any subset can be represented, so heredity is checked by
/// `ModelSpace::is_valid`, not by construction.
class Model {
 public:
  Model() = default;
  explicit Model(std::size_t n_nodes) : n_(n_nodes), words_((n_nodes + 63) / 64, 0) {}

  std::size_t capacity() const noexcept { return n_; }

  bool contains(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void insert(std::size_t i) noexcept { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void erase(std::size_t i) noexcept { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
  void toggle(std::size_t i) noexcept { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }

  Model toggled(std::size_t i) const {
    Model m = *this;
    m.toggle(i);
    return m;
  }

  std::size_t size() const noexcept {
    std::size_t s = 0;
    for (auto w : words_) s += static_cast<std::size_t>(std::popcount(w));
    return s;
  }
  bool empty() const noexcept {
    return std::all_of(words_.begin(), words_.end(), [](auto w) { return w == 0; });
  }

  std::vector<std::size_t> nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t w = 0; w < words_.size(); ++w) {
      auto bits = words_[w];
      while (bits) {
        out.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
        bits &= bits - 1;
      }
    }
    return out;
  }

  bool is_subset_of(const Model& other) const noexcept {
    for (std::size_t w = 0; w < words_.size(); ++w)
      if (words_[w] & ~other.words_[w]) return false;
    return true;
  }

  std::span<const std::uint64_t> words() const noexcept { return words_; }

  /// Bit string with node 0 first, e.g. "10110".
  std::string bit_string() const {
    std::string s(n_, '0');
    for (std::size_t i = 0; i < n_; ++i)
      if (contains(i)) s[i] = '1';
    return s;
  }

  friend bool operator==(const Model& a, const Model& b) noexcept { return a.n_ == b.n_ && a.words_ == b.words_; }

  /// Canonical key order: at the lowest node index where two models differ,
  /// the model excluding that node sorts first.
  friend std::strong_ordering operator<=>(const Model& a, const Model& b) noexcept {
    if (a.n_ != b.n_) return a.n_ <=> b.n_;
    for (std::size_t w = 0; w < a.words_.size(); ++w) {
      const auto diff = a.words_[w] ^ b.words_[w];
      if (diff == 0) continue;
      const auto low = diff & (~diff + 1);
      return (a.words_[w] & low) ? std::strong_ordering::greater : std::strong_ordering::less;
    }
    return std::strong_ordering::equal;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> words_;
};

struct ModelHash {
  std::size_t operator()(const Model& m) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull ^ m.capacity();
    for (auto w : m.words()) {
      h ^= w + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
      h *= 0x100000001b3ull;
    }
    return static_cast<std::size_t>(h);
  }
};

/// Frozen description of a model space: the base and full models, the
/// heredity condition, and the DAG over the selectable nodes M_F \ M_B.
class ModelSpace {
 public:
  ModelSpace(std::vector<Term> base, std::vector<Term> full, Heredity hc) : hc_(hc) {
    if (full.empty()) throw std::invalid_argument("ModelSpace: full model is empty");
    p_ = full.front().dimension();
    if (p_ == 0 || p_ > kMaxVariables) throw std::invalid_argument("ModelSpace: need 1 <= p <= 32");
    auto check_dim = [&](const std::vector<Term>& ts) {
      for (const auto& t : ts)
        if (t.dimension() != p_) throw std::invalid_argument("ModelSpace: inconsistent term dimension");
    };
    check_dim(base);
    check_dim(full);
    auto dedupe = [](std::vector<Term>& ts) {
      std::sort(ts.begin(), ts.end(), canonical_less);
      ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    };
    dedupe(base);
    dedupe(full);

    std::unordered_map<Term, std::size_t, TermHash> in_full;
    for (std::size_t i = 0; i < full.size(); ++i) in_full.emplace(full[i], i);
    std::unordered_map<Term, std::size_t, TermHash> in_base;
    for (std::size_t i = 0; i < base.size(); ++i) in_base.emplace(base[i], i);

    for (const auto& t : base)
      if (!in_full.count(t)) throw std::invalid_argument("ModelSpace: base term " + t.to_string() + " not in full model");
    auto check_strong = [](const std::vector<Term>& ts, const auto& lookup, const char* what) {
      for (const auto& t : ts)
        for (const auto& par : parents(t))
          if (!lookup.count(par))
            throw std::invalid_argument(std::string("ModelSpace: ") + what + " is not strongly hereditary (" +
                                        t.to_string() + " lacks parent " + par.to_string() + ")");
    };
    check_strong(full, in_full, "full model");
    check_strong(base, in_base, "base model");

    base_ = std::move(base);
    for (auto& t : full)
      if (!in_base.count(t)) nodes_.push_back(t);
    for (std::size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i], i);

    const std::size_t k = nodes_.size();
    parents_.resize(k);
    children_.resize(k);
    base_parents_.assign(k, 0);
    total_parents_.assign(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
      for (const auto& par : parents(nodes_[i])) {
        ++total_parents_[i];
        if (auto it = index_.find(par); it != index_.end()) {
          parents_[i].push_back(it->second);
          children_[it->second].push_back(i);
        } else {
          ++base_parents_[i];
        }
      }
    }
    for (auto& c : children_) std::sort(c.begin(), c.end());
    if (k > 0) {
      min_order_ = nodes_.front().order();
      max_order_ = nodes_.back().order();
    }
    // order_begin_[o] = first node index with order >= o
    order_begin_.assign(max_order_ + 2, k);
    for (unsigned o = 0; o <= max_order_ + 1; ++o) {
      std::size_t i = 0;
      while (i < k && nodes_[i].order() < o) ++i;
      order_begin_[o] = i;
    }
  }

  /// Full polynomial surface of the given degree; the base defaults to the intercept.
  static ModelSpace full_surface(std::size_t p, unsigned degree, Heredity hc, std::vector<Term> base = {}) {
    if (base.empty()) base.push_back(Term::intercept(p));
    return ModelSpace(std::move(base), generate_full_surface(p, degree), hc);
  }

  std::size_t num_vars() const noexcept { return p_; }
  Heredity heredity() const noexcept { return hc_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  const Term& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<Term>& nodes() const noexcept { return nodes_; }
  const std::vector<Term>& base_terms() const noexcept { return base_; }

  std::vector<Term> full_terms() const {
    std::vector<Term> all = base_;
    all.insert(all.end(), nodes_.begin(), nodes_.end());
    std::sort(all.begin(), all.end(), canonical_less);
    return all;
  }

  std::optional<std::size_t> index_of(const Term& t) const {
    if (auto it = index_.find(t); it != index_.end()) return it->second;
    return std::nullopt;
  }
  bool is_base_term(const Term& t) const { return std::find(base_.begin(), base_.end(), t) != base_.end(); }

  /// Parents of node i that are themselves selectable nodes.
  const std::vector<std::size_t>& node_parents(std::size_t i) const { return parents_.at(i); }
  const std::vector<std::size_t>& node_children(std::size_t i) const { return children_.at(i); }
  /// Number of parents of node i lying in the base model.
  std::size_t base_parent_count(std::size_t i) const { return base_parents_.at(i); }
  /// |P(alpha)|, i.e. the length of the term.
  std::size_t parent_count(std::size_t i) const { return total_parents_.at(i); }

  unsigned node_order(std::size_t i) const { return nodes_.at(i).order(); }
  unsigned min_order() const noexcept { return min_order_; }
  unsigned max_order() const noexcept { return max_order_; }

  /// Node index range [first, last) of the given order.
  std::pair<std::size_t, std::size_t> order_range(unsigned order) const {
    if (nodes_.empty() || order < min_order_ || order > max_order_) return {0, 0};
    return {order_begin_[order], order_begin_[order + 1]};
  }

  /// Orders that have at least one selectable node, ascending.
  std::vector<unsigned> orders() const {
    std::vector<unsigned> out;
    for (unsigned o = min_order_; o <= max_order_ && !nodes_.empty(); ++o) {
      auto [a, b] = order_range(o);
      if (a < b) out.push_back(o);
    }
    return out;
  }

  Model empty_model() const { return Model(nodes_.size()); }

  /// Number of parents of node i present in base or in m.
  std::size_t present_parents(const Model& m, std::size_t i) const {
    std::size_t c = base_parents_[i];
    for (auto par : parents_[i]) c += m.contains(par);
    return c;
  }

  /// Whether node i's heredity precondition holds given m (its own membership is ignored).
  bool eligible(const Model& m, std::size_t i) const {
    if (hc_ == Heredity::Strong) {
      for (auto par : parents_[i])
        if (!m.contains(par)) return false;
      return true;
    }
    // Nodes whose parents all lie in the base are always eligible.
    if (parents_[i].empty()) return true;
    if (base_parents_[i] > 0) return true;
    for (auto par : parents_[i])
      if (m.contains(par)) return true;
    return false;
  }

  bool is_valid(const Model& m) const {
    if (m.capacity() != nodes_.size()) return false;
    for (auto i : m.nodes())
      if (!eligible(m, i)) return false;
    return true;
  }

  /// Included nodes whose removal keeps the model valid.
  std::vector<std::size_t> extreme_nodes(const Model& m) const {
    std::vector<std::size_t> out;
    for (auto i : m.nodes()) {
      Model without = m.toggled(i);
      bool ok = true;
      for (auto c : children_[i])
        if (m.contains(c) && !eligible(without, c)) {
          ok = false;
          break;
        }
      if (ok) out.push_back(i);
    }
    return out;
  }

  /// Excluded nodes whose addition keeps the model valid.
  std::vector<std::size_t> addable_children(const Model& m) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (!m.contains(i) && eligible(m, i)) out.push_back(i);
    return out;
  }

  /// Excluded nodes of one order whose addition keeps the model valid.
  std::vector<std::size_t> eligible_of_order(const Model& m, unsigned order) const {
    std::vector<std::size_t> out;
    auto [a, b] = order_range(order);
    for (std::size_t i = a; i < b; ++i)
      if (eligible(m, i)) out.push_back(i);
    return out;
  }

  Model model_from_terms(const std::vector<Term>& terms) const {
    Model m = empty_model();
    for (const auto& t : terms) {
      if (t.dimension() != p_) throw std::invalid_argument("model_from_terms: dimension mismatch");
      if (is_base_term(t)) continue;
      auto idx = index_of(t);
      if (!idx) throw std::invalid_argument("model_from_terms: term " + t.to_string() + " not in full model");
      m.insert(*idx);
    }
    return m;
  }

  Model model_from_strings(const std::vector<std::string>& terms) const {
    std::vector<Term> ts;
    for (const auto& s : terms) ts.push_back(Term::parse(s, p_));
    return model_from_terms(ts);
  }

  /// Base terms plus included nodes, canonical order.
  std::vector<Term> terms_of(const Model& m) const {
    std::vector<Term> out = base_;
    for (auto i : m.nodes()) out.push_back(nodes_[i]);
    std::sort(out.begin(), out.end(), canonical_less);
    return out;
  }

  std::vector<std::string> term_strings(const Model& m) const {
    std::vector<std::string> out;
    for (const auto& t : terms_of(m)) out.push_back(t.to_string());
    return out;
  }

  /// Smallest strongly hereditary model containing m: every node preceded by
  /// some node of m is added.
  Model strong_closure(const Model& m) const {
    Model out = m;
    for (std::size_t i = nodes_.size(); i-- > 0;)
      if (out.contains(i))
        for (auto par : parents_[i]) out.insert(par);
    return out;
  }

  /// True when the space is the full quadratic surface over intercept-only base.
  bool is_intercept_quadratic() const {
    if (base_.size() != 1 || !base_.front().is_intercept()) return false;
    if (max_order_ > 2) return false;
    return nodes_.size() + 1 == checked_binomial(p_ + 2, 2);
  }

 private:
  std::size_t p_ = 0;
  Heredity hc_;
  std::vector<Term> base_;
  std::vector<Term> nodes_;
  std::unordered_map<Term, std::size_t, TermHash> index_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> base_parents_;
  std::vector<std::size_t> total_parents_;
  std::vector<std::size_t> order_begin_;
  unsigned min_order_ = 0;
  unsigned max_order_ = 0;
};

/// Streams every valid model to `visit` in a fixed depth-first order over the
/// canonical node indices. `visit` returns false to stop early.
inline void for_each_model(const ModelSpace& space, const std::function<bool(const Model&)>& visit) {
  Model m = space.empty_model();
  const std::size_t k = space.size();
  bool stop = false;
  // Parents precede children in canonical order, so eligibility of node i is
  // settled once nodes < i are decided.
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (stop) return;
    if (i == k) {
      if (!visit(m)) stop = true;
      return;
    }
    rec(i + 1);
    if (space.eligible(m, i)) {
      m.insert(i);
      rec(i + 1);
      m.erase(i);
    }
  };
  rec(0);
}

/// All valid models; throws CapExceeded when there are more than `cap`.
inline std::vector<Model> enumerate(const ModelSpace& space, std::size_t cap) {
  if (cap == 0) throw std::invalid_argument("enumerate: cap must be positive");
  std::vector<Model> out;
  bool exceeded = false;
  for_each_model(space, [&](const Model& m) {
    if (out.size() == cap) {
      exceeded = true;
      return false;
    }
    out.push_back(m);
    return true;
  });
  if (exceeded) throw CapExceeded(cap);
  return out;
}

/// Counts valid models by streaming enumeration; throws CapExceeded past `cap`.
inline std::size_t count_by_enumeration(const ModelSpace& space, std::size_t cap) {
  std::size_t n = 0;
  bool exceeded = false;
  for_each_model(space, [&](const Model&) {
    if (n == cap) {
      exceeded = true;
      return false;
    }
    ++n;
    return true;
  });
  if (exceeded) throw CapExceeded(cap);
  return n;
}

/// Exact size of the full quadratic space in p main effects over an
/// intercept-only base. Conditioning on the k included mains: under strong
/// heredity k squares and C(k,2) interactions become eligible; under weak
/// heredity k squares and C(p,2) - C(p-k,2) interactions do.
inline BigCount count_quadratic_space(std::size_t p, Heredity hc) {
  if (p < 1) throw std::invalid_argument("count_quadratic_space: p must be >= 1");
  auto choose2 = [](std::size_t n) -> std::size_t { return n * (n - (n > 0)) / 2; };
  BigCount total = 0;
  BigCount binom = 1;  // C(p, k)
  for (std::size_t k = 0; k <= p; ++k) {
    const std::size_t free_nodes =
        hc == Heredity::Strong ? k * (k + 1) / 2 : k + choose2(p) - choose2(p - k);
    total += binom * (BigCount(1) << free_nodes);
    binom = binom * (p - k) / (k + 1);
  }
  return total;
}

inline BigCount count_quadratic_space(const ModelSpace& space) {
  if (!space.is_intercept_quadratic())
    throw std::domain_error("count_quadratic_space: space is not the full quadratic surface over an intercept base");
  return count_quadratic_space(space.num_vars(), space.heredity());
}

/// Graphviz rendering of a model: base terms, included nodes, and every
/// immediate-precedence edge among them.
inline std::string export_dot(const ModelSpace& space, const Model& m) {
  const auto terms = space.terms_of(m);
  std::ostringstream os;
  os << "digraph model {\n";
  for (const auto& t : terms) os << "  \"" << t.to_string() << "\";\n";
  for (const auto& child : terms)
    for (const auto& par : parents(child))
      if (std::find(terms.begin(), terms.end(), par) != terms.end())
        os << "  \"" << par.to_string() << "\" -> \"" << child.to_string() << "\";\n";
  os << "}\n";
  return os.str();
}

}  // namespace hiersel
