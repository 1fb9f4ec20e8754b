#pragma once

#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hiersel/model_space.hpp"
#include "hiersel/random.hpp"

namespace hiersel {

/// Equal-probability, hierarchical uniform, independence, order, length and type priors.
enum class PriorFamily { EPP, HUP, HIP, HOP, HLP, HTP };

/// Beta hyperparameters (1,1) everywhere, or (1, ch) with ch the number of
/// nodes currently available to the group.
enum class HyperScheme { AllOnes, ChildPenalty };

struct PriorSpec {
  PriorFamily family = PriorFamily::HIP;
  HyperScheme scheme = HyperScheme::AllOnes;
  /// Weak heredity only: b grows by 2 for each missing parent (HIP, HLP, HTP).
  bool whm_parent_penalty = false;

  friend bool operator==(const PriorSpec&, const PriorSpec&) = default;
};

inline std::string to_string(PriorFamily f) {
  switch (f) {
    case PriorFamily::EPP: return "EPP";
    case PriorFamily::HUP: return "HUP";
    case PriorFamily::HIP: return "HIP";
    case PriorFamily::HOP: return "HOP";
    case PriorFamily::HLP: return "HLP";
    case PriorFamily::HTP: return "HTP";
  }
  return "?";
}

inline std::string to_string(HyperScheme s) { return s == HyperScheme::AllOnes ? "1,1" : "1,ch"; }

/// Short label such as "HIP(1,ch)"; EPP has no scheme.
inline std::string label(const PriorSpec& spec) {
  if (spec.family == PriorFamily::EPP) return "EPP";
  std::string s = to_string(spec.family) + "(" + to_string(spec.scheme) + ")";
  if (spec.whm_parent_penalty) s += "+parents";
  return s;
}

inline PriorFamily parse_prior_family(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (s == "EPP") return PriorFamily::EPP;
  if (s == "HUP") return PriorFamily::HUP;
  if (s == "HIP") return PriorFamily::HIP;
  if (s == "HOP") return PriorFamily::HOP;
  if (s == "HLP") return PriorFamily::HLP;
  if (s == "HTP") return PriorFamily::HTP;
  throw std::invalid_argument("unknown prior family '" + s + "'");
}

inline HyperScheme parse_scheme(const std::string& s) {
  if (s == "11" || s == "1,1" || s == "ones" || s == "allones") return HyperScheme::AllOnes;
  if (s == "ch" || s == "1,ch" || s == "child" || s == "childpenalty") return HyperScheme::ChildPenalty;
  throw std::invalid_argument("unknown hyperparameter scheme '" + s + "' (expected 11|ch)");
}

/// Parses "HIP", "HIP.ch", "HOP(1,ch)", "EPP" style labels.
inline PriorSpec parse_prior_label(const std::string& text) {
  PriorSpec spec;
  auto cut = text.find_first_of(".(:");
  spec.family = parse_prior_family(text.substr(0, cut));
  if (cut != std::string::npos) {
    std::string rest = text.substr(cut + 1);
    if (!rest.empty() && rest.back() == ')') rest.pop_back();
    spec.scheme = parse_scheme(rest);
  }
  return spec;
}

struct BetaParams {
  double a = 1.0;
  double b = 1.0;
};

inline double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

/// Parent-count penalized Beta parameters for node i in a weak-heredity
/// space: a = 1, b = 1 + 2 * (missing parents). Returns nullopt when no
/// parent is present, in which case the node cannot be included.
inline std::optional<BetaParams> whm_conditional_beta(const ModelSpace& space, std::size_t i, const Model& m) {
  if (space.heredity() != Heredity::Weak)
    throw std::invalid_argument("whm_conditional_beta: space is not weakly hereditary");
  const auto present = space.present_parents(m, i);
  const auto total = space.parent_count(i);
  if (total > 0 && present == 0) return std::nullopt;
  return BetaParams{1.0, 1.0 + 2.0 * static_cast<double>(total - present)};
}

/// Nodes of one order sharing a Beta-distributed inclusion probability.
struct NodeGroup {
  unsigned order = 0;
  std::vector<std::size_t> nodes;  // eligible nodes given lower orders
  std::size_t missing_parents = 0; // set when grouped by parent count
};
using GroupDecomposition = std::vector<NodeGroup>;

/// Closed-form model-space prior bound to a space.
///
/// The space must outlive the prior. EPP needs |M|: it is supplied,
/// computed in closed form for intercept-based quadratic spaces, or
/// counted by enumeration up to `enumeration_cap`.
class ModelPrior {
 public:
  struct Options {
    std::optional<double> log_model_count;
    std::size_t enumeration_cap = 1'000'000;
  };

  ModelPrior(const ModelSpace& space, PriorSpec spec) : ModelPrior(space, spec, Options{}) {}

  ModelPrior(const ModelSpace& space, PriorSpec spec, Options opts) : space_(&space), spec_(spec) {
    if (spec_.whm_parent_penalty) {
      if (space.heredity() != Heredity::Weak)
        throw std::invalid_argument("parent penalty requires a weak heredity space");
      if (spec_.family != PriorFamily::HIP && spec_.family != PriorFamily::HLP && spec_.family != PriorFamily::HTP)
        throw std::invalid_argument("parent penalty applies to HIP, HLP and HTP only");
    }
    if (spec_.family == PriorFamily::EPP) resolve_count(opts);
  }

  const PriorSpec& spec() const noexcept { return spec_; }
  const ModelSpace& space() const noexcept { return *space_; }

  /// log pi(M | space). Throws std::invalid_argument for models violating heredity.
  double log_prior(const Model& m) const {
    if (!space_->is_valid(m)) throw std::invalid_argument("log_prior: model violates the heredity condition");
    switch (spec_.family) {
      case PriorFamily::EPP: return -log_count_;
      case PriorFamily::HUP: return log_hup(m);
      default: break;
    }
    double total = 0.0;
    for (auto order : space_->orders()) {
      const auto groups = groups_at_order(m, order);
      if (spec_.family == PriorFamily::HIP) {
        std::size_t ch = 0;
        for (const auto& g : groups) ch += g.nodes.size();
        for (const auto& g : groups)
          for (auto i : g.nodes) {
            const double b = hip_b(i, m, ch);
            total += m.contains(i) ? -std::log1p(b) : std::log(b) - std::log1p(b);
          }
        continue;
      }
      for (const auto& g : groups) {
        std::size_t inc = 0;
        for (auto i : g.nodes) inc += m.contains(i);
        const double b = group_b(g);
        total += log_beta(1.0 + inc, b + (g.nodes.size() - inc)) - log_beta(1.0, b);
      }
    }
    return total;
  }

  /// Group decomposition of the eligible nodes of M (the union of Y_j(M) and C_j(M) per order).
  GroupDecomposition groups(const Model& m) const {
    GroupDecomposition out;
    if (spec_.family == PriorFamily::HUP || spec_.family == PriorFamily::EPP) {
      NodeGroup pool;
      for (auto i : m.nodes()) pool.nodes.push_back(i);
      for (auto i : space_->addable_children(m)) pool.nodes.push_back(i);
      std::sort(pool.nodes.begin(), pool.nodes.end());
      if (!pool.nodes.empty()) out.push_back(std::move(pool));
      return out;
    }
    for (auto order : space_->orders())
      for (auto& g : groups_at_order(m, order)) out.push_back(std::move(g));
    return out;
  }

  /// Draws a model from the prior by sweeping orders upward: group
  /// probabilities are drawn from their Beta laws once the lower orders are
  /// fixed, then eligible nodes are included independently.
  Model sample(Rng& rng) const {
    Model m = space_->empty_model();
    if (space_->size() == 0) return m;
    if (spec_.family == PriorFamily::EPP) {
      if (support_.empty()) throw std::domain_error("EPP sampling requires an enumerable space");
      const auto idx = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(support_.size()));
      return support_[std::min(idx, support_.size() - 1)];
    }
    if (spec_.family == PriorFamily::HUP) {
      const double pi = beta_draw(rng, 1.0, hup_b());
      for (auto order : space_->orders())
        for (auto i : space_->eligible_of_order(m, order))
          if (bernoulli(rng, pi)) m.insert(i);
      return m;
    }
    for (auto order : space_->orders()) {
      const auto groups = groups_at_order(m, order);
      if (spec_.family == PriorFamily::HIP) {
        std::size_t ch = 0;
        for (const auto& g : groups) ch += g.nodes.size();
        std::vector<std::size_t> chosen;
        for (const auto& g : groups)
          for (auto i : g.nodes)
            if (bernoulli(rng, 1.0 / (1.0 + hip_b(i, m, ch)))) chosen.push_back(i);
        for (auto i : chosen) m.insert(i);
        continue;
      }
      std::vector<std::size_t> chosen;
      for (const auto& g : groups) {
        const double pi = beta_draw(rng, 1.0, group_b(g));
        for (auto i : g.nodes)
          if (bernoulli(rng, pi)) chosen.push_back(i);
      }
      for (auto i : chosen) m.insert(i);
    }
    return m;
  }

  /// log |M| for EPP priors (NaN otherwise).
  double log_model_count() const noexcept { return log_count_; }

 private:
  void resolve_count(const Options& opts) {
    if (opts.log_model_count) {
      log_count_ = *opts.log_model_count;
    } else if (space_->is_intercept_quadratic()) {
      const BigCount c = count_quadratic_space(*space_);
      log_count_ = std::log(c.convert_to<double>());
    }
    // Keep the support for sampling when it fits under the cap.
    if (!std::isnan(log_count_) && log_count_ > std::log(static_cast<double>(opts.enumeration_cap))) return;
    try {
      support_ = enumerate(*space_, opts.enumeration_cap);
      if (std::isnan(log_count_)) log_count_ = std::log(static_cast<double>(support_.size()));
    } catch (const CapExceeded&) {
      if (std::isnan(log_count_))
        throw std::domain_error("EPP needs the model count: space exceeds the enumeration cap and no count was supplied");
    }
  }

  double hup_b() const {
    return spec_.scheme == HyperScheme::AllOnes ? 1.0 : static_cast<double>(space_->size());
  }

  double log_hup(const Model& m) const {
    const double nu = static_cast<double>(m.size());
    const double nc = static_cast<double>(space_->addable_children(m).size());
    if (nu + nc == 0) return 0.0;
    const double b = hup_b();
    return log_beta(nu + 1.0, nc + b) - log_beta(1.0, b);
  }

  double hip_b(std::size_t i, const Model& m, std::size_t ch) const {
    double b = spec_.scheme == HyperScheme::AllOnes ? 1.0 : static_cast<double>(ch);
    if (spec_.whm_parent_penalty) b += 2.0 * static_cast<double>(space_->parent_count(i) - space_->present_parents(m, i));
    return b;
  }

  double group_b(const NodeGroup& g) const {
    double b = spec_.scheme == HyperScheme::AllOnes ? 1.0 : static_cast<double>(g.nodes.size());
    if (spec_.whm_parent_penalty) b += 2.0 * static_cast<double>(g.missing_parents);
    return b;
  }

  /// Eligible nodes of one order (membership decided by lower orders only),
  /// partitioned per family: whole order (HIP/HOP), by length (HLP), by
  /// type (HTP), optionally split further by missing-parent count.
  GroupDecomposition groups_at_order(const Model& m, unsigned order) const {
    const auto eligible = space_->eligible_of_order(m, order);
    GroupDecomposition out;
    if (eligible.empty()) return out;
    const bool by_parents = spec_.whm_parent_penalty && spec_.family != PriorFamily::HIP;
    std::map<std::pair<std::vector<unsigned>, std::size_t>, std::vector<std::size_t>> keyed;
    for (auto i : eligible) {
      std::vector<unsigned> key;
      if (spec_.family == PriorFamily::HLP)
        key = {static_cast<unsigned>(space_->node(i).length())};
      else if (spec_.family == PriorFamily::HTP)
        key = space_->node(i).type();
      const std::size_t missing = by_parents ? space_->parent_count(i) - space_->present_parents(m, i) : 0;
      keyed[{std::move(key), missing}].push_back(i);
    }
    for (auto& [key, nodes] : keyed) out.push_back(NodeGroup{order, std::move(nodes), key.second});
    return out;
  }

  const ModelSpace* space_;
  PriorSpec spec_;
  double log_count_ = std::numeric_limits<double>::quiet_NaN();
  std::vector<Model> support_;
};

/// The eight hierarchical family/scheme columns of the classic prior table.
inline std::vector<PriorSpec> hierarchical_prior_grid() {
  std::vector<PriorSpec> out;
  for (auto f : {PriorFamily::HIP, PriorFamily::HOP, PriorFamily::HUP, PriorFamily::HLP})
    for (auto s : {HyperScheme::AllOnes, HyperScheme::ChildPenalty}) out.push_back(PriorSpec{f, s, false});
  return out;
}

}  // namespace hiersel
