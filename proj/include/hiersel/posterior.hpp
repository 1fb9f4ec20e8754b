#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiersel/marginals.hpp"
#include "hiersel/model_space.hpp"
#include "hiersel/priors.hpp"

namespace hiersel {

struct TableEntry {
  double log_marginal = 0;
  double log_prior = 0;
  std::uint64_t visits = 0;

  double log_post() const noexcept { return log_marginal + log_prior; }
};

/// Every model evaluated during a run, keyed in canonical model order.
class PosteriorTable {
 public:
  explicit PosteriorTable(const ModelSpace& space) : space_(&space) {}

  const ModelSpace& space() const noexcept { return *space_; }

  /// Registers an evaluated model. Re-recording must repeat the same values.
  const TableEntry& record(const Model& m, double log_marginal, double log_prior) {
    if (!std::isfinite(log_prior)) throw std::invalid_argument("PosteriorTable: log prior must be finite");
    auto [it, fresh] = entries_.try_emplace(m, TableEntry{log_marginal, log_prior, 0});
    if (fresh) {
      if (!space_->is_valid(m)) {
        entries_.erase(it);
        throw std::invalid_argument("PosteriorTable: model violates the heredity condition");
      }
    } else if (std::abs(it->second.log_marginal - log_marginal) > 1e-9 ||
               std::abs(it->second.log_prior - log_prior) > 1e-9) {
      throw std::logic_error("PosteriorTable: conflicting values recorded for a model");
    }
    return it->second;
  }

  /// Counts one iteration spent at `m`, which must already be recorded.
  void visit(const Model& m) {
    auto it = entries_.find(m);
    if (it == entries_.end()) throw std::logic_error("PosteriorTable: visit of an unrecorded model");
    ++it->second.visits;
    ++iterations_;
  }

  /// Restores a saved visit count (table artifacts); adds to the iteration total.
  void add_visits(const Model& m, std::uint64_t count) {
    auto it = entries_.find(m);
    if (it == entries_.end()) throw std::logic_error("PosteriorTable: visit of an unrecorded model");
    it->second.visits += count;
    iterations_ += count;
  }

  const TableEntry* find(const Model& m) const {
    auto it = entries_.find(m);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const std::map<Model, TableEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::uint64_t iterations() const noexcept { return iterations_; }

 private:
  const ModelSpace* space_;
  std::map<Model, TableEntry> entries_;
  std::uint64_t iterations_ = 0;
};

using ProbabilityMap = std::map<Model, double>;

inline double log_sum_exp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

/// p(M) proportional to m(y|M) pi(M) over the tabled models.
inline ProbabilityMap renormalize(const PosteriorTable& table) {
  if (table.empty()) throw std::invalid_argument("renormalize: empty table");
  std::vector<double> lp;
  lp.reserve(table.size());
  for (const auto& [m, e] : table.entries()) lp.push_back(e.log_post());
  const double z = log_sum_exp(lp);
  if (!std::isfinite(z)) throw std::domain_error("renormalize: no model has finite posterior mass");
  ProbabilityMap out;
  std::size_t i = 0;
  for (const auto& [m, e] : table.entries()) out.emplace_hint(out.end(), m, std::exp(lp[i++] - z));
  return out;
}

/// Visit proportions of the chain's post-decision states.
inline ProbabilityMap frequency(const PosteriorTable& table) {
  if (table.iterations() == 0) throw std::invalid_argument("frequency: no iterations recorded");
  ProbabilityMap out;
  const double total = static_cast<double>(table.iterations());
  for (const auto& [m, e] : table.entries())
    if (e.visits > 0) out.emplace_hint(out.end(), m, static_cast<double>(e.visits) / total);
  return out;
}

/// Half the L1 distance; keys missing from one side count as probability 0.
inline double tvd(const ProbabilityMap& p, const ProbabilityMap& q) {
  double s = 0;
  auto a = p.begin(), b = q.begin();
  while (a != p.end() || b != q.end()) {
    if (b == q.end() || (a != p.end() && a->first < b->first)) {
      s += std::abs(a->second);
      ++a;
    } else if (a == p.end() || b->first < a->first) {
      s += std::abs(b->second);
      ++b;
    } else {
      s += std::abs(a->second - b->second);
      ++a;
      ++b;
    }
  }
  return 0.5 * s;
}

/// Per-node inclusion probability under the renormalized posterior, indexed like the space's nodes.
inline std::vector<double> inclusion_probabilities(const PosteriorTable& table) {
  const auto probs = renormalize(table);
  std::vector<double> out(table.space().size(), 0.0);
  for (const auto& [m, p] : probs)
    for (auto i : m.nodes()) out[i] += p;
  return out;
}

struct RankedModel {
  Model model;
  double log_post = 0;
  double prob = 0;
};

/// Tabled models by descending renormalized probability, ties by model key.
inline std::vector<RankedModel> ranked_models(const PosteriorTable& table, std::size_t k = 0) {
  const auto probs = renormalize(table);
  std::vector<RankedModel> all;
  all.reserve(probs.size());
  for (const auto& [m, p] : probs) all.push_back({m, table.find(m)->log_post(), p});
  // Stable sort keeps key order among exact ties.
  std::stable_sort(all.begin(), all.end(), [](const RankedModel& a, const RankedModel& b) {
    return a.log_post > b.log_post;
  });
  if (k > 0 && k < all.size()) all.resize(k);
  return all;
}

/// 1-based rank of `target`, or nullopt when it was never evaluated.
inline std::optional<std::size_t> rank_of(const PosteriorTable& table, const Model& target) {
  const auto* t = table.find(target);
  if (!t) return std::nullopt;
  std::size_t rank = 1;
  for (const auto& [m, e] : table.entries()) {
    if (m == target) continue;
    if (e.log_post() > t->log_post() || (e.log_post() == t->log_post() && m < target)) ++rank;
  }
  return rank;
}

/// Posterior-mean prediction averaged over the K most probable tabled models.
/// `newx` holds raw mains; the training transform is applied here.
inline VectorXd model_average_predict(const PosteriorTable& table, const MarginalLikelihood& eval,
                                      const MatrixXd& newx, std::size_t k, const MainTransform& transform = {}) {
  if (k < 1) throw std::invalid_argument("model_average_predict: K must be >= 1");
  const auto& space = eval.space();
  if (static_cast<std::size_t>(newx.cols()) != space.num_vars())
    throw std::invalid_argument("model_average_predict: new data has the wrong number of columns");
  const MatrixXd x = transform.apply(newx);
  const auto top = ranked_models(table, k);
  std::vector<double> lp;
  for (const auto& r : top) lp.push_back(r.log_post);
  const double z = log_sum_exp(lp);
  VectorXd yhat = VectorXd::Zero(x.rows());
  for (std::size_t i = 0; i < top.size(); ++i) {
    const double w = std::exp(lp[i] - z);
    if (w == 0) continue;
    const MatrixXd design = expand_terms(x, space.terms_of(top[i].model));
    yhat += w * (design * eval.posterior_mean(top[i].model));
  }
  return yhat;
}

/// Table holding every model of the space: the exact posterior under `prior`.
inline PosteriorTable exact_table(const MarginalLikelihood& eval, const ModelPrior& prior, const std::vector<Model>& models) {
  PosteriorTable table(eval.space());
  for (const auto& m : models) table.record(m, eval.log_marginal(m), prior.log_prior(m));
  return table;
}

inline PosteriorTable exact_table(const MarginalLikelihood& eval, const ModelPrior& prior, std::size_t cap) {
  return exact_table(eval, prior, enumerate(eval.space(), cap));
}

struct PosteriorSummary {
  ProbabilityMap renormalized;
  ProbabilityMap frequency;
  Model hpm;
  std::vector<RankedModel> top_k;
  std::vector<double> inclusion;
  std::optional<Model> true_model;
  std::optional<std::size_t> true_rank;
  double true_prob = 0;
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_evaluated = 0;
};

inline PosteriorSummary summarize(const PosteriorTable& table, std::size_t top_k,
                                  std::optional<Model> true_model = std::nullopt) {
  PosteriorSummary s;
  s.renormalized = renormalize(table);
  if (table.iterations() > 0) s.frequency = frequency(table);
  s.top_k = ranked_models(table, top_k);
  s.hpm = ranked_models(table, 1).front().model;
  s.inclusion = inclusion_probabilities(table);
  s.n_evaluated = table.size();
  if (true_model) {
    s.true_model = true_model;
    s.true_rank = rank_of(table, *true_model);
    if (auto it = s.renormalized.find(*true_model); it != s.renormalized.end()) s.true_prob = it->second;
  }
  return s;
}

inline std::string model_label(const ModelSpace& space, const Model& m) {
  std::string s = "{";
  const auto terms = space.term_strings(m);
  for (std::size_t i = 0; i < terms.size(); ++i) s += (i ? "," : "") + terms[i];
  return s + "}";
}

inline nlohmann::json model_json(const ModelSpace& space, const Model& m) { return space.term_strings(m); }

inline nlohmann::json to_json(const PosteriorSummary& s, const ModelSpace& space) {
  nlohmann::json j;
  j["hpm"] = model_json(space, s.hpm);
  j["top_k"] = nlohmann::json::array();
  for (const auto& r : s.top_k)
    j["top_k"].push_back({{"model", model_json(space, r.model)}, {"log_post", r.log_post}, {"prob", r.prob}});
  j["inclusion"] = nlohmann::json::object();
  for (std::size_t i = 0; i < space.size(); ++i) j["inclusion"][space.node(i).to_string()] = s.inclusion[i];
  nlohmann::json diag;
  diag["tvd_renorm_vs_freq"] = s.frequency.empty() ? nlohmann::json(nullptr) : nlohmann::json(tvd(s.renormalized, s.frequency));
  diag["acceptance_rate"] = std::isnan(s.acceptance_rate) ? nlohmann::json(nullptr) : nlohmann::json(s.acceptance_rate);
  diag["n_evaluated"] = s.n_evaluated;
  j["diagnostics"] = diag;
  if (s.true_model) {
    j["true_model"] = {{"model", model_json(space, *s.true_model)},
                       {"prob", s.true_prob},
                       {"rank", s.true_rank ? nlohmann::json(*s.true_rank) : nlohmann::json(nullptr)}};
  }
  return j;
}

}  // namespace hiersel
