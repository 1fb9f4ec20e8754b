#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiersel/marginals.hpp"
#include "hiersel/posterior.hpp"
#include "hiersel/priors.hpp"
#include "hiersel/random.hpp"

namespace hiersel {

enum class Kernel { Local, Intermediate, Global };

inline std::string to_string(Kernel k) {
  switch (k) {
    case Kernel::Local: return "local";
    case Kernel::Intermediate: return "intermediate";
    case Kernel::Global: return "global";
  }
  return "?";
}

enum class Direction { Ascending, Descending };

inline Direction reverse(Direction d) { return d == Direction::Ascending ? Direction::Descending : Direction::Ascending; }

struct SamplerConfig {
  std::array<double, 3> kernel_weights{0.5, 0.4, 0.1};  // local, intermediate, global
  double lambda = 0.5;
  std::uint64_t iterations = 10'000;
  std::uint64_t seed = 1;
  PriorSpec prior{};
  /// Prior used to draw global proposals; defaults to the target prior.
  std::optional<PriorSpec> global_proposal;
  std::optional<Model> start;
  bool use_cache = true;
  bool keep_trace = false;
  bool check_proposals = false;

  void validate() const {
    double sum = 0;
    for (double w : kernel_weights) {
      if (!(w >= 0)) throw std::invalid_argument("kernel weights must be nonnegative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("kernel weights must sum to 1");
    if (!(lambda >= 0 && lambda <= 1)) throw std::invalid_argument("lambda must lie in [0, 1]");
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  }
};

struct TraceEntry {
  std::uint64_t iter = 0;
  Model model;
  Kernel kernel = Kernel::Local;
  bool accepted = false;
  double log_post = 0;
};

/// Proposal mixture over a neighborhood: lambda times the posterior
/// renormalized over the members plus (1 - lambda) uniform.
struct Neighborhood {
  std::vector<Model> members;  // members[0] is the centre
  std::vector<double> probs;

  std::optional<std::size_t> index_of(const Model& m) const {
    for (std::size_t i = 0; i < members.size(); ++i)
      if (members[i] == m) return i;
    return std::nullopt;
  }
};

struct KernelStats {
  std::array<std::uint64_t, 3> proposed{};
  std::array<std::uint64_t, 3> accepted{};

  double acceptance_rate() const {
    const auto p = proposed[0] + proposed[1] + proposed[2];
    return p ? static_cast<double>(accepted[0] + accepted[1] + accepted[2]) / static_cast<double>(p) : 0.0;
  }
};

/// Metropolis-Hastings walk over a model space mixing local, intermediate and
/// global jumps. Every model whose marginal is evaluated lands in the table.
class Sampler {
 public:
  Sampler(const MarginalLikelihood& eval, SamplerConfig config, ModelPrior::Options prior_opts = {},
          std::shared_ptr<MarginalCache> cache = nullptr)
      : eval_(&eval),
        space_(&eval.space()),
        config_(std::move(config)),
        prior_(eval.space(), config_.prior, prior_opts),
        cache_(cache ? std::move(cache) : std::make_shared<MarginalCache>()),
        table_(eval.space()),
        rng_(derive_seed(config_.seed, 0)) {
    config_.validate();
    if (config_.global_proposal && !(*config_.global_proposal == config_.prior))
      proposal_prior_.emplace(eval.space(), *config_.global_proposal, prior_opts);
    current_ = config_.start.value_or(space_->empty_model());
    if (!space_->is_valid(current_)) throw std::invalid_argument("start model violates the heredity condition");
    current_lp_ = log_post(current_);
  }

  const SamplerConfig& config() const noexcept { return config_; }
  const ModelPrior& prior() const noexcept { return prior_; }
  const ModelPrior& global_prior() const noexcept { return proposal_prior_ ? *proposal_prior_ : prior_; }
  const PosteriorTable& table() const noexcept { return table_; }
  const std::vector<TraceEntry>& trace() const noexcept { return trace_; }
  const KernelStats& stats() const noexcept { return stats_; }
  const Model& current() const noexcept { return current_; }
  double current_log_post() const noexcept { return current_lp_; }
  std::uint64_t iteration() const noexcept { return iter_; }
  const MarginalCache& cache() const noexcept { return *cache_; }

  /// Log marginal plus log target prior; records the model in the table.
  double log_post(const Model& m) {
    if (config_.use_cache)
      if (const auto* e = table_.find(m)) return e->log_post();
    double lm;
    if (config_.use_cache) {
      lm = cache_->get_or_compute(m, *eval_);
    } else {
      lm = eval_->log_marginal(m);
    }
    const double lp = prior_.log_prior(m);
    return table_.record(m, lm, lp).log_post();
  }

  /// Centre plus every single-node toggle that keeps heredity, optionally
  /// restricted to toggles of one order.
  Neighborhood neighborhood(const Model& m, std::optional<unsigned> order = std::nullopt) {
    Neighborhood nb;
    nb.members.push_back(m);
    std::vector<std::size_t> toggles = space_->extreme_nodes(m);
    const auto add = space_->addable_children(m);
    toggles.insert(toggles.end(), add.begin(), add.end());
    std::sort(toggles.begin(), toggles.end());
    for (auto i : toggles)
      if (!order || space_->node_order(i) == *order) nb.members.push_back(m.toggled(i));

    const std::size_t n = nb.members.size();
    std::vector<double> lp(n);
    for (std::size_t i = 0; i < n; ++i) lp[i] = log_post(nb.members[i]);
    const double z = log_sum_exp(lp);
    nb.probs.resize(n);
    const double uniform = (1.0 - config_.lambda) / static_cast<double>(n);
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double post = std::isfinite(z) ? std::exp(lp[i] - z) : 1.0 / static_cast<double>(n);
      nb.probs[i] = config_.lambda * post + uniform;
      sum += nb.probs[i];
    }
    if (config_.check_proposals && std::abs(sum - 1.0) > 1e-10)
      throw std::logic_error("proposal distribution does not sum to 1");
    return nb;
  }

  /// Orders visited by an intermediate jump in direction d.
  std::vector<unsigned> stage_orders(Direction d) const {
    auto o = space_->orders();
    if (d == Direction::Descending) std::reverse(o.begin(), o.end());
    return o;
  }

  /// Log probability that the staged walk in direction d goes from `from` to
  /// `to`. Each stage toggles at most one node of its order, so the path is
  /// determined by the endpoints; -inf when no such path exists.
  double path_log_prob(const Model& from, const Model& to, Direction d) {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    Model cur = from;
    double lp = 0;
    for (auto order : stage_orders(d)) {
      auto [a, b] = space_->order_range(order);
      std::optional<std::size_t> diff;
      for (std::size_t i = a; i < b; ++i)
        if (cur.contains(i) != to.contains(i)) {
          if (diff) return kNegInf;
          diff = i;
        }
      const Model next = diff ? cur.toggled(*diff) : cur;
      const auto nb = neighborhood(cur, order);
      const auto idx = nb.index_of(next);
      if (!idx) return kNegInf;
      lp += std::log(nb.probs[*idx]);
      cur = next;
    }
    return cur == to ? lp : kNegInf;
  }

  /// One MH iteration. Returns true when the proposal was accepted.
  bool step() {
    const double u = uniform01(rng_);
    const auto& w = config_.kernel_weights;
    const Kernel k = u < w[0] ? Kernel::Local : (u < w[0] + w[1] ? Kernel::Intermediate : Kernel::Global);
    Model proposal;
    double log_ratio = 0;
    switch (k) {
      case Kernel::Local: std::tie(proposal, log_ratio) = local_move(); break;
      case Kernel::Intermediate: std::tie(proposal, log_ratio) = intermediate_move(); break;
      case Kernel::Global: std::tie(proposal, log_ratio) = global_move(); break;
    }
    const auto ki = static_cast<std::size_t>(k);
    ++stats_.proposed[ki];
    bool accepted = log_ratio >= 0;
    if (!accepted) accepted = std::log(uniform01(rng_)) < log_ratio;
    if (accepted) {
      ++stats_.accepted[ki];
      current_ = std::move(proposal);
      current_lp_ = log_post(current_);
    }
    ++iter_;
    table_.visit(current_);
    if (config_.keep_trace) trace_.push_back({iter_, current_, k, accepted, current_lp_});
    return accepted;
  }

  void run(std::uint64_t iterations) {
    for (std::uint64_t i = 0; i < iterations; ++i) step();
  }
  void run() { run(config_.iterations); }

 private:
  std::size_t draw(const std::vector<double>& probs) {
    const double u = uniform01(rng_);
    double acc = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;
  }

  std::pair<Model, double> local_move() {
    const auto fwd = neighborhood(current_);
    const auto j = draw(fwd.probs);
    const Model& prop = fwd.members[j];
    if (j == 0) return {prop, 0.0};
    const auto rev = neighborhood(prop);
    const auto back = rev.index_of(current_);
    if (!back) throw std::logic_error("local move is not reversible");
    const double ratio = log_post(prop) - current_lp_ + std::log(rev.probs[*back]) - std::log(fwd.probs[j]);
    return {prop, ratio};
  }

  std::pair<Model, double> intermediate_move() {
    const Direction d = uniform01(rng_) < 0.5 ? Direction::Ascending : Direction::Descending;
    Model cur = current_;
    double fwd = 0;
    for (auto order : stage_orders(d)) {
      const auto nb = neighborhood(cur, order);
      const auto j = draw(nb.probs);
      fwd += std::log(nb.probs[j]);
      cur = nb.members[j];
    }
    if (cur == current_) return {cur, 0.0};
    const double rev = path_log_prob(cur, current_, reverse(d));
    if (!std::isfinite(rev)) throw std::logic_error("intermediate move is not reversible");
    return {cur, log_post(cur) - current_lp_ + rev - fwd};
  }

  std::pair<Model, double> global_move() {
    Model prop = global_prior().sample(rng_);
    const double lp_new = log_post(prop);
    if (!proposal_prior_) {
      // Target prior and proposal cancel, leaving the Bayes factor.
      const double lm_new = table_.find(prop)->log_marginal;
      const double lm_cur = table_.find(current_)->log_marginal;
      return {prop, lm_new - lm_cur};
    }
    const double ratio = lp_new - current_lp_ + proposal_prior_->log_prior(current_) - proposal_prior_->log_prior(prop);
    return {prop, ratio};
  }

  const MarginalLikelihood* eval_;
  const ModelSpace* space_;
  SamplerConfig config_;
  ModelPrior prior_;
  std::optional<ModelPrior> proposal_prior_;
  std::shared_ptr<MarginalCache> cache_;
  PosteriorTable table_;
  Rng rng_;
  Model current_;
  double current_lp_ = 0;
  std::uint64_t iter_ = 0;
  KernelStats stats_;
  std::vector<TraceEntry> trace_;
};

/// Global-jump proposal prior for a target: the target itself when it can be
/// sampled, otherwise HIP(1,1).
inline std::optional<PriorSpec> default_global_proposal(const ModelSpace& space, const PriorSpec& target,
                                                        std::size_t enumeration_cap) {
  if (target.family != PriorFamily::EPP) return std::nullopt;
  try {
    if (space.is_intercept_quadratic() && count_quadratic_space(space) > enumeration_cap)
      return PriorSpec{PriorFamily::HIP, HyperScheme::AllOnes, false};
    count_by_enumeration(space, enumeration_cap);
    return std::nullopt;
  } catch (const CapExceeded&) {
    return PriorSpec{PriorFamily::HIP, HyperScheme::AllOnes, false};
  }
}

inline nlohmann::json to_json(const TraceEntry& t) {
  return {{"iter", t.iter}, {"model", t.model.bit_string()}, {"kernel", to_string(t.kernel)},
          {"accepted", t.accepted}, {"log_post", t.log_post}};
}

/// Newline-delimited JSON, one object per iteration.
inline void write_trace(std::ostream& out, const std::vector<TraceEntry>& trace) {
  for (const auto& t : trace) out << to_json(t).dump() << '\n';
}

}  // namespace hiersel
