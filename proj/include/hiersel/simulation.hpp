#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hiersel/marginals.hpp"
#include "hiersel/posterior.hpp"
#include "hiersel/priors.hpp"
#include "hiersel/random.hpp"
#include "hiersel/sampler.hpp"

namespace hiersel {

enum class Allocation { Equal, Decreasing, Increasing };

inline std::string to_string(Allocation a) {
  switch (a) {
    case Allocation::Equal: return "equal";
    case Allocation::Decreasing: return "decreasing";
    case Allocation::Increasing: return "increasing";
  }
  return "?";
}

inline Allocation parse_allocation(const std::string& s) {
  if (s == "equal") return Allocation::Equal;
  if (s == "decreasing") return Allocation::Decreasing;
  if (s == "increasing") return Allocation::Increasing;
  throw std::invalid_argument("unknown allocation '" + s + "' (expected equal, decreasing or increasing)");
}

/// Relative coefficient magnitude for a term of order o.
inline double allocation_weight(Allocation a, unsigned order) {
  switch (a) {
    case Allocation::Equal: return 1.0;
    case Allocation::Decreasing: return std::ldexp(1.0, 1 - static_cast<int>(order));
    case Allocation::Increasing: return std::ldexp(1.0, static_cast<int>(order) - 1);
  }
  return 1.0;
}

struct SimDesign {
  std::size_t n = 100;
  double snr = 1.0;
  Allocation allocation = Allocation::Equal;
  /// Non-base terms carrying signal; need not satisfy any heredity condition.
  std::vector<Term> true_terms;
  std::size_t replications = 1;
  std::uint64_t seed = 1;

  void validate(const ModelSpace& space) const {
    if (!(snr > 0)) throw std::invalid_argument("snr must be positive");
    if (replications < 1) throw std::invalid_argument("replications must be >= 1");
    if (n <= space.base_terms().size() + space.size())
      throw std::invalid_argument("n must exceed the number of terms in the full model");
    for (const auto& t : true_terms)
      if (!space.index_of(t)) throw std::invalid_argument("true term " + t.to_string() + " is not a node of the space");
  }
};

struct GeneratedData {
  Dataset data;
  std::vector<Term> terms;  // signal terms
  VectorXd beta;            // aligned with `terms`
};

inline MatrixXd standard_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  MatrixXd x(rows, cols);
  // Row-major fill so that prefixes of a larger draw match smaller draws.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) x(r, c) = standard_normal(rng);
  return x;
}

/// Standard normal mains, positive coefficients patterned by order and scaled
/// so that the sample variance of the mean equals `snr`, unit-variance noise.
inline GeneratedData generate(const SimDesign& design, const ModelSpace& space, Rng& rng) {
  design.validate(space);
  const auto n = static_cast<Eigen::Index>(design.n);
  GeneratedData g;
  g.terms = design.true_terms;
  g.data.x = standard_normal_matrix(rng, n, static_cast<Eigen::Index>(space.num_vars()));
  for (std::size_t j = 0; j < space.num_vars(); ++j) g.data.names.push_back("x" + std::to_string(j + 1));
  g.data.response = "y";
  VectorXd noise(n);
  for (Eigen::Index i = 0; i < n; ++i) noise(i) = standard_normal(rng);
  g.beta = VectorXd::Zero(static_cast<Eigen::Index>(g.terms.size()));
  VectorXd mean = VectorXd::Zero(n);
  if (!g.terms.empty()) {
    for (std::size_t t = 0; t < g.terms.size(); ++t)
      g.beta(static_cast<Eigen::Index>(t)) = allocation_weight(design.allocation, g.terms[t].order());
    mean = expand_terms(g.data.x, g.terms) * g.beta;
    const double var = (mean.array() - mean.mean()).square().sum() / static_cast<double>(n - 1);
    if (var > 0) {
      const double c = std::sqrt(design.snr / var);
      g.beta *= c;
      mean *= c;
    }
  }
  g.data.y = mean + noise;
  return g;
}

struct SelectionScore {
  double tp_rate = 0;
  double fp_rate = 0;
  double true_model_prob = 0;
  std::optional<std::size_t> true_model_rank;
  bool found = false;
};

/// True and false positive rates of `hpm` against the signal terms; probability
/// and rank of the true model as reported by the summary.
inline SelectionScore score(const PosteriorSummary& summary, const std::vector<Term>& true_terms,
                            const ModelSpace& space) {
  SelectionScore s;
  std::vector<bool> truth(space.size(), false);
  for (const auto& t : true_terms) {
    const auto idx = space.index_of(t);
    if (!idx) throw std::invalid_argument("score: true term is not a node of the space");
    truth[*idx] = true;
  }
  const auto n_true = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
  std::size_t tp = 0, fp = 0;
  for (auto i : summary.hpm.nodes()) (truth[i] ? tp : fp)++;
  s.tp_rate = n_true == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(n_true);
  const std::size_t n_false = space.size() - n_true;
  s.fp_rate = n_false == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(n_false);
  s.true_model_prob = summary.true_prob;
  s.true_model_rank = summary.true_rank;
  s.found = summary.true_rank.has_value();
  return s;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Least-squares slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols_slope: need two or more paired points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

/// First `n` rows of a dataset.
inline Dataset prefix(const Dataset& d, Eigen::Index n) {
  Dataset out = d;
  out.y = d.y.head(n);
  out.x = d.x.topRows(n);
  return out;
}

/// Noisy data from fixed coefficients: y = X_terms beta + N(0, 1) noise.
inline Dataset draw_with_coefficients(const ModelSpace& space, const std::vector<Term>& terms, const VectorXd& beta,
                                      std::size_t n, Rng& rng) {
  Dataset d;
  d.x = standard_normal_matrix(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(space.num_vars()));
  for (std::size_t j = 0; j < space.num_vars(); ++j) d.names.push_back("x" + std::to_string(j + 1));
  d.response = "y";
  d.y = expand_terms(d.x, terms) * beta;
  for (Eigen::Index i = 0; i < d.y.size(); ++i) d.y(i) += standard_normal(rng);
  return d;
}

/// Exact posterior probability of a target model across sample sizes.
struct ConcentrationCurve {
  std::vector<std::size_t> ns;
  std::vector<std::vector<double>> probs;  // [n index][replication]
  std::vector<double> medians;
};

/// Posterior of the strong-heredity closure of the true model under exact
/// enumeration. Each replication draws one dataset at the largest n and
/// evaluates its nested prefixes.
inline ConcentrationCurve theorem1_experiment(const ModelSpace& space, const std::vector<Term>& true_terms,
                                              double coefficient, const std::vector<std::size_t>& ns,
                                              std::size_t replications, std::uint64_t seed,
                                              PriorSpec prior = {PriorFamily::HIP, HyperScheme::AllOnes, false},
                                              std::size_t cap = 1'000'000) {
  if (space.heredity() != Heredity::Strong) throw std::invalid_argument("theorem1_experiment needs a strong heredity space");
  if (ns.empty()) throw std::invalid_argument("theorem1_experiment: empty n grid");
  const auto models = enumerate(space, cap);
  const ModelPrior pr(space, prior);
  Model signal = space.empty_model();
  for (const auto& t : true_terms) {
    const auto idx = space.index_of(t);
    if (!idx) throw std::invalid_argument("theorem1_experiment: true term outside the space");
    signal.insert(*idx);
  }
  const Model closure = space.strong_closure(signal);
  const VectorXd beta = VectorXd::Constant(static_cast<Eigen::Index>(true_terms.size()), coefficient);
  const std::size_t n_max = *std::max_element(ns.begin(), ns.end());

  ConcentrationCurve curve;
  curve.ns = ns;
  curve.probs.assign(ns.size(), {});
  for (std::size_t r = 0; r < replications; ++r) {
    Rng rng(derive_seed(seed, r));
    const Dataset full = draw_with_coefficients(space, true_terms, beta, n_max, rng);
    for (std::size_t k = 0; k < ns.size(); ++k) {
      const Dataset d = prefix(full, static_cast<Eigen::Index>(ns[k]));
      const GPriorMarginal eval(d, space);
      const auto probs = renormalize(exact_table(eval, pr, models));
      curve.probs[k].push_back(probs.at(closure));
    }
  }
  for (const auto& v : curve.probs) curve.medians.push_back(median(v));
  return curve;
}

struct MassSplit {
  double first = 0;     // p(M1 | y)
  double second = 0;    // p(M2 | y)
  double combined = 0;  // p(M1) + p(M2)
  double share = 0;     // p(M1) / (p(M1) + p(M2))
  double strong_mass = 0;  // p({x1, x2, x1x2} | y) in the strong heredity space
};

/// y = beta x1 x2 + noise on two mains. Under weak heredity the two minimal
/// models {x1, x1x2} and {x2, x1x2} share the mass at random; under strong
/// heredity {x1, x2, x1x2} takes it.
inline std::vector<MassSplit> theorem2_experiment(std::size_t n, std::size_t replications, std::uint64_t seed,
                                                  double beta = 1.0,
                                                  PriorSpec prior = {PriorFamily::HIP, HyperScheme::AllOnes, false}) {
  const auto weak = ModelSpace::full_surface(2, 2, Heredity::Weak);
  const auto strong = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const auto weak_models = enumerate(weak, 1000);
  const auto strong_models = enumerate(strong, 1000);
  const ModelPrior wp(weak, prior), sp(strong, prior);
  const Model m1 = weak.model_from_strings({"x1", "x1*x2"});
  const Model m2 = weak.model_from_strings({"x2", "x1*x2"});
  const Model ms = strong.model_from_strings({"x1", "x2", "x1*x2"});
  const std::vector<Term> signal{Term{1, 1}};
  std::vector<MassSplit> out;
  for (std::size_t r = 0; r < replications; ++r) {
    Rng rng(derive_seed(seed, r));
    const Dataset d = draw_with_coefficients(weak, signal, VectorXd::Constant(1, beta), n, rng);
    const GPriorMarginal we(d, weak), se(d, strong);
    const auto wpost = renormalize(exact_table(we, wp, weak_models));
    const auto spost = renormalize(exact_table(se, sp, strong_models));
    MassSplit s;
    s.first = wpost.at(m1);
    s.second = wpost.at(m2);
    s.combined = s.first + s.second;
    s.share = s.combined > 0 ? s.first / s.combined : 0.5;
    s.strong_mass = spost.at(ms);
    out.push_back(s);
  }
  return out;
}

/// Mean log Bayes factor of `truth` against `other` across replications, at
/// each sample size (nested prefixes of one draw per replication).
struct LearningCurve {
  std::vector<std::size_t> ns;
  std::vector<double> mean_log_bf;
};

inline LearningCurve learning_curve(const ModelSpace& space, const std::vector<Term>& signal, const VectorXd& beta,
                                    const Model& truth, const Model& other, const std::vector<std::size_t>& ns,
                                    std::size_t replications, std::uint64_t seed) {
  LearningCurve c;
  c.ns = ns;
  c.mean_log_bf.assign(ns.size(), 0.0);
  const std::size_t n_max = *std::max_element(ns.begin(), ns.end());
  for (std::size_t r = 0; r < replications; ++r) {
    Rng rng(derive_seed(seed, r));
    const Dataset full = draw_with_coefficients(space, signal, beta, n_max, rng);
    for (std::size_t k = 0; k < ns.size(); ++k) {
      const GPriorMarginal eval(prefix(full, static_cast<Eigen::Index>(ns[k])), space);
      c.mean_log_bf[k] += (eval.log_marginal(truth) - eval.log_marginal(other)) / static_cast<double>(replications);
    }
  }
  return c;
}

/// The shipped true model for the five-predictor quadratic experiment:
/// three mains, two squares and two interactions, strongly hereditary.
inline std::vector<Term> preset_quadratic_truth() {
  return {Term{1, 0, 0, 0, 0}, Term{0, 1, 0, 0, 0}, Term{0, 0, 1, 0, 0}, Term{2, 0, 0, 0, 0},
          Term{0, 2, 0, 0, 0}, Term{1, 1, 0, 0, 0}, Term{1, 0, 1, 0, 0}};
}

struct SimRow {
  std::size_t replication = 0;
  PriorSpec prior;
  std::size_t n = 0;
  double snr = 0;
  SelectionScore score;
};

/// One selection experiment: per replication, generate data, run the sampler
/// under each prior and score its highest posterior model.
inline std::vector<SimRow> run_selection_experiment(const ModelSpace& space, const SimDesign& design,
                                                    const std::vector<PriorSpec>& priors, std::uint64_t iterations,
                                                    std::size_t enumeration_cap = 1'000'000) {
  design.validate(space);
  std::optional<Model> truth;
  {
    Model m = space.empty_model();
    for (const auto& t : design.true_terms) m.insert(*space.index_of(t));
    if (space.is_valid(m)) truth = m;
  }
  std::vector<SimRow> rows;
  for (std::size_t r = 0; r < design.replications; ++r) {
    Rng rng(derive_seed(design.seed, r));
    const auto gen = generate(design, space, rng);
    const GPriorMarginal eval(gen.data, space);
    auto cache = std::make_shared<MarginalCache>();
    for (std::size_t k = 0; k < priors.size(); ++k) {
      SamplerConfig cfg;
      cfg.prior = priors[k];
      cfg.iterations = iterations;
      cfg.seed = derive_seed(design.seed, 1'000'003ull * (r + 1) + k);
      cfg.global_proposal = default_global_proposal(space, priors[k], enumeration_cap);
      ModelPrior::Options opts;
      opts.enumeration_cap = enumeration_cap;
      Sampler s(eval, cfg, opts, cache);
      s.run();
      auto summary = summarize(s.table(), 1, truth);
      rows.push_back({r, priors[k], design.n, design.snr, score(summary, design.true_terms, space)});
    }
  }
  return rows;
}

}  // namespace hiersel
