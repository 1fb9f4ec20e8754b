#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "oracles.hpp"

using namespace hiersel;

namespace {

Dataset two_main_data(std::size_t n, std::uint64_t seed, double signal = 0.3) {
  Rng rng(seed);
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(n), 2);
  d.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    d.x(i, 0) = standard_normal(rng);
    d.x(i, 1) = standard_normal(rng);
    d.y(i) = signal * (d.x(i, 0) + d.x(i, 1) + d.x(i, 0) * d.x(i, 1)) + standard_normal(rng);
  }
  return d;
}

class FlatMarginal final : public MarginalLikelihood {
 public:
  explicit FlatMarginal(const ModelSpace& s) : space_(&s) {}
  double log_marginal(const Model&) const override { return 0.0; }
  VectorXd posterior_mean(const Model& m) const override { return VectorXd::Zero(static_cast<Eigen::Index>(space_->terms_of(m).size())); }
  const ModelSpace& space() const override { return *space_; }

 private:
  const ModelSpace* space_;
};

SamplerConfig config(std::uint64_t seed, PriorSpec prior = {PriorFamily::HIP, HyperScheme::ChildPenalty, false}) {
  SamplerConfig c;
  c.seed = seed;
  c.prior = prior;
  return c;
}

}  // namespace

TEST(Neighborhood, MembersAreAllValidSingleToggles) {
  for (auto hc : {Heredity::Strong, Heredity::Weak}) {
    const auto space = ModelSpace::full_surface(2, 2, hc);
    const auto d = two_main_data(60, 1);
    const GPriorMarginal eval(d, space);
    Sampler s(eval, config(1));
    for (const auto& m : enumerate(space, 100)) {
      const auto nb = s.neighborhood(m);
      std::set<Model> expected{m};
      for (std::size_t i = 0; i < space.size(); ++i)
        if (space.is_valid(m.toggled(i))) expected.insert(m.toggled(i));
      EXPECT_EQ(std::set<Model>(nb.members.begin(), nb.members.end()), expected);
    }
  }
}

TEST(Neighborhood, ProbabilitiesAreBoundedAndSumToOne) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const auto d = two_main_data(60, 2, 1.0);
  const GPriorMarginal eval(d, space);
  Sampler s(eval, config(2));
  for (const auto& m : enumerate(space, 100)) {
    const auto nb = s.neighborhood(m);
    const double N = static_cast<double>(nb.members.size());
    double sum = 0;
    for (double p : nb.probs) {
      EXPECT_GE(p, 0.5 / N - 1e-15);
      EXPECT_LE(p, 0.5 * (1 + 1 / N) + 1e-15);
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Neighborhood, FlatPosteriorGivesUniformProposal) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const FlatMarginal flat(space);
  Sampler s(flat, config(3, {PriorFamily::EPP, HyperScheme::AllOnes, false}));
  for (const auto& m : enumerate(space, 100)) {
    const auto nb = s.neighborhood(m);
    for (double p : nb.probs) EXPECT_NEAR(p, 1.0 / static_cast<double>(nb.members.size()), 1e-15);
  }
}

TEST(Intermediate, PathProbabilitiesMatchEnumeratedWalks) {
  for (auto hc : {Heredity::Strong, Heredity::Weak}) {
    const auto space = ModelSpace::full_surface(2, 2, hc);
    const auto d = two_main_data(50, 4);
    const GPriorMarginal eval(d, space);
    Sampler s(eval, config(4));
    const auto models = enumerate(space, 100);
    for (const auto& start : models)
      for (auto dir : {Direction::Ascending, Direction::Descending}) {
        const auto ends = oracle::staged_endpoints(s, space, start, dir);
        double total = 0;
        for (const auto& [end, p] : ends) {
          total += p;
          EXPECT_NEAR(std::exp(s.path_log_prob(start, end, dir)), p, 1e-12);
          // The reverse walk replays the toggles and has positive probability.
          EXPECT_GT(std::exp(s.path_log_prob(end, start, reverse(dir))), 0.0);
          std::size_t diff = 0;
          for (std::size_t i = 0; i < space.size(); ++i) diff += start.contains(i) != end.contains(i);
          EXPECT_LE(diff, space.max_order() - space.min_order() + 1);
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
        for (const auto& m : models) {
          if (ends.count(m)) continue;
          EXPECT_EQ(s.path_log_prob(start, m, dir), -std::numeric_limits<double>::infinity());
        }
      }
  }
}

TEST(Intermediate, SingleOrderSpaceReducesToOneLocalStage) {
  const auto space = ModelSpace::full_surface(3, 1, Heredity::Strong);
  Rng rng(5);
  Dataset d;
  d.x = MatrixXd(40, 3);
  d.y = VectorXd(40);
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 3; ++j) d.x(i, j) = standard_normal(rng);
    d.y(i) = d.x(i, 0) + standard_normal(rng);
  }
  const GPriorMarginal eval(d, space);
  Sampler s(eval, config(5));
  for (const auto& m : enumerate(space, 100)) {
    const auto nb = s.neighborhood(m);
    for (std::size_t k = 0; k < nb.members.size(); ++k)
      EXPECT_NEAR(std::exp(s.path_log_prob(m, nb.members[k], Direction::Ascending)), nb.probs[k], 1e-14);
  }
}

TEST(Global, AcceptanceRateMatchesBayesFactor) {
  const auto space = ModelSpace::full_surface(1, 1, Heredity::Strong);
  Rng rng(6);
  Dataset d;
  d.x = MatrixXd(30, 1);
  d.y = VectorXd(30);
  for (int i = 0; i < 30; ++i) {
    d.x(i, 0) = standard_normal(rng);
    d.y(i) = 0.45 * d.x(i, 0) + standard_normal(rng);
  }
  const GPriorMarginal eval(d, space);
  const auto base = space.empty_model();
  const auto one = space.model_from_strings({"x1"});
  const double bf = std::exp(eval.log_marginal(base) - eval.log_marginal(one));  // moving from {x1} to base
  const ModelPrior prior(space, {PriorFamily::HIP, HyperScheme::AllOnes, false});
  const double p_base = std::exp(prior.log_prior(base));
  const double expected = p_base * std::min(1.0, bf) + (1 - p_base);
  int accepted = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    SamplerConfig c = config(1000 + static_cast<std::uint64_t>(i), {PriorFamily::HIP, HyperScheme::AllOnes, false});
    c.kernel_weights = {0, 0, 1};
    c.start = one;
    Sampler s(eval, c);
    accepted += s.step();
  }
  const double rate = static_cast<double>(accepted) / draws;
  const double se = std::sqrt(expected * (1 - expected) / draws);
  EXPECT_NEAR(rate, expected, 3 * se);
}

TEST(Global, FlatMarginalsAlwaysAccept) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const FlatMarginal flat(space);
  SamplerConfig c = config(7);
  c.kernel_weights = {0, 0, 1};
  Sampler s(flat, c);
  s.run(2000);
  EXPECT_EQ(s.stats().accepted[2], 2000u);
}

TEST(Global, PriorDrawsCoverEnumerableSpace) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const ModelPrior prior(space, {PriorFamily::HOP, HyperScheme::ChildPenalty, false});
  Rng rng(8);
  std::set<Model> seen;
  for (int i = 0; i < 20000; ++i) seen.insert(prior.sample(rng));
  EXPECT_EQ(seen.size(), 13u);
}

TEST(Kernel, ThreeModelTransitionMatrixIsStationaryAtPosterior) {
  const auto space = ModelSpace::full_surface(1, 2, Heredity::Strong);
  Rng rng(9);
  Dataset d;
  d.x = MatrixXd(25, 1);
  d.y = VectorXd(25);
  for (int i = 0; i < 25; ++i) {
    d.x(i, 0) = standard_normal(rng);
    d.y(i) = 0.3 * d.x(i, 0) + 0.2 * d.x(i, 0) * d.x(i, 0) + standard_normal(rng);
  }
  const GPriorMarginal eval(d, space);
  const auto models = enumerate(space, 10);
  ASSERT_EQ(models.size(), 3u);
  for (const auto& prior : {PriorSpec{PriorFamily::HIP, HyperScheme::AllOnes, false},
                            PriorSpec{PriorFamily::HUP, HyperScheme::ChildPenalty, false}}) {
    Sampler s(eval, config(9, prior));
    const auto T = oracle::transition_matrix(s, eval, models);
    for (Eigen::Index i = 0; i < T.rows(); ++i) EXPECT_NEAR(T.row(i).sum(), 1.0, 1e-12);
    const auto pi = oracle::exact_posterior(eval, s.prior(), models);
    const auto st = oracle::stationary(T);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(st(static_cast<Eigen::Index>(i)), pi[i], 1e-8);
  }
}

TEST(Kernel, DifferentGlobalProposalStillTargetsPosterior) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const auto d = two_main_data(40, 10);
  const GPriorMarginal eval(d, space);
  SamplerConfig c = config(10, {PriorFamily::EPP, HyperScheme::AllOnes, false});
  c.global_proposal = PriorSpec{PriorFamily::HIP, HyperScheme::AllOnes, false};
  Sampler s(eval, c);
  const auto models = enumerate(space, 100);
  const auto st = oracle::stationary(oracle::transition_matrix(s, eval, models));
  const auto pi = oracle::exact_posterior(eval, s.prior(), models);
  for (std::size_t i = 0; i < models.size(); ++i) EXPECT_NEAR(st(static_cast<Eigen::Index>(i)), pi[i], 1e-8);
}

TEST(Run, UniformTogglerConvergesToPosterior) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const auto d = two_main_data(40, 11);
  const GPriorMarginal eval(d, space);
  SamplerConfig c = config(11);
  c.kernel_weights = {1, 0, 0};
  c.lambda = 0;
  c.iterations = 100000;
  Sampler s(eval, c);
  s.run();
  const auto exact = renormalize(exact_table(eval, s.prior(), 100));
  EXPECT_LT(tvd(frequency(s.table()), exact), 0.05);
}

TEST(Run, DefaultMixtureEstimatorsConverge) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const auto d = two_main_data(40, 12);
  const GPriorMarginal eval(d, space);
  SamplerConfig c = config(12);
  c.iterations = 100000;
  Sampler s(eval, c);
  s.run();
  const auto exact = renormalize(exact_table(eval, s.prior(), 100));
  EXPECT_LT(tvd(frequency(s.table()), exact), 0.05);
  EXPECT_LT(tvd(renormalize(s.table()), exact), 1e-6);
}

TEST(Run, SameSeedGivesIdenticalTraceAndTable) {
  const auto space = ModelSpace::full_surface(3, 2, Heredity::Weak);
  Rng rng(13);
  Dataset d;
  d.x = MatrixXd(60, 3);
  d.y = VectorXd(60);
  for (int i = 0; i < 60; ++i) {
    for (int j = 0; j < 3; ++j) d.x(i, j) = standard_normal(rng);
    d.y(i) = d.x(i, 0) * d.x(i, 2) + standard_normal(rng);
  }
  const GPriorMarginal eval(d, space);
  auto run = [&](bool cache) {
    SamplerConfig c = config(13);
    c.iterations = 3000;
    c.keep_trace = true;
    c.use_cache = cache;
    c.check_proposals = true;
    Sampler s(eval, c);
    s.run();
    std::ostringstream os;
    write_trace(os, s.trace());
    return std::make_pair(os.str(), s.table().entries());
  };
  const auto a = run(true), b = run(true), nc = run(false);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.first, nc.first);
  ASSERT_EQ(a.second.size(), nc.second.size());
  for (const auto& [m, e] : a.second) {
    EXPECT_TRUE(space.is_valid(m));
    EXPECT_NEAR(nc.second.at(m).log_marginal, e.log_marginal, 1e-12);
    EXPECT_EQ(nc.second.at(m).visits, e.visits);
  }
}

TEST(Run, TraceIsNewlineDelimitedJson) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const auto d = two_main_data(30, 14);
  const GPriorMarginal eval(d, space);
  SamplerConfig c = config(14);
  c.iterations = 5;
  c.keep_trace = true;
  Sampler s(eval, c);
  s.run();
  std::ostringstream os;
  write_trace(os, s.trace());
  std::istringstream in(os.str());
  int lines = 0;
  for (std::string line; std::getline(in, line); ++lines) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["iter"], lines + 1);
    for (const char* key : {"model", "kernel", "accepted", "log_post"}) EXPECT_TRUE(j.contains(key));
  }
  EXPECT_EQ(lines, 5);
  EXPECT_EQ(s.table().iterations(), 5u);
}

TEST(Config, RejectsInvalidSettings) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const auto d = two_main_data(30, 15);
  const GPriorMarginal eval(d, space);
  SamplerConfig c = config(15);
  c.kernel_weights = {0.5, 0.5, 0.5};
  EXPECT_THROW(Sampler(eval, c), std::invalid_argument);
  c = config(15);
  c.lambda = 1.5;
  EXPECT_THROW(Sampler(eval, c), std::invalid_argument);
  c = config(15);
  c.iterations = 0;
  EXPECT_THROW(Sampler(eval, c), std::invalid_argument);
  c = config(15);
  Model bad = space.empty_model();
  bad.insert(*space.index_of(Term{1, 1}));
  c.start = bad;
  EXPECT_THROW(Sampler(eval, c), std::invalid_argument);
}
