#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "hiersel/posterior.hpp"
#include "hiersel/random.hpp"

using namespace hiersel;

namespace {

Dataset quadratic_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(n), 2);
  d.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    d.x(i, 0) = standard_normal(rng);
    d.x(i, 1) = standard_normal(rng);
    d.y(i) = 0.4 * d.x(i, 0) + 0.3 * d.x(i, 1) + 0.2 * d.x(i, 0) * d.x(i, 1) + standard_normal(rng);
  }
  return d;
}

ProbabilityMap two_point(const Model& a, double pa, const Model& b, double pb) {
  ProbabilityMap m;
  m[a] = pa;
  m[b] = pb;
  return m;
}

}  // namespace

TEST(Tvd, HandExamples) {
  Model a(2), b(2);
  b.insert(0);
  const auto p = two_point(a, 0.8, b, 0.2);
  const auto q = two_point(a, 0.6, b, 0.4);
  EXPECT_NEAR(tvd(p, q), 0.2, 1e-15);
  EXPECT_EQ(tvd(p, p), 0.0);
  ProbabilityMap only_a{{a, 1.0}}, only_b{{b, 1.0}};
  EXPECT_DOUBLE_EQ(tvd(only_a, only_b), 1.0);
}

TEST(Renormalize, SingleEntryIsCertain) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  PosteriorTable t(space);
  t.record(space.empty_model(), -3.0, -1.0);
  EXPECT_DOUBLE_EQ(renormalize(t).at(space.empty_model()), 1.0);
  EXPECT_THROW(renormalize(PosteriorTable(space)), std::invalid_argument);
}

TEST(Renormalize, FullTableIsExactPosterior) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const auto d = quadratic_data(80, 3);
  const GPriorMarginal eval(d, space);
  const ModelPrior prior(space, {PriorFamily::HOP, HyperScheme::ChildPenalty, false});
  const auto models = enumerate(space, 100);
  const auto probs = renormalize(exact_table(eval, prior, models));
  // Oracle: direct exponentiation with a plain normalizing sum.
  std::vector<double> w;
  double z = 0;
  for (const auto& m : models) {
    w.push_back(std::exp(eval.log_marginal(m) + prior.log_prior(m)));
    z += w.back();
  }
  double total = 0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    EXPECT_NEAR(probs.at(models[i]), w[i] / z, 1e-12);
    total += probs.at(models[i]);
  }
  EXPECT_NEAR(total, 1.0, 1e-10);
}

TEST(Renormalize, NegligibleModelChangesNothing) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  PosteriorTable t(space);
  t.record(space.empty_model(), 0.0, -1.0);
  t.record(space.model_from_strings({"x1"}), 1.0, -2.0);
  const auto before = renormalize(t);
  t.record(space.model_from_strings({"x2"}), -std::numeric_limits<double>::infinity(), -2.0);
  const auto after = renormalize(t);
  for (const auto& [m, p] : before) EXPECT_NEAR(after.at(m), p, 1e-12);
  EXPECT_EQ(inclusion_probabilities(t)[*space.index_of(Term{0, 1})], 0.0);
}

TEST(Inclusion, PriorOnlyIndependenceTable) {
  // Equal marginals leave the prior: inclusion of x1 is the sum of its rows.
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const ModelPrior hip(space, {PriorFamily::HIP, HyperScheme::AllOnes, false});
  PosteriorTable t(space);
  for (const auto& m : enumerate(space, 100)) t.record(m, 0.0, hip.log_prior(m));
  const auto inc = inclusion_probabilities(t);
  EXPECT_NEAR(inc[*space.index_of(Term{1, 0})], 1.0 / 8 + 1.0 / 8 + 8.0 / 32, 1e-14);
  // Square of x1: rows {x1, x1^2} and the four two-main rows containing it.
  EXPECT_NEAR(inc[*space.index_of(Term{2, 0})], 1.0 / 8 + 4.0 / 32, 1e-14);
}

TEST(Inclusion, AlwaysAndNeverPresentTerms) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  PosteriorTable t(space);
  t.record(space.model_from_strings({"x1"}), 0.0, -1.0);
  t.record(space.model_from_strings({"x1", "x1^2"}), 0.5, -2.0);
  const auto inc = inclusion_probabilities(t);
  EXPECT_NEAR(inc[*space.index_of(Term{1, 0})], 1.0, 1e-14);
  EXPECT_EQ(inc[*space.index_of(Term{0, 2})], 0.0);
}

TEST(Frequency, StationaryChainIsPointMass) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  PosteriorTable t(space);
  const auto m = space.model_from_strings({"x2"});
  t.record(m, 0.0, -1.0);
  t.record(space.empty_model(), 0.0, -1.0);
  for (int i = 0; i < 10; ++i) t.visit(m);
  const auto f = frequency(t);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_DOUBLE_EQ(f.at(m), 1.0);
  EXPECT_THROW(t.visit(space.model_from_strings({"x1"})), std::logic_error);
}

TEST(Table, RejectsConflictsAndInvalidModels) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  PosteriorTable t(space);
  t.record(space.empty_model(), 1.0, -1.0);
  EXPECT_NO_THROW(t.record(space.empty_model(), 1.0, -1.0));
  EXPECT_THROW(t.record(space.empty_model(), 2.0, -1.0), std::logic_error);
  Model bad = space.empty_model();
  bad.insert(*space.index_of(Term{2, 0}));
  EXPECT_THROW(t.record(bad, 0.0, -1.0), std::invalid_argument);
  EXPECT_EQ(t.size(), 1u);
  EXPECT_THROW(t.record(space.model_from_strings({"x1"}), 0.0, -std::numeric_limits<double>::infinity()),
               std::invalid_argument);
}

TEST(Rank, MatchesBruteForceSort) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const auto d = quadratic_data(60, 4);
  const GPriorMarginal eval(d, space);
  const ModelPrior prior(space, {PriorFamily::HIP, HyperScheme::ChildPenalty, false});
  const auto table = exact_table(eval, prior, 100);
  std::vector<std::pair<double, Model>> sorted;
  for (const auto& [m, e] : table.entries()) sorted.push_back({e.log_post(), m});
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<bool> used(sorted.size() + 1, false);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto r = rank_of(table, sorted[i].second);
    ASSERT_TRUE(r.has_value());
    EXPECT_EQ(*r, i + 1);
    EXPECT_FALSE(used[*r]);
    used[*r] = true;
  }
  EXPECT_EQ(rank_of(table, ranked_models(table, 1).front().model), 1u);
}

TEST(Rank, TiesBrokenByKeyAndAbsentTarget) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  PosteriorTable t(space);
  const auto a = space.empty_model();
  const auto b = space.model_from_strings({"x1"});
  t.record(b, 0.0, -1.0);
  t.record(a, 0.0, -1.0);
  const auto first = a < b ? a : b;
  EXPECT_EQ(rank_of(t, first), 1u);
  EXPECT_EQ(rank_of(t, first == a ? b : a), 2u);
  EXPECT_FALSE(rank_of(t, space.model_from_strings({"x2"})).has_value());
}

TEST(Prediction, SingleModelIgnoresK) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const auto d = quadratic_data(50, 5);
  const GPriorMarginal eval(d, space);
  PosteriorTable t(space);
  const auto m = space.model_from_strings({"x1", "x2"});
  t.record(m, eval.log_marginal(m), -1.0);
  const MatrixXd newx = d.x.topRows(5);
  const VectorXd direct = build_design(d, space, m).topRows(5) * eval.posterior_mean(m);
  EXPECT_TRUE(model_average_predict(t, eval, newx, 1).isApprox(direct, 1e-12));
  EXPECT_TRUE(model_average_predict(t, eval, newx, 500).isApprox(direct, 1e-12));
  EXPECT_THROW(model_average_predict(t, eval, newx, 0), std::invalid_argument);
  EXPECT_THROW(model_average_predict(t, eval, MatrixXd::Zero(2, 3), 1), std::invalid_argument);
}

TEST(Prediction, AveragingIsNotWorseThanTopModel) {
  Rng rng(21);
  const auto space = ModelSpace::full_surface(3, 2, Heredity::Strong);
  auto draw = [&](std::size_t n) {
    Dataset d;
    d.x.resize(static_cast<Eigen::Index>(n), 3);
    d.y.resize(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
      for (int j = 0; j < 3; ++j) d.x(i, j) = standard_normal(rng);
      d.y(i) = 0.5 * d.x(i, 0) + 0.3 * d.x(i, 1) + 0.15 * d.x(i, 0) * d.x(i, 1) + 0.1 * d.x(i, 2) + standard_normal(rng);
    }
    return d;
  };
  const auto train = draw(500), test = draw(500);
  const GPriorMarginal eval(train, space);
  const ModelPrior prior(space, {PriorFamily::HIP, HyperScheme::AllOnes, false});
  const auto table = exact_table(eval, prior, 1000);
  auto rmse = [&](const VectorXd& yhat) { return std::sqrt((test.y - yhat).squaredNorm() / 500.0); };
  const double hpm = rmse(model_average_predict(table, eval, test.x, 1));
  const double avg = rmse(model_average_predict(table, eval, test.x, 500));
  EXPECT_LE(avg, 1.05 * hpm);
}

TEST(Summary, JsonReportShape) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const auto d = quadratic_data(60, 6);
  const GPriorMarginal eval(d, space);
  const ModelPrior prior(space, {PriorFamily::HIP, HyperScheme::AllOnes, false});
  auto table = exact_table(eval, prior, 100);
  table.visit(space.empty_model());
  const auto s = summarize(table, 3, space.model_from_strings({"x1", "x2"}));
  const auto j = to_json(s, space);
  EXPECT_EQ(j["top_k"].size(), 3u);
  EXPECT_TRUE(j["inclusion"].contains("x1*x2"));
  EXPECT_EQ(j["diagnostics"]["n_evaluated"], 13);
  EXPECT_TRUE(j["true_model"]["rank"].is_number());
  double total = 0;
  for (const auto& [m, p] : s.renormalized) total += p;
  EXPECT_NEAR(total, 1.0, 1e-10);
}
