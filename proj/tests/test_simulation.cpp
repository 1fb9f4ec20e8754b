#include <gtest/gtest.h>

#include <cmath>

#include "hiersel/simulation.hpp"

using namespace hiersel;

namespace {

PosteriorSummary with_hpm(const Model& m) {
  PosteriorSummary s;
  s.hpm = m;
  return s;
}

}  // namespace

TEST(Score, PerfectRecovery) {
  const auto space = ModelSpace::full_surface(5, 2, Heredity::Strong);
  const auto truth = preset_quadratic_truth();
  Model m = space.empty_model();
  for (const auto& t : truth) m.insert(*space.index_of(t));
  const auto s = score(with_hpm(m), truth, space);
  EXPECT_DOUBLE_EQ(s.tp_rate, 1.0);
  EXPECT_DOUBLE_EQ(s.fp_rate, 0.0);
}

TEST(Score, EmptySelection) {
  const auto space = ModelSpace::full_surface(5, 2, Heredity::Strong);
  const auto s = score(with_hpm(space.empty_model()), preset_quadratic_truth(), space);
  EXPECT_DOUBLE_EQ(s.tp_rate, 0.0);
  EXPECT_DOUBLE_EQ(s.fp_rate, 0.0);
}

TEST(Score, OneExtraTerm) {
  const auto space = ModelSpace::full_surface(5, 2, Heredity::Strong);
  ASSERT_EQ(space.size(), 20u);
  const auto truth = preset_quadratic_truth();
  Model m = space.empty_model();
  for (const auto& t : truth) m.insert(*space.index_of(t));
  m.insert(*space.index_of(Term{0, 0, 0, 1, 0}));
  const auto s = score(with_hpm(m), truth, space);
  EXPECT_DOUBLE_EQ(s.tp_rate, 1.0);
  EXPECT_DOUBLE_EQ(s.fp_rate, 1.0 / 13.0);
}

TEST(Generate, ShapeAndSignalToNoise) {
  const auto space = ModelSpace::full_surface(5, 2, Heredity::Strong);
  SimDesign d;
  d.n = 10000;
  d.snr = 2.0;
  d.true_terms = preset_quadratic_truth();
  d.allocation = Allocation::Decreasing;
  Rng rng(1);
  const auto g = generate(d, space, rng);
  EXPECT_EQ(g.data.x.rows(), 10000);
  EXPECT_EQ(g.data.x.cols(), 5);
  EXPECT_EQ(g.data.y.size(), 10000);
  // Mean part has sample variance snr by construction; the realized ratio
  // against the unit noise should be close.
  const VectorXd mean = expand_terms(g.data.x, g.terms) * g.beta;
  const VectorXd noise = g.data.y - mean;
  auto var = [](const VectorXd& v) { return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1); };
  EXPECT_NEAR(var(mean), 2.0, 1e-9);
  EXPECT_NEAR(var(mean) / var(noise), 2.0, 0.2);
  // Decreasing allocation halves the coefficient per order.
  for (Eigen::Index t = 0; t < g.beta.size(); ++t) {
    const double ratio = g.beta(t) / g.beta(0);
    EXPECT_DOUBLE_EQ(ratio, g.terms[static_cast<std::size_t>(t)].order() == 1 ? 1.0 : 0.5);
  }
}

TEST(Generate, ValidatesDesign) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  Rng rng(2);
  SimDesign d;
  d.n = 5;
  EXPECT_THROW(generate(d, space, rng), std::invalid_argument);
  d.n = 50;
  d.snr = 0;
  EXPECT_THROW(generate(d, space, rng), std::invalid_argument);
  d.snr = 1;
  d.true_terms = {Term{3, 0}};
  EXPECT_THROW(generate(d, space, rng), std::invalid_argument);
}

TEST(Generate, NormalMatrixPrefixesAgree) {
  Rng a(3), b(3);
  const auto big = standard_normal_matrix(a, 100, 4);
  const auto small = standard_normal_matrix(b, 10, 4);
  EXPECT_EQ(big.topRows(10), small);
}

TEST(Stats, MedianSdSlope) {
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_NEAR(sample_sd({1, 2, 3, 4}), std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_NEAR(ols_slope({1, 2, 3}, {2, 4.5, 7}), 2.5, 1e-15);
}

TEST(Experiments, Theorem1SmallRunConcentrates) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const auto curve = theorem1_experiment(space, {Term{1, 0}, Term{1, 1}}, 0.5, {50, 20000}, 3, 4);
  ASSERT_EQ(curve.medians.size(), 2u);
  EXPECT_GT(curve.medians[1], 0.9);
  EXPECT_GT(curve.medians[1], curve.medians[0]);
  const auto again = theorem1_experiment(space, {Term{1, 0}, Term{1, 1}}, 0.5, {50, 20000}, 3, 4);
  EXPECT_EQ(curve.probs, again.probs);
}

TEST(Experiments, Theorem2SplitsWeakMass) {
  const auto split = theorem2_experiment(20000, 8, 5);
  std::vector<double> combined, strong;
  for (const auto& s : split) {
    EXPECT_NEAR(s.combined, s.first + s.second, 1e-15);
    EXPECT_NEAR(s.share, s.first / s.combined, 1e-15);
    combined.push_back(s.combined);
    strong.push_back(s.strong_mass);
  }
  EXPECT_GT(median(combined), 0.9);
  EXPECT_GT(median(strong), 0.9);
}

TEST(Experiments, LearningCurveGrowsForFalseSmallerModel) {
  const auto space = ModelSpace::full_surface(2, 2, Heredity::Strong);
  const auto truth = space.model_from_strings({"x1", "x2"});
  const auto other = space.model_from_strings({"x1"});
  const auto c = learning_curve(space, {Term{1, 0}, Term{0, 1}}, VectorXd::Constant(2, 0.5), truth, other,
                                {100, 400, 1600}, 5, 6);
  EXPECT_LT(c.mean_log_bf[0], c.mean_log_bf[1]);
  EXPECT_LT(c.mean_log_bf[1], c.mean_log_bf[2]);
}

TEST(Experiments, SelectionRunIsDeterministic) {
  const auto space = ModelSpace::full_surface(3, 2, Heredity::Strong);
  SimDesign d;
  d.n = 200;
  d.true_terms = {Term{1, 0, 0}, Term{0, 1, 0}, Term{1, 1, 0}};
  d.replications = 2;
  d.seed = 7;
  const std::vector<PriorSpec> priors{{PriorFamily::HIP, HyperScheme::ChildPenalty, false},
                                      {PriorFamily::EPP, HyperScheme::AllOnes, false}};
  const auto a = run_selection_experiment(space, d, priors, 2000);
  const auto b = run_selection_experiment(space, d, priors, 2000);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].score.tp_rate, b[i].score.tp_rate);
    EXPECT_EQ(a[i].score.fp_rate, b[i].score.fp_rate);
    EXPECT_EQ(a[i].score.true_model_prob, b[i].score.true_model_prob);
  }
}
