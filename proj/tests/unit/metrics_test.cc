#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cfx/error.h"
#include "cfx/metrics.h"
#include "synthetic.h"

namespace cfx {
namespace {

using testing::ContinuousSchema;
using testing::MixedSchema;

ProximityConfig Config(ContinuousMetric metric, std::vector<double> normalizer) {
  return ProximityConfig{metric, std::move(normalizer)};
}

Schema TwoNominal() {
  Feature a{"a", FeatureKind::kNominal, {"A", "B", "C"}};
  Feature b{"b", FeatureKind::kNominal, {"A", "B", "C"}};
  return Schema({a, b});
}

TEST(MetricsTest, DistanceToSelfIsZero) {
  const Schema s = MixedSchema();
  std::mt19937_64 rng(1);
  const Instance x = testing::RandomInstance(s, rng);
  const auto w = PerturbationWeights::FromMap({{"age", 3.0}}, s);
  for (auto metric : {ContinuousMetric::kMadManhattan, ContinuousMetric::kMahalanobisSq}) {
    const auto cfg = ProximityConfig::Unnormalized(metric, s);
    EXPECT_EQ(DistanceContinuous(x.encoded, x.encoded, s, w, cfg), 0.0);
    EXPECT_EQ(DistanceCategorical(x.encoded, x.encoded, s, w), 0.0);
    EXPECT_EQ(Distance(x.encoded, x.encoded, s, w, cfg), 0.0);
    EXPECT_EQ(ReportedDistance(x.encoded, x.encoded, s, w, cfg), 0.0);
  }
}

TEST(MetricsTest, MahalanobisWeightedExample) {
  const Schema s = ContinuousSchema(2);
  const auto w = PerturbationWeights::FromMap({{"x0", 1.0}, {"x1", 2.0}}, s);
  const auto cfg = Config(ContinuousMetric::kMahalanobisSq, {1.0, 1.0});
  EXPECT_DOUBLE_EQ(DistanceContinuous(Eigen::Vector2d(0.5, 0.0),
                                      Eigen::Vector2d(0.0, 0.5), s, w, cfg),
                   0.75);
}

TEST(MetricsTest, MadManhattanExampleAgreesWithScalarLoop) {
  const Schema s = ContinuousSchema(2);
  const auto w = PerturbationWeights::Uniform(s);
  const std::vector<double> mad = {0.2, 0.5};
  const Eigen::Vector2d c(0.6, 0.3), x(0.5, 0.4);
  double oracle = 0.0;
  for (int j = 0; j < 2; ++j) oracle += std::abs(c[j] - x[j]) / mad[j];
  const double d = DistanceContinuous(c, x, s, w, Config(ContinuousMetric::kMadManhattan, mad));
  EXPECT_NEAR(d, 0.7, 1e-12);
  EXPECT_NEAR(d, oracle, 1e-15);
}

TEST(MetricsTest, CategoricalOverlapExamples) {
  const Schema s = TwoNominal();
  const auto w = PerturbationWeights::FromMap({{"a", 3.0}, {"b", 1.0}}, s);
  const Eigen::VectorXd x = s.Encode({std::string("A"), std::string("C")});
  const Eigen::VectorXd one = s.Encode({std::string("A"), std::string("B")});
  const Eigen::VectorXd both = s.Encode({std::string("B"), std::string("B")});
  EXPECT_EQ(DistanceCategorical(x, x, s, w), 0.0);
  EXPECT_EQ(DistanceCategorical(one, x, s, w), 1.0);
  EXPECT_EQ(DistanceCategorical(both, x, s, w), 4.0);
}

TEST(MetricsTest, RelaxedCategoricalAgreesOnVertices) {
  const Schema s = MixedSchema();
  std::mt19937_64 rng(4);
  const auto w = PerturbationWeights::FromMap({{"color", 2.5}, {"pet", 4.0}}, s);
  for (int t = 0; t < 200; ++t) {
    const Instance a = testing::RandomInstance(s, rng);
    const Instance b = testing::RandomInstance(s, rng);
    EXPECT_DOUBLE_EQ(DistanceCategoricalRelaxed(a.encoded, b.encoded, s, w),
                     DistanceCategorical(a.encoded, b.encoded, s, w));
  }
}

TEST(MetricsTest, DiversityIdentities) {
  const Schema s = ContinuousSchema(1);
  const auto w = PerturbationWeights::Uniform(s);
  const auto cfg = Config(ContinuousMetric::kMadManhattan, {1.0});
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 0.0);
  const Eigen::VectorXd b = Eigen::VectorXd::Constant(1, 1.0);
  EXPECT_EQ(Diversity({a}, s, w, cfg, 0.0), 1.0);
  EXPECT_EQ(Diversity({a, a}, s, w, cfg, 0.0), 0.0);
  EXPECT_EQ(Diversity({a, b}, s, w, cfg, 0.0), 0.75);
  EXPECT_EQ(ReportedDiversity({a, b}, s, w, cfg), 0.75);
  const Eigen::MatrixXd k = DiversityKernel({a, b}, s, w, cfg, 0.0);
  EXPECT_EQ(k(0, 1), 0.5);
  EXPECT_EQ(k(1, 0), 0.5);
}

TEST(MetricsTest, DiversityStaysInItsRange) {
  const Schema s = MixedSchema();
  std::mt19937_64 rng(5);
  const auto w = PerturbationWeights::Uniform(s);
  const auto cfg = ProximityConfig::Unnormalized(ContinuousMetric::kMadManhattan, s);
  for (int t = 0; t < 100; ++t) {
    CfSet cfs;
    const int k = 1 + t % 5;
    for (int i = 0; i < k; ++i) cfs.push_back(testing::RandomInstance(s, rng).encoded);
    const double det = Diversity(cfs, s, w, cfg);
    EXPECT_GE(det, 0.0);
    EXPECT_LE(det, 1.0 + k * kDiversityRidge + 1e-12);
  }
}

TEST(MetricsTest, HingeExamples) {
  EXPECT_EQ(HingeLoss(2.0, 1), 0.0);
  EXPECT_EQ(HingeLoss(0.0, 0), 1.0);
  EXPECT_EQ(HingeLoss(-0.5, 1), 1.5);
  EXPECT_EQ(HingeSlope(1.0, 1), 0.0);
  EXPECT_EQ(HingeSlope(0.0, 1), -1.0);
  EXPECT_EQ(HingeSlope(0.0, 0), 1.0);
}

TEST(MetricsTest, SymmetryAndGammaMonotonicity) {
  const Schema s = MixedSchema();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> g(1.0, 5.0);
  for (int t = 0; t < 200; ++t) {
    const Instance a = testing::RandomInstance(s, rng);
    const Instance b = testing::RandomInstance(s, rng);
    const auto metric = t % 2 ? ContinuousMetric::kMahalanobisSq
                              : ContinuousMetric::kMadManhattan;
    const auto cfg = Config(metric, {0.3, 0.2, 0.4, 1.0, 0.25, 1.0});
    std::map<std::string, double> gamma;
    for (const Feature& f : s.features()) gamma[f.name] = g(rng);
    const auto w = PerturbationWeights::FromMap(gamma, s);
    EXPECT_DOUBLE_EQ(Distance(a.encoded, b.encoded, s, w, cfg),
                     Distance(b.encoded, a.encoded, s, w, cfg));
    EXPECT_DOUBLE_EQ(ReportedDistance(a.encoded, b.encoded, s, w, cfg),
                     ReportedDistance(b.encoded, a.encoded, s, w, cfg));
    const std::string& bumped = s.feature(t % s.size()).name;
    auto heavier = gamma;
    heavier[bumped] += 1.0;
    const auto w2 = PerturbationWeights::FromMap(heavier, s);
    EXPECT_GE(Distance(a.encoded, b.encoded, s, w2, cfg),
              Distance(a.encoded, b.encoded, s, w, cfg));
  }
}

TEST(MetricsTest, WeightsValidation) {
  const Schema s = ContinuousSchema(2);
  EXPECT_THROW(PerturbationWeights::FromMap({{"x0", 0.0}}, s), Error);
  EXPECT_THROW(PerturbationWeights::FromMap({{"x0", -1.0}}, s), Error);
  EXPECT_THROW(PerturbationWeights::FromMap({{"nope", 2.0}}, s), Error);
  const auto w = PerturbationWeights::FromJson({{"x1", 2.5}}, s);
  EXPECT_EQ(w[0], 1.0);
  EXPECT_EQ(w[1], 2.5);
  EXPECT_FALSE(w.is_uniform());
  EXPECT_TRUE(PerturbationWeights::Uniform(s).is_uniform());
}

TEST(MetricsTest, ParsesMetricNames) {
  EXPECT_EQ(ParseContinuousMetric("mad_manhattan"), ContinuousMetric::kMadManhattan);
  EXPECT_EQ(ParseContinuousMetric("mahalanobis_sq"), ContinuousMetric::kMahalanobisSq);
  EXPECT_THROW(ParseContinuousMetric("euclid"), Error);
}

TEST(ObjectiveTest, VanishesWhenMarginMetAndWeightsZero) {
  const Schema s = ContinuousSchema(2);
  const LinearModel model(Eigen::Vector2d(10, 10), 0.0);
  ObjectiveParams p;
  p.lambda1 = 0.0;
  p.lambda2 = 0.0;
  const Objective obj(s, model, Eigen::Vector2d(0.0, 0.0), PerturbationWeights::Uniform(s),
                      ProximityConfig::Unnormalized(ContinuousMetric::kMadManhattan, s), p);
  const ObjectiveValue v = obj.Evaluate({Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.9, 0.2)});
  EXPECT_EQ(v.value, 0.0);
  for (const auto& g : v.gradients) EXPECT_EQ(g, Eigen::Vector2d::Zero());
}

TEST(ObjectiveTest, SingletonGradientHasNoDiversityPart) {
  const Schema s = ContinuousSchema(2);
  const LinearModel model(Eigen::Vector2d(1, -2), -1.0);
  const auto w = PerturbationWeights::Uniform(s);
  const auto cfg = Config(ContinuousMetric::kMadManhattan, {0.5, 0.25});
  ObjectiveParams p;
  p.lambda2 = 0.0;
  const Eigen::Vector2d x(0.2, 0.6), c(0.4, 0.5);
  const Objective obj(s, model, x, w, cfg, p);
  const ObjectiveValue v = obj.Evaluate({c});
  // hinge slope -1 (logit < 1) times weights, plus sign(c - x) / MAD.
  const Eigen::Vector2d expected = -model.weights() + Eigen::Vector2d(1 / 0.5, -1 / 0.25);
  EXPECT_NEAR((v.gradients[0] - expected).norm(), 0.0, 1e-12);
}

// Analytic gradients of the full objective against central differences on
// random mixed-type problems, away from hinge and |.| kinks.
TEST(ObjectiveTest, GradientMatchesFiniteDifferences) {
  const Schema s = MixedSchema();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.05, 0.95), g(1.0, 5.0);
  const double h = 1e-5;
  int checked = 0;
  while (checked < 100) {
    const int k = 1 + checked % 3;
    const LinearModel model = testing::RandomModel(s.encoded_width(), 1.0, rng);
    std::map<std::string, double> gamma;
    for (const Feature& f : s.features()) gamma[f.name] = g(rng);
    const auto metric = checked % 2 ? ContinuousMetric::kMahalanobisSq
                                    : ContinuousMetric::kMadManhattan;
    const auto cfg = Config(metric, {0.3, 0.2, 0.4, 1.0, 0.25, 1.0});
    Eigen::VectorXd x(s.encoded_width());
    for (Eigen::Index e = 0; e < x.size(); ++e) x[e] = u(rng);
    CfSet cfs(k, Eigen::VectorXd(s.encoded_width()));
    for (auto& c : cfs) {
      for (Eigen::Index e = 0; e < c.size(); ++e) c[e] = u(rng);
    }
    bool near_kink = false;
    for (const auto& c : cfs) {
      near_kink |= std::abs(1.0 - model.Logit(c)) < 1e-3;
      near_kink |= (c - x).cwiseAbs().minCoeff() < 1e-3;
      for (const auto& d : cfs) {
        if (&c != &d) near_kink |= (c - d).cwiseAbs().minCoeff() < 1e-3;
      }
    }
    if (near_kink) continue;
    const Objective obj(s, model, x, PerturbationWeights::FromMap(gamma, s), cfg, {});
    const ObjectiveValue v = obj.Evaluate(cfs);
    for (int c = 0; c < k; ++c) {
      for (Eigen::Index e = 0; e < x.size(); ++e) {
        CfSet plus = cfs, minus = cfs;
        plus[c][e] += h;
        minus[c][e] -= h;
        const double fd = (obj.Evaluate(plus, false).value -
                           obj.Evaluate(minus, false).value) / (2 * h);
        const double an = v.gradients[c][e];
        EXPECT_LT(std::abs(fd - an), 1e-4 * std::max(1.0, std::abs(an)))
            << "draw " << checked << " candidate " << c << " coord " << e;
      }
    }
    ++checked;
  }
}

TEST(ObjectiveTest, CollapsedKernelIsIllConditioned) {
  const Schema s = ContinuousSchema(2);
  const LinearModel model(Eigen::Vector2d(1, 1), -3.0);
  ObjectiveParams p;
  p.ridge = 0.0;
  const Objective obj(s, model, Eigen::Vector2d(0.1, 0.1), PerturbationWeights::Uniform(s),
                      ProximityConfig::Unnormalized(ContinuousMetric::kMadManhattan, s), p);
  const Eigen::Vector2d c(0.5, 0.5);
  try {
    obj.Evaluate({c, c});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIllConditioned);
    EXPECT_NE(std::string(e.what()).find("ill-conditioned"), std::string::npos);
  }
  // The default ridge rescues the same configuration.
  const Objective ridged(s, model, Eigen::Vector2d(0.1, 0.1), PerturbationWeights::Uniform(s),
                         ProximityConfig::Unnormalized(ContinuousMetric::kMadManhattan, s), {});
  EXPECT_NO_THROW(ridged.Evaluate({c, c}));
}

}  // namespace
}  // namespace cfx
