#include <gtest/gtest.h>

#include <random>

#include "cfx/constraints.h"
#include "cfx/error.h"
#include "synthetic.h"

namespace cfx {
namespace {

using testing::ContinuousSchema;

int Sgn(double v) { return (v > 0) - (v < 0); }

CompiledConstraints Compile(const Schema& s, CausalConstraintSet set) {
  return CompiledConstraints::Compile(set, s);
}

// Entry i of the masked gradient is zero when, for some edge i -> j, the
// steps of i and j have opposite signs or j does not move while i does, or
// when i's step violates its unary declaration.
Eigen::VectorXd OracleMask(const Eigen::VectorXd& g,
                           const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                           const std::vector<std::size_t>& inc,
                           const std::vector<std::size_t>& dec) {
  Eigen::VectorXd out = g;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (g[i] == 0.0) continue;
    bool drop = false;
    for (const auto& [up, down] : edges) {
      if (up != static_cast<std::size_t>(i)) continue;
      drop |= g[down] == 0.0 || Sgn(g[down]) != Sgn(g[i]);
    }
    for (std::size_t f : inc) drop |= f == static_cast<std::size_t>(i) && g[i] > 0;
    for (std::size_t f : dec) drop |= f == static_cast<std::size_t>(i) && g[i] < 0;
    if (drop) out[i] = 0.0;
  }
  return out;
}

TEST(ConstraintsTest, CompilesConstraintVectors) {
  const Schema s = ContinuousSchema(3);
  const auto c = Compile(s, {{{"x0", "x1"}}, {"x2"}, {}});
  EXPECT_EQ(c.b().row(0), Eigen::RowVector3i(-1, -1, 0));
  EXPECT_EQ(c.b().row(1), Eigen::RowVector3i(0, -1, 0));
  EXPECT_EQ(c.b_plus(), Eigen::Vector3i(0, 0, -1));
  EXPECT_EQ(c.b_minus(), Eigen::Vector3i(0, 0, 0));
}

TEST(ConstraintsTest, ViolationVectorExamples) {
  const Schema s = ContinuousSchema(3);
  const auto c = Compile(s, {{{"x0", "x1"}}, {}, {}});
  EXPECT_EQ(c.ViolationVector(0, Eigen::Vector3d(2, -3, 1)), Eigen::Vector3i(0, 2, 1));
  EXPECT_EQ(c.ViolationVector(0, Eigen::Vector3d(2, 3, 1))[1], 0);
  EXPECT_EQ(c.ViolationVector(0, Eigen::Vector3d(2, 0, 1))[1], 1);
}

TEST(ConstraintsTest, ViolationVectorMatchesSameDirectionOracleOnAllSignPairs) {
  const Schema s = ContinuousSchema(2);
  const auto c = Compile(s, {{{"x0", "x1"}}, {}, {}});
  for (int a : {-1, 0, 1}) {
    for (int b : {-1, 0, 1}) {
      const int v = c.ViolationVector(0, Eigen::Vector2d(a, b))[1];
      EXPECT_EQ(v == 0, a == b) << a << ' ' << b;
      EXPECT_EQ(std::abs(v) == 2, a != 0 && b != 0 && a != b) << a << ' ' << b;
      EXPECT_EQ(std::abs(v) == 1, (a == 0) != (b == 0)) << a << ' ' << b;
      EXPECT_EQ(c.ViolationVector(0, Eigen::Vector2d(a, b))[0], 0);
    }
  }
}

TEST(ConstraintsTest, MaskExampleSignConflict) {
  const Schema s = ContinuousSchema(3);
  const auto c = Compile(s, {{{"x0", "x1"}}, {}, {}});
  const MaskResult r = c.Mask(Eigen::Vector3d(2, -3, 1));
  EXPECT_EQ(r.masked, Eigen::Vector3d(0, -3, 1));
  ASSERT_EQ(r.positions, std::vector<std::size_t>{0});
  EXPECT_EQ(r.causes[0], MaskCause::kBinarySignConflict);
}

TEST(ConstraintsTest, MaskExampleUnaryIncrease) {
  const Schema s = ContinuousSchema(2);
  const auto c = Compile(s, {{}, {"x0"}, {}});
  const MaskResult r = c.Mask(Eigen::Vector2d(0.4, -0.1));
  EXPECT_EQ(r.masked, Eigen::Vector2d(0, -0.1));
  ASSERT_EQ(r.causes.size(), 1u);
  EXPECT_EQ(r.causes[0], MaskCause::kUnaryViolation);
  // A negative gradient is an increasing step and passes.
  EXPECT_EQ(c.Mask(Eigen::Vector2d(-0.4, 0.1)).masked, Eigen::Vector2d(-0.4, 0.1));
}

TEST(ConstraintsTest, MaskDownstreamFrozen) {
  const Schema s = ContinuousSchema(2);
  const auto c = Compile(s, {{{"x0", "x1"}}, {}, {}});
  const MaskResult r = c.Mask(Eigen::Vector2d(0.5, 0.0));
  EXPECT_EQ(r.masked, Eigen::Vector2d(0, 0));
  EXPECT_EQ(r.causes, std::vector<MaskCause>{MaskCause::kBinaryDownstreamFrozen});
}

TEST(ConstraintsTest, UnrelatedZeroGradientDoesNotMask) {
  const Schema s = ContinuousSchema(3);
  const auto c = Compile(s, {{{"x0", "x1"}}, {}, {}});
  EXPECT_EQ(c.Mask(Eigen::Vector3d(1, 1, 0)).masked, Eigen::Vector3d(1, 1, 0));
}

TEST(ConstraintsTest, NoConstraintsIsIdentity) {
  const Schema s = ContinuousSchema(4);
  const auto c = CompiledConstraints::None(s);
  const Eigen::Vector4d g(1, -2, 0, 3);
  const MaskResult r = c.Mask(g);
  EXPECT_EQ(r.masked, g);
  EXPECT_TRUE(r.positions.empty());
}

TEST(ConstraintsTest, CompileRejectsBadSets) {
  Schema s = testing::MixedSchema();
  EXPECT_THROW(Compile(s, {{{"age", "nope"}}, {}, {}}), Error);
  EXPECT_THROW(Compile(s, {{{"age", "age"}}, {}, {}}), Error);
  EXPECT_THROW(Compile(s, {{{"age", "edu"}, {"age", "edu"}}, {}, {}}), Error);
  EXPECT_THROW(Compile(s, {{{"color", "age"}}, {}, {}}), Error);
  EXPECT_THROW(Compile(s, {{}, {"pet"}, {}}), Error);
  EXPECT_THROW(Compile(s, {{}, {"age"}, {"age"}}), Error);
  EXPECT_NO_THROW(Compile(s, {{{"edu", "age"}}, {"age", "edu"}, {}}));
}

TEST(ConstraintsTest, JsonRoundTrip) {
  const CausalConstraintSet set{{{"edu", "age"}}, {"age"}, {"hours"}};
  const CausalConstraintSet back = CausalConstraintSet::FromJson(set.ToJson());
  EXPECT_EQ(back.ToJson(), set.ToJson());
  EXPECT_THROW(CausalConstraintSet::FromJson({{"binary", {{{"up", "a"}}}}}), Error);
}

TEST(ConstraintsTest, GatherScatterUseDirectedCoordinates) {
  const Schema s = testing::MixedSchema();
  const auto c = Compile(s, {{{"edu", "age"}}, {}, {}});
  std::mt19937_64 rng(1);
  const Instance x = testing::RandomInstance(s, rng);
  const Eigen::VectorXd d = c.Gather(x.encoded, s);
  ASSERT_EQ(d.size(), 4);
  EXPECT_EQ(d[1], x.encoded[s.offset(1)]);
  Eigen::VectorXd back = Eigen::VectorXd::Zero(s.encoded_width());
  c.Scatter(d, s, back);
  for (std::size_t f : s.directed_features()) {
    EXPECT_EQ(back[s.offset(f)], x.encoded[s.offset(f)]);
  }
}

// ---------------------------------------------------------------- properties

struct Draw {
  Schema schema;
  CausalConstraintSet set;
  CompiledConstraints compiled;
  Eigen::VectorXd grad;
};

Draw RandomDraw(std::mt19937_64& rng) {
  const std::size_t p = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
  Draw d{ContinuousSchema(p), {}, {}, {}};
  d.set = testing::RandomConstraints(d.schema, 4, 3, rng);
  d.compiled = CompiledConstraints::Compile(d.set, d.schema);
  d.grad.resize(static_cast<Eigen::Index>(p));
  std::uniform_int_distribution<int> kind(0, 2);
  std::normal_distribution<double> n(0, 1);
  for (Eigen::Index i = 0; i < d.grad.size(); ++i) {
    d.grad[i] = kind(rng) == 0 ? 0.0 : n(rng);
  }
  return d;
}

TEST(ConstraintsPropertyTest, SoundConservativeAndMatchesOracle) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 3000; ++t) {
    const Draw d = RandomDraw(rng);
    const MaskResult r = d.compiled.Mask(d.grad);
    const Eigen::VectorXd& m = r.masked;

    // Conservative: only zeroes entries.
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      EXPECT_TRUE(m[i] == 0.0 || m[i] == d.grad[i]);
    }
    // Sound against the pre-mask downstream gradient.
    for (const auto& [up, down] : d.compiled.edges()) {
      if (m[up] == 0.0) continue;
      EXPECT_NE(d.grad[down], 0.0);
      EXPECT_EQ(Sgn(m[up]), Sgn(d.grad[down]));
      if (m[down] != 0.0) EXPECT_EQ(Sgn(m[up]), Sgn(m[down]));
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if (d.compiled.b_plus()[i] != 0) EXPECT_LE(m[i], 0.0);
      if (d.compiled.b_minus()[i] != 0) EXPECT_GE(m[i], 0.0);
    }
    std::vector<std::size_t> inc, dec;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if (d.compiled.b_plus()[i] != 0) inc.push_back(i);
      if (d.compiled.b_minus()[i] != 0) dec.push_back(i);
    }
    EXPECT_EQ(m, OracleMask(d.grad, d.compiled.edges(), inc, dec));
    EXPECT_EQ(r.positions.size(), r.causes.size());
  }
}

// A second pass can only remove more entries when some edge i -> j had j
// masked by the first pass while i survived.
bool Cascades(const CompiledConstraints& c, const Eigen::VectorXd& grad,
              const Eigen::VectorXd& masked) {
  for (const auto& [up, down] : c.edges()) {
    if (masked[up] != 0.0 && masked[down] == 0.0 && grad[down] != 0.0) return true;
  }
  return false;
}

TEST(ConstraintsPropertyTest, IdempotentWithoutDownstreamCascade) {
  std::mt19937_64 rng(22);
  int checked = 0;
  for (int t = 0; t < 3000; ++t) {
    const Draw d = RandomDraw(rng);
    const Eigen::VectorXd once = d.compiled.Mask(d.grad).masked;
    if (Cascades(d.compiled, d.grad, once)) continue;
    EXPECT_EQ(d.compiled.Mask(once).masked, once);
    ++checked;
  }
  EXPECT_GT(checked, 2000);
}

// Single-pass masking leaves an upstream entry whose downstream was removed
// by a unary rule; re-masking then removes the upstream as well.
TEST(ConstraintsPropertyTest, SinglePassIsNotIdempotentUnderCascade) {
  const Schema s = ContinuousSchema(2);
  const auto c = Compile(s, {{{"x0", "x1"}}, {"x1"}, {}});
  const Eigen::Vector2d g(1.0, 1.0);
  const Eigen::VectorXd once = c.Mask(g).masked;
  EXPECT_EQ(once, Eigen::Vector2d(1.0, 0.0));
  EXPECT_EQ(c.Mask(once).masked, Eigen::Vector2d(0.0, 0.0));
}

}  // namespace
}  // namespace cfx
