// Hot paths on the shipped adult schema: one objective evaluation, one mask
// application, and a full generate call.
#include <benchmark/benchmark.h>

#include <random>

#include "cfx/classifier.h"
#include "cfx/constraints.h"
#include "cfx/dataset.h"
#include "cfx/engine.h"
#include "cfx/metrics.h"
#include "cfx/schema.h"

namespace {

using namespace cfx;

struct Fixture {
  Schema schema = Schema::Load(CFX_DATA_DIR "/schemas/adult.json");
  CompiledConstraints constraints = CompiledConstraints::Compile(
      CausalConstraintSet::Load(CFX_DATA_DIR "/constraints/adult_constraints.json"), schema);
  DatasetStats stats;
  Instance x;
  LinearModel model;

  Fixture() {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd raw(static_cast<Eigen::Index>(schema.encoded_width()));
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw[i] = u(rng);
    const Eigen::VectorXd encoded = schema.Project(raw);
    x = schema.MakeInstance(schema.Decode(encoded));
    Eigen::VectorXd w(raw.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = 12.0 * (u(rng) - 0.5);
    // Place x one logit unit on the undesired side.
    model = LinearModel(w, -1.0 - w.dot(x.encoded));
    stats.mad.assign(schema.features().size(), 0.2);
    stats.std.assign(schema.features().size(), 0.3);
  }
};

const Fixture& Shared() {
  static const Fixture f;
  return f;
}

CfSet Candidates(const Fixture& f, int k) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> noise(-0.05, 0.05);
  CfSet cfs(static_cast<std::size_t>(k), f.x.encoded);
  for (auto& c : cfs) {
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] += noise(rng);
  }
  return cfs;
}

void BM_ObjectiveEvaluate(benchmark::State& state) {
  const Fixture& f = Shared();
  const int k = static_cast<int>(state.range(0));
  const Objective obj(f.schema, f.model, f.x.encoded, PerturbationWeights::Uniform(f.schema),
                      ProximityConfig{ContinuousMetric::kMadManhattan, f.stats.mad}, {});
  const CfSet cfs = Candidates(f, k);
  for (auto _ : state) benchmark::DoNotOptimize(obj.Evaluate(cfs));
}
BENCHMARK(BM_ObjectiveEvaluate)->Arg(1)->Arg(5)->Arg(10);

void BM_Mask(benchmark::State& state) {
  const Fixture& f = Shared();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd g(static_cast<Eigen::Index>(f.constraints.dimension()));
  for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(f.constraints.Mask(g));
}
BENCHMARK(BM_Mask);

void BM_Generate(benchmark::State& state) {
  const Fixture& f = Shared();
  EngineConfig cfg;
  cfg.k = static_cast<int>(state.range(0));
  cfg.condition = Condition::kC2Global;
  cfg.max_iterations = 1000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(Generate(f.x, f.model, f.schema, f.stats,
                                      PerturbationWeights::Uniform(f.schema), f.constraints,
                                      cfg));
  }
}
BENCHMARK(BM_Generate)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
