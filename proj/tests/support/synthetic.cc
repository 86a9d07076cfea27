#include "synthetic.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cfx::testing {

Schema ContinuousSchema(std::size_t p, double lo, double hi) {
  std::vector<Feature> features;
  for (std::size_t i = 0; i < p; ++i) {
    Feature f;
    f.name = "x" + std::to_string(i);
    f.kind = FeatureKind::kContinuous;
    f.min = lo;
    f.max = hi;
    features.push_back(f);
  }
  return Schema(std::move(features), Target{"y", "1", "0"});
}

Schema MixedSchema() {
  auto continuous = [](std::string name, double lo, double hi) {
    Feature f;
    f.name = std::move(name);
    f.min = lo;
    f.max = hi;
    return f;
  };
  auto categorical = [](std::string name, FeatureKind kind,
                        std::vector<std::string> levels) {
    Feature f;
    f.name = std::move(name);
    f.kind = kind;
    f.levels = std::move(levels);
    return f;
  };
  return Schema(
      {continuous("age", 18, 80),
       categorical("edu", FeatureKind::kOrdinal, {"none", "school", "college", "phd"}),
       continuous("hours", 1, 99),
       categorical("color", FeatureKind::kNominal, {"red", "green", "blue"}),
       categorical("seniority", FeatureKind::kOrdinal, {"junior", "mid", "senior"}),
       categorical("pet", FeatureKind::kNominal, {"cat", "dog"})},
      Target{"y", "1", "0"});
}

LabeledSet SeparableSet(const Schema& schema, std::size_t n, double margin,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LabeledSet set;
  while (set.size() < n) {
    const double a = u(rng);
    const double b = u(rng);
    const double signed_distance = (a + b) / std::sqrt(2.0);
    if (std::abs(signed_distance) < margin / 2) continue;
    set.rows.push_back(schema.MakeInstance({a, b}));
    set.labels.push_back(signed_distance > 0 ? 1 : 0);
  }
  return set;
}

Instance RandomInstance(const Schema& schema, std::mt19937_64& rng) {
  OriginalValues values;
  for (const Feature& f : schema.features()) {
    if (f.categorical()) {
      std::uniform_int_distribution<std::size_t> pick(0, f.levels.size() - 1);
      values.emplace_back(f.levels[pick(rng)]);
    } else {
      std::uniform_real_distribution<double> u(f.min, f.max);
      values.emplace_back(u(rng));
    }
  }
  return schema.MakeInstance(std::move(values));
}

DatasetStats FlatStats(const Schema& schema, double value) {
  DatasetStats stats;
  stats.mad.assign(schema.size(), value);
  stats.std.assign(schema.size(), value);
  return stats;
}

CausalConstraintSet RandomConstraints(const Schema& schema,
                                      std::size_t max_edges,
                                      std::size_t max_unary,
                                      std::mt19937_64& rng) {
  const std::vector<std::size_t>& directed = schema.directed_features();
  CausalConstraintSet set;
  if (directed.empty()) return set;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a : directed) {
    for (std::size_t b : directed) {
      if (a != b) pairs.emplace_back(a, b);
    }
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  const std::size_t edges = std::uniform_int_distribution<std::size_t>(
      0, std::min(max_edges, pairs.size()))(rng);
  for (std::size_t e = 0; e < edges; ++e) {
    set.binary.push_back({schema.feature(pairs[e].first).name,
                          schema.feature(pairs[e].second).name});
  }
  std::vector<std::size_t> order = directed;
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t unary = std::uniform_int_distribution<std::size_t>(
      0, std::min(max_unary, order.size()))(rng);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t u = 0; u < unary; ++u) {
    auto& target = coin(rng) ? set.unary_increase : set.unary_decrease;
    target.push_back(schema.feature(order[u]).name);
  }
  return set;
}

LinearModel RandomModel(std::size_t width, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::VectorXd w(static_cast<Eigen::Index>(width));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = n(rng);
  return LinearModel(w, n(rng));
}

Instance NegativeInstance(const Schema& schema, const Classifier& model,
                          std::mt19937_64& rng, int attempts) {
  for (int a = 0; a < attempts; ++a) {
    Instance x = RandomInstance(schema, rng);
    if (model.Predict(x.encoded) == 0) return x;
  }
  throw std::runtime_error("no negative instance found");
}

}  // namespace cfx::testing
