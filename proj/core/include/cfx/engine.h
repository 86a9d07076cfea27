#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "cfx/classifier.h"
#include "cfx/constraints.h"
#include "cfx/dataset.h"
#include "cfx/metrics.h"
#include "cfx/schema.h"

namespace cfx {

// C1: no feasibility constraints (gamma forced to 1, mask disabled).
// C2: global constraints only (gamma forced to 1).
// C3: global constraints and the end-user's gamma.
enum class Condition { kC1Unconstrained, kC2Global, kC3GlobalAndLocal };

std::string_view ConditionName(Condition condition);  // "c1" / "c2" / "c3"
Condition ParseCondition(std::string_view text);

struct EngineConfig {
  int k = 5;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double step_size = 0.05;
  int max_iterations = 5000;
  double convergence_tol = 1e-4;
  int convergence_window = 10;
  std::uint64_t seed = 0;
  Condition condition = Condition::kC2Global;
  ContinuousMetric metric = ContinuousMetric::kMadManhattan;
  int desired_class = 1;
  double init_noise = 0.01;
  double ridge = kDiversityRidge;

  void Validate() const;
  nlohmann::json ToJson() const;
};

struct Counterfactual {
  Eigen::VectorXd encoded;  // after final projection
  OriginalValues values;
  double logit = 0.0;
  double probability = 0.0;
  bool valid = false;
  double distance = 0.0;  // reported distance to the original
};

struct AuditSummary {
  std::size_t audited_steps = 0;  // (iteration, candidate) pairs with a mask
  std::size_t masked_entries = 0;
  std::size_t sign_conflicts = 0;
  std::size_t downstream_frozen = 0;
  std::size_t unary_violations = 0;
  std::size_t clamped_entries = 0;
};

struct CFResult {
  Instance original;
  int desired_class = 1;
  Condition condition = Condition::kC2Global;
  std::uint64_t seed = 0;
  std::vector<Counterfactual> counterfactuals;
  std::vector<double> objective_trace;
  double proximity = 0.0;  // mean reported distance to the original
  double diversity = 0.0;  // ridge-free determinant over reported distances
  std::vector<StepAudit> audits;
  AuditSummary audit_summary;
  int iterations_used = 0;
  bool converged = false;

  std::vector<bool> valid() const;
};

// One accepted candidate step, in directed coordinates, before the box
// clamp. `pre_mask` and `masked` are equal under C1.
struct StepRecord {
  int iteration;
  int candidate;
  const Eigen::VectorXd& pre_mask;
  const Eigen::VectorXd& masked;
};
using StepObserver = std::function<void(const StepRecord&)>;

// Runs masked gradient descent on the diverse-counterfactual objective.
// Throws kNothingToExplain when x already has the desired class and
// kNonFinite (naming the iteration) if the objective blows up. Features
// marked not user-modifiable are held at their original value.
CFResult Generate(const Instance& x, const Classifier& model,
                  const Schema& schema, const DatasetStats& stats,
                  const PerturbationWeights& weights,
                  const CompiledConstraints& constraints,
                  const EngineConfig& config,
                  const StepObserver& observer = {});

struct BatchItem {
  std::optional<CFResult> result;
  std::string error;
};

// Seed for the index-th instance of a batch.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t index);

// Elementwise Generate with DeriveSeed(config.seed, i); per-instance errors
// are collected instead of aborting.
std::vector<BatchItem> GenerateBatch(const std::vector<Instance>& instances,
                                     const Classifier& model,
                                     const Schema& schema,
                                     const DatasetStats& stats,
                                     const PerturbationWeights& weights,
                                     const CompiledConstraints& constraints,
                                     const EngineConfig& config);

}  // namespace cfx
