#pragma once

#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfx/constraints.h"
#include "cfx/engine.h"
#include "cfx/schema.h"

namespace cfx {

// An upstream move counts only if it exceeds this (encoded units).
inline constexpr double kMismatchThreshold = 1e-6;

// Mechanical proxies for a batch of runs produced under one configuration.
struct RunReport {
  std::size_t runs = 0;
  std::size_t counterfactuals = 0;
  double validity_rate = 0.0;
  double mean_proximity = 0.0;
  double mean_diversity = 0.0;
  std::size_t unary_violations = 0;
  std::size_t binary_pairs = 0;  // counterfactuals x edges
  std::size_t binary_mismatches = 0;
  double binary_mismatch_rate = 0.0;
  double mean_masked_steps = 0.0;

  nlohmann::json ToJson() const;
  void PrintTable(std::ostream& out) const;
};

// Unary constraints broken by one final counterfactual, checked both on the
// encoded coordinates and on the decoded original-unit values.
std::size_t CountUnaryViolations(const Counterfactual& cf, const Instance& x,
                                 const CompiledConstraints& constraints,
                                 const Schema& schema);

// Edges i -> j where the upstream moved by more than the threshold but the
// downstream did not move in the same direction.
std::size_t CountBinaryMismatches(const Eigen::VectorXd& cf,
                                  const Eigen::VectorXd& x,
                                  const CompiledConstraints& constraints,
                                  const Schema& schema);

// Throws on empty input.
RunReport EvaluateRun(const std::vector<CFResult>& results,
                      const CompiledConstraints& constraints,
                      const Schema& schema);

}  // namespace cfx
