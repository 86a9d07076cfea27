#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "cfx/classifier.h"
#include "cfx/dataset.h"
#include "cfx/schema.h"

namespace cfx {

using CfSet = std::vector<Eigen::VectorXd>;

inline constexpr double kDiversityRidge = 1e-6;

// Per-feature perturbation difficulty (gamma). Larger means harder to change.
// Unspecified features default to 1; every entry is strictly positive.
class PerturbationWeights {
 public:
  PerturbationWeights() = default;

  static PerturbationWeights Uniform(const Schema& schema);
  static PerturbationWeights FromMap(const std::map<std::string, double>& gamma,
                                     const Schema& schema);
  static PerturbationWeights FromJson(const nlohmann::json& doc,
                                      const Schema& schema);
  nlohmann::json ToJson(const Schema& schema) const;

  double operator[](std::size_t feature) const { return gamma_.at(feature); }
  const std::vector<double>& values() const { return gamma_; }
  bool is_uniform() const;

 private:
  std::vector<double> gamma_;
};

enum class ContinuousMetric {
  kMadManhattan,   // sum_j gamma_j |a_j - b_j| / n_j
  kMahalanobisSq,  // sum_j gamma_j ((a_j - b_j) / n_j)^2
};

std::string_view ContinuousMetricName(ContinuousMetric metric);
ContinuousMetric ParseContinuousMetric(std::string_view text);

struct ProximityConfig {
  ContinuousMetric metric = ContinuousMetric::kMadManhattan;
  // Per feature, strictly positive; only directed features read it.
  std::vector<double> normalizer;

  // MAD for the Manhattan metric, std for the quadratic one.
  static ProximityConfig FromStats(ContinuousMetric metric,
                                   const DatasetStats& stats);
  static ProximityConfig Unnormalized(ContinuousMetric metric,
                                      const Schema& schema);
};

using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

// Sum over continuous and ordinal coordinates.
double DistanceContinuous(const VectorRef& a, const VectorRef& b,
                          const Schema& schema,
                          const PerturbationWeights& weights,
                          const ProximityConfig& config);

// Weighted overlap on decoded nominal levels.
double DistanceCategorical(const VectorRef& a, const VectorRef& b,
                           const Schema& schema,
                           const PerturbationWeights& weights);

// Relaxed nominal distance used while optimizing:
// gamma_j * sum_e |a_e - b_e| / 2 per one-hot block. Agrees with
// DistanceCategorical on one-hot vertices.
double DistanceCategoricalRelaxed(const VectorRef& a, const VectorRef& b,
                                  const Schema& schema,
                                  const PerturbationWeights& weights);

// Continuous + relaxed categorical; the distance the optimizer sees.
double Distance(const VectorRef& a, const VectorRef& b, const Schema& schema,
                const PerturbationWeights& weights,
                const ProximityConfig& config);

// Continuous + exact overlap; the distance reported for final instances.
double ReportedDistance(const VectorRef& a, const VectorRef& b,
                        const Schema& schema,
                        const PerturbationWeights& weights,
                        const ProximityConfig& config);

// out += scale * d Distance(a, b) / d a. Subgradient 0 at |a_e - b_e| = 0.
void AccumulateDistanceGradient(const VectorRef& a, const VectorRef& b,
                                const Schema& schema,
                                const PerturbationWeights& weights,
                                const ProximityConfig& config, double scale,
                                Eigen::Ref<Eigen::VectorXd> out);

// K_ij = 1 / (1 + d(c_i, c_j)) + ridge * [i == j], with the relaxed distance.
Eigen::MatrixXd DiversityKernel(const CfSet& cfs, const Schema& schema,
                                const PerturbationWeights& weights,
                                const ProximityConfig& config,
                                double ridge = kDiversityRidge);

// det of DiversityKernel.
double Diversity(const CfSet& cfs, const Schema& schema,
                 const PerturbationWeights& weights,
                 const ProximityConfig& config, double ridge = kDiversityRidge);

// Ridge-free determinant over ReportedDistance.
double ReportedDiversity(const CfSet& cfs, const Schema& schema,
                         const PerturbationWeights& weights,
                         const ProximityConfig& config);

// z = +1 for desired class 1, -1 for class 0.
inline double DesiredSign(int desired_class) {
  return desired_class == 1 ? 1.0 : -1.0;
}

// max(0, 1 - z * logit).
double HingeLoss(double logit, int desired_class);
// d HingeLoss / d logit, with 0 at the kink.
double HingeSlope(double logit, int desired_class);

struct ObjectiveParams {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  int desired_class = 1;
  double ridge = kDiversityRidge;
};

struct ObjectiveValue {
  double value = 0.0;
  double loss = 0.0;       // mean hinge
  double proximity = 0.0;  // mean distance to the original
  double diversity = 0.0;  // kernel determinant
  CfSet gradients;         // one per candidate; empty if not requested
};

// The diverse-counterfactual objective
//   (1/K) sum_k hinge(c_k) + (lambda1/K) sum_k d(c_k, x) - lambda2 det(K)
// and its gradient with respect to every candidate.
class Objective {
 public:
  Objective(const Schema& schema, const Classifier& model, Eigen::VectorXd x,
            PerturbationWeights weights, ProximityConfig proximity,
            ObjectiveParams params);

  ObjectiveValue Evaluate(const CfSet& cfs, bool with_gradient = true) const;

  const Eigen::VectorXd& original() const { return x_; }
  const ObjectiveParams& params() const { return params_; }
  const PerturbationWeights& weights() const { return weights_; }
  const ProximityConfig& proximity() const { return proximity_; }

 private:
  const Schema& schema_;
  const Classifier& model_;
  Eigen::VectorXd x_;
  PerturbationWeights weights_;
  ProximityConfig proximity_;
  ObjectiveParams params_;
};

}  // namespace cfx
