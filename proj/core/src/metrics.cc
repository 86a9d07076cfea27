#include "cfx/metrics.h"

#include <cmath>

#include <Eigen/LU>

#include "cfx/error.h"

namespace cfx {
namespace {

using nlohmann::json;

double Sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

PerturbationWeights PerturbationWeights::Uniform(const Schema& schema) {
  PerturbationWeights w;
  w.gamma_.assign(schema.size(), 1.0);
  return w;
}

PerturbationWeights PerturbationWeights::FromMap(
    const std::map<std::string, double>& gamma, const Schema& schema) {
  PerturbationWeights w = Uniform(schema);
  for (const auto& [name, value] : gamma) {
    const std::size_t i = schema.IndexOrThrow(name);
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "gamma for '" + name + "' must be positive and finite");
    }
    w.gamma_[i] = value;
  }
  return w;
}

PerturbationWeights PerturbationWeights::FromJson(const json& doc,
                                                  const Schema& schema) {
  if (!doc.is_object()) {
    throw Error(ErrorCode::kParse, "gamma must be a JSON object");
  }
  std::map<std::string, double> gamma;
  for (const auto& [name, value] : doc.items()) {
    if (!value.is_number()) {
      throw Error(ErrorCode::kParse, "gamma for '" + name + "' is not a number");
    }
    gamma[name] = value.get<double>();
  }
  return FromMap(gamma, schema);
}

json PerturbationWeights::ToJson(const Schema& schema) const {
  json out = json::object();
  for (std::size_t i = 0; i < schema.size(); ++i) {
    out[schema.feature(i).name] = gamma_.at(i);
  }
  return out;
}

bool PerturbationWeights::is_uniform() const {
  for (double g : gamma_) {
    if (g != 1.0) return false;
  }
  return true;
}

std::string_view ContinuousMetricName(ContinuousMetric metric) {
  return metric == ContinuousMetric::kMadManhattan ? "mad_manhattan"
                                                   : "mahalanobis_sq";
}

ContinuousMetric ParseContinuousMetric(std::string_view text) {
  if (text == "mad_manhattan" || text == "mad") {
    return ContinuousMetric::kMadManhattan;
  }
  if (text == "mahalanobis_sq" || text == "mahalanobis") {
    return ContinuousMetric::kMahalanobisSq;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown metric '" + std::string(text) + "'");
}

ProximityConfig ProximityConfig::FromStats(ContinuousMetric metric,
                                           const DatasetStats& stats) {
  ProximityConfig c;
  c.metric = metric;
  c.normalizer =
      metric == ContinuousMetric::kMadManhattan ? stats.mad : stats.std;
  for (double n : c.normalizer) {
    if (!(n > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "proximity normalizer must be strictly positive");
    }
  }
  return c;
}

ProximityConfig ProximityConfig::Unnormalized(ContinuousMetric metric,
                                              const Schema& schema) {
  ProximityConfig c;
  c.metric = metric;
  c.normalizer.assign(schema.size(), 1.0);
  return c;
}

double DistanceContinuous(const VectorRef& a, const VectorRef& b,
                          const Schema& schema,
                          const PerturbationWeights& weights,
                          const ProximityConfig& config) {
  double total = 0.0;
  for (std::size_t i : schema.directed_features()) {
    const std::size_t at = schema.offset(i);
    const double diff = (a[at] - b[at]) / config.normalizer[i];
    total += config.metric == ContinuousMetric::kMadManhattan
                 ? weights[i] * std::abs(diff)
                 : weights[i] * diff * diff;
  }
  return total;
}

double DistanceCategorical(const VectorRef& a, const VectorRef& b,
                           const Schema& schema,
                           const PerturbationWeights& weights) {
  double total = 0.0;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema.feature(i).kind != FeatureKind::kNominal) continue;
    if (schema.NominalLevel(a, i) != schema.NominalLevel(b, i)) {
      total += weights[i];
    }
  }
  return total;
}

double DistanceCategoricalRelaxed(const VectorRef& a, const VectorRef& b,
                                  const Schema& schema,
                                  const PerturbationWeights& weights) {
  double total = 0.0;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema.feature(i).kind != FeatureKind::kNominal) continue;
    const std::size_t at = schema.offset(i);
    const std::size_t n = schema.width(i);
    total += 0.5 * weights[i] * (a.segment(at, n) - b.segment(at, n)).lpNorm<1>();
  }
  return total;
}

double Distance(const VectorRef& a, const VectorRef& b, const Schema& schema,
                const PerturbationWeights& weights,
                const ProximityConfig& config) {
  return DistanceContinuous(a, b, schema, weights, config) +
         DistanceCategoricalRelaxed(a, b, schema, weights);
}

double ReportedDistance(const VectorRef& a, const VectorRef& b,
                        const Schema& schema,
                        const PerturbationWeights& weights,
                        const ProximityConfig& config) {
  return DistanceContinuous(a, b, schema, weights, config) +
         DistanceCategorical(a, b, schema, weights);
}

void AccumulateDistanceGradient(const VectorRef& a, const VectorRef& b,
                                const Schema& schema,
                                const PerturbationWeights& weights,
                                const ProximityConfig& config, double scale,
                                Eigen::Ref<Eigen::VectorXd> out) {
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const std::size_t at = schema.offset(i);
    const Feature& f = schema.feature(i);
    if (f.kind == FeatureKind::kNominal) {
      const double g = 0.5 * scale * weights[i];
      for (std::size_t e = 0; e < schema.width(i); ++e) {
        out[at + e] += g * Sign(a[at + e] - b[at + e]);
      }
      continue;
    }
    const double n = config.normalizer[i];
    const double diff = a[at] - b[at];
    if (config.metric == ContinuousMetric::kMadManhattan) {
      out[at] += scale * weights[i] * Sign(diff) / n;
    } else {
      out[at] += scale * 2.0 * weights[i] * diff / (n * n);
    }
  }
}

namespace {

template <typename DistanceFn>
Eigen::MatrixXd Kernel(const CfSet& cfs, double ridge, DistanceFn&& dist) {
  const auto k = static_cast<Eigen::Index>(cfs.size());
  Eigen::MatrixXd m(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    m(i, i) = 1.0 + ridge;
    for (Eigen::Index j = i + 1; j < k; ++j) {
      m(i, j) = m(j, i) = 1.0 / (1.0 + dist(cfs[i], cfs[j]));
    }
  }
  return m;
}

}  // namespace

Eigen::MatrixXd DiversityKernel(const CfSet& cfs, const Schema& schema,
                                const PerturbationWeights& weights,
                                const ProximityConfig& config, double ridge) {
  return Kernel(cfs, ridge, [&](const auto& a, const auto& b) {
    return Distance(a, b, schema, weights, config);
  });
}

double Diversity(const CfSet& cfs, const Schema& schema,
                 const PerturbationWeights& weights,
                 const ProximityConfig& config, double ridge) {
  if (cfs.empty()) return 1.0;
  return DiversityKernel(cfs, schema, weights, config, ridge).determinant();
}

double ReportedDiversity(const CfSet& cfs, const Schema& schema,
                         const PerturbationWeights& weights,
                         const ProximityConfig& config) {
  if (cfs.empty()) return 1.0;
  return Kernel(cfs, 0.0,
                [&](const auto& a, const auto& b) {
                  return ReportedDistance(a, b, schema, weights, config);
                })
      .determinant();
}

double HingeLoss(double logit, int desired_class) {
  const double margin = 1.0 - DesiredSign(desired_class) * logit;
  // std::max would map NaN to 0 and hide a broken model.
  return std::isnan(margin) ? margin : std::max(0.0, margin);
}

double HingeSlope(double logit, int desired_class) {
  const double z = DesiredSign(desired_class);
  return 1.0 - z * logit > 0.0 ? -z : 0.0;
}

Objective::Objective(const Schema& schema, const Classifier& model,
                     Eigen::VectorXd x, PerturbationWeights weights,
                     ProximityConfig proximity, ObjectiveParams params)
    : schema_(schema),
      model_(model),
      x_(std::move(x)),
      weights_(std::move(weights)),
      proximity_(std::move(proximity)),
      params_(params) {
  if (static_cast<std::size_t>(x_.size()) != schema_.encoded_width()) {
    throw Error(ErrorCode::kInvalidArgument,
                "original instance has wrong encoded width");
  }
  if (weights_.values().size() != schema_.size() ||
      proximity_.normalizer.size() != schema_.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "weights/normalizer do not match the schema");
  }
  if (!(params_.lambda1 >= 0.0) || !(params_.lambda2 >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambdas must be non-negative");
  }
}

ObjectiveValue Objective::Evaluate(const CfSet& cfs, bool with_gradient) const {
  if (cfs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one candidate");
  }
  const std::size_t k = cfs.size();
  const double inv_k = 1.0 / static_cast<double>(k);
  ObjectiveValue out;
  if (with_gradient) {
    out.gradients.assign(k, Eigen::VectorXd::Zero(x_.size()));
  }

  for (std::size_t c = 0; c < k; ++c) {
    const double logit = model_.Logit(cfs[c]);
    out.loss += HingeLoss(logit, params_.desired_class);
    out.proximity += Distance(cfs[c], x_, schema_, weights_, proximity_);
    if (!with_gradient) continue;
    const double slope = HingeSlope(logit, params_.desired_class);
    if (slope != 0.0) {
      out.gradients[c] += (slope * inv_k) * model_.InputGradient(cfs[c]);
    }
    if (params_.lambda1 != 0.0) {
      AccumulateDistanceGradient(cfs[c], x_, schema_, weights_, proximity_,
                                 params_.lambda1 * inv_k, out.gradients[c]);
    }
  }
  out.loss *= inv_k;
  out.proximity *= inv_k;

  const Eigen::MatrixXd kernel =
      DiversityKernel(cfs, schema_, weights_, proximity_, params_.ridge);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(kernel);
  out.diversity = lu.determinant();
  out.value = out.loss + params_.lambda1 * out.proximity -
              params_.lambda2 * out.diversity;

  if (with_gradient && params_.lambda2 != 0.0 && k > 1) {
    if (!std::isfinite(out.diversity) || lu.rcond() < 1e-12) {
      throw Error(ErrorCode::kIllConditioned, "diversity term ill-conditioned");
    }
    // d det / d K_ij = det * (K^-1)_ji; each off-diagonal distance enters
    // K twice, and dK_ij / d d_ij = -K_ij^2.
    const Eigen::MatrixXd inv = lu.inverse();
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        if (i == j) continue;
        const double kij = kernel(i, j);
        const double coeff = -params_.lambda2 * 2.0 * out.diversity *
                             inv(i, j) * (-kij * kij);
        AccumulateDistanceGradient(cfs[i], cfs[j], schema_, weights_,
                                   proximity_, coeff, out.gradients[i]);
      }
    }
  }
  return out;
}

}  // namespace cfx
