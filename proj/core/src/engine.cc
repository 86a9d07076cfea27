#include "cfx/engine.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "cfx/error.h"

namespace cfx {
namespace {

using nlohmann::json;

std::string Lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Keeps non-modifiable coordinates pinned by zeroing their gradient.
Eigen::VectorXd FrozenMask(const Schema& schema) {
  Eigen::VectorXd keep = Eigen::VectorXd::Ones(schema.encoded_width());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (!schema.feature(i).user_modifiable) {
      keep.segment(schema.offset(i), schema.width(i)).setZero();
    }
  }
  return keep;
}

// U+ features never fall below the original, U- never rise above it.
void ProjectUnary(const CompiledConstraints& constraints, const Schema& schema,
                  const Eigen::VectorXd& x, Eigen::VectorXd& c) {
  for (std::size_t pos = 0; pos < constraints.dimension(); ++pos) {
    const std::size_t at = schema.offset(constraints.features()[pos]);
    if (constraints.b_plus()[pos] != 0) c[at] = std::max(c[at], x[at]);
    if (constraints.b_minus()[pos] != 0) c[at] = std::min(c[at], x[at]);
  }
}

bool AllValid(const CfSet& cfs, const Schema& schema, const Classifier& model,
              int desired_class) {
  for (const Eigen::VectorXd& c : cfs) {
    if (model.Predict(schema.Project(c)) != desired_class) return false;
  }
  return true;
}

}  // namespace

std::string_view ConditionName(Condition condition) {
  switch (condition) {
    case Condition::kC1Unconstrained:
      return "c1";
    case Condition::kC2Global:
      return "c2";
    case Condition::kC3GlobalAndLocal:
      return "c3";
  }
  return "c2";
}

Condition ParseCondition(std::string_view text) {
  const std::string t = Lower(text);
  if (t == "c1" || t == "c1_unconstrained") return Condition::kC1Unconstrained;
  if (t == "c2" || t == "c2_global") return Condition::kC2Global;
  if (t == "c3" || t == "c3_global_and_local") {
    return Condition::kC3GlobalAndLocal;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown condition '" + std::string(text) + "'");
}

void EngineConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "engine config: " + what);
  };
  if (k < 1) fail("k must be at least 1");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) fail("lambdas must be >= 0");
  if (!(step_size > 0.0)) fail("step size must be > 0");
  if (max_iterations < 0) fail("max iterations must be >= 0");
  if (!(convergence_tol >= 0.0)) fail("convergence tolerance must be >= 0");
  if (convergence_window < 1) fail("convergence window must be >= 1");
  if (desired_class != 0 && desired_class != 1) fail("desired class must be 0 or 1");
  if (!(init_noise >= 0.0)) fail("init noise must be >= 0");
  if (!(ridge >= 0.0)) fail("ridge must be >= 0");
}

json EngineConfig::ToJson() const {
  return {{"k", k},
          {"lambda1", lambda1},
          {"lambda2", lambda2},
          {"step_size", step_size},
          {"max_iterations", max_iterations},
          {"convergence_tol", convergence_tol},
          {"convergence_window", convergence_window},
          {"seed", seed},
          {"condition", ConditionName(condition)},
          {"metric", ContinuousMetricName(metric)},
          {"desired_class", desired_class}};
}

std::vector<bool> CFResult::valid() const {
  std::vector<bool> out;
  out.reserve(counterfactuals.size());
  for (const Counterfactual& cf : counterfactuals) out.push_back(cf.valid);
  return out;
}

CFResult Generate(const Instance& x, const Classifier& model,
                  const Schema& schema, const DatasetStats& stats,
                  const PerturbationWeights& weights,
                  const CompiledConstraints& constraints,
                  const EngineConfig& config, const StepObserver& observer) {
  config.Validate();
  if (static_cast<std::size_t>(x.encoded.size()) != schema.encoded_width()) {
    throw Error(ErrorCode::kInvalidArgument,
                "instance does not match the schema encoding");
  }
  if (model.Predict(x.encoded) == config.desired_class) {
    throw Error(ErrorCode::kNothingToExplain, "nothing to explain");
  }

  const bool constrained = config.condition != Condition::kC1Unconstrained;
  const CompiledConstraints none = CompiledConstraints::None(schema);
  const CompiledConstraints& active = constrained ? constraints : none;
  if (active.dimension() != schema.directed_features().size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "constraints were compiled for a different schema");
  }
  const PerturbationWeights gamma =
      config.condition == Condition::kC3GlobalAndLocal
          ? weights
          : PerturbationWeights::Uniform(schema);
  const ProximityConfig proximity =
      ProximityConfig::FromStats(config.metric, stats);

  ObjectiveParams params;
  params.lambda1 = config.lambda1;
  params.lambda2 = config.lambda2;
  params.desired_class = config.desired_class;
  params.ridge = config.ridge;
  const Objective objective(schema, model, x.encoded, gamma, proximity, params);

  const Eigen::VectorXd keep = FrozenMask(schema);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> noise(-config.init_noise,
                                               config.init_noise);
  CfSet cfs(config.k);
  for (Eigen::VectorXd& c : cfs) {
    c = x.encoded;
    for (Eigen::Index e = 0; e < c.size(); ++e) {
      const double n = noise(rng);
      if (keep[e] != 0.0) c[e] = std::clamp(c[e] + n, 0.0, 1.0);
    }
    ProjectUnary(active, schema, x.encoded, c);
  }

  CFResult result;
  result.original = x;
  result.desired_class = config.desired_class;
  result.condition = config.condition;
  result.seed = config.seed;

  const std::size_t window = static_cast<std::size_t>(config.convergence_window);
  int it = 0;
  for (; it < config.max_iterations; ++it) {
    ObjectiveValue ev = objective.Evaluate(cfs);
    bool finite = std::isfinite(ev.value);
    for (const Eigen::VectorXd& g : ev.gradients) finite = finite && g.allFinite();
    if (!finite) {
      throw Error(ErrorCode::kNonFinite,
                  "non-finite objective at iteration " + std::to_string(it));
    }
    result.objective_trace.push_back(ev.value);

    const auto& trace = result.objective_trace;
    if (trace.size() > window) {
      const auto [lo, hi] =
          std::minmax_element(trace.end() - static_cast<long>(window) - 1, trace.end());
      if (*hi - *lo < config.convergence_tol &&
          AllValid(cfs, schema, model, config.desired_class)) {
        result.converged = true;
        break;
      }
    }

    for (int k = 0; k < config.k; ++k) {
      Eigen::VectorXd& c = cfs[k];
      Eigen::VectorXd g = ev.gradients[k].cwiseProduct(keep);
      const Eigen::VectorXd pre = active.Gather(g, schema);
      MaskResult mr = active.Mask(pre);
      active.Scatter(mr.masked, schema, g);
      if (observer) observer(StepRecord{it, k, pre, mr.masked});

      StepAudit audit;
      audit.iteration = it;
      audit.candidate = k;
      audit.masked = std::move(mr.positions);
      audit.causes = std::move(mr.causes);

      c -= config.step_size * g;
      for (std::size_t pos = 0; pos < active.dimension(); ++pos) {
        const std::size_t at = schema.offset(active.features()[pos]);
        if (mr.masked[pos] != 0.0 && (c[at] < 0.0 || c[at] > 1.0)) {
          audit.clamped.push_back(pos);
        }
      }
      c = c.cwiseMax(0.0).cwiseMin(1.0);
      ProjectUnary(active, schema, x.encoded, c);

      if (!audit.masked.empty() || !audit.clamped.empty()) {
        AuditSummary& s = result.audit_summary;
        if (!audit.masked.empty()) ++s.audited_steps;
        s.masked_entries += audit.masked.size();
        s.clamped_entries += audit.clamped.size();
        for (MaskCause cause : audit.causes) {
          switch (cause) {
            case MaskCause::kBinarySignConflict:
              ++s.sign_conflicts;
              break;
            case MaskCause::kBinaryDownstreamFrozen:
              ++s.downstream_frozen;
              break;
            case MaskCause::kUnaryViolation:
              ++s.unary_violations;
              break;
          }
        }
        result.audits.push_back(std::move(audit));
      }
    }
  }
  result.iterations_used = it;

  CfSet final_cfs;
  final_cfs.reserve(cfs.size());
  for (const Eigen::VectorXd& c : cfs) {
    Eigen::VectorXd projected = schema.Project(c);
    ProjectUnary(active, schema, x.encoded, projected);
    Counterfactual cf;
    cf.logit = model.Logit(projected);
    cf.probability = Sigmoid(cf.logit);
    cf.valid = model.Predict(projected) == config.desired_class;
    cf.distance = ReportedDistance(projected, x.encoded, schema, gamma, proximity);
    cf.values = schema.DecodeRelativeTo(projected, x);
    cf.encoded = projected;
    final_cfs.push_back(std::move(projected));
    result.proximity += cf.distance;
    result.counterfactuals.push_back(std::move(cf));
  }
  result.proximity /= static_cast<double>(config.k);
  result.diversity = ReportedDiversity(final_cfs, schema, gamma, proximity);
  return result;
}

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<BatchItem> GenerateBatch(const std::vector<Instance>& instances,
                                     const Classifier& model,
                                     const Schema& schema,
                                     const DatasetStats& stats,
                                     const PerturbationWeights& weights,
                                     const CompiledConstraints& constraints,
                                     const EngineConfig& config) {
  std::vector<BatchItem> out(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    EngineConfig per = config;
    per.seed = DeriveSeed(config.seed, i);
    try {
      out[i].result = Generate(instances[i], model, schema, stats, weights,
                               constraints, per);
    } catch (const Error& e) {
      out[i].error = e.what();
    }
  }
  return out;
}

}  // namespace cfx
