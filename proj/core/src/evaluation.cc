#include "cfx/evaluation.h"

#include <cmath>
#include <iomanip>

#include "cfx/error.h"

namespace cfx {
namespace {

int Sign(double v) { return (v > 0.0) - (v < 0.0); }

// Position of a decoded value along its feature's order, or NaN if the
// feature is nominal.
double Ordered(const Feature& f, const Value& v) {
  if (f.kind == FeatureKind::kContinuous) return std::get<double>(v);
  const auto& level = std::get<std::string>(v);
  for (std::size_t l = 0; l < f.levels.size(); ++l) {
    if (f.levels[l] == level) return static_cast<double>(l);
  }
  return std::nan("");
}

}  // namespace

std::size_t CountUnaryViolations(const Counterfactual& cf, const Instance& x,
                                 const CompiledConstraints& constraints,
                                 const Schema& schema) {
  std::size_t violations = 0;
  for (std::size_t pos = 0; pos < constraints.dimension(); ++pos) {
    const bool up = constraints.b_plus()[pos] != 0;
    const bool down = constraints.b_minus()[pos] != 0;
    if (!up && !down) continue;
    const std::size_t f = constraints.features()[pos];
    const std::size_t at = schema.offset(f);
    const double enc = cf.encoded[at] - x.encoded[at];
    bool bad = (up && enc < 0.0) || (down && enc > 0.0);
    if (!cf.values.empty()) {
      const Feature& feature = schema.feature(f);
      const double orig =
          Ordered(feature, cf.values[f]) - Ordered(feature, x.original[f]);
      bad = bad || (up && orig < 0.0) || (down && orig > 0.0);
    }
    violations += bad ? 1 : 0;
  }
  return violations;
}

std::size_t CountBinaryMismatches(const Eigen::VectorXd& cf,
                                  const Eigen::VectorXd& x,
                                  const CompiledConstraints& constraints,
                                  const Schema& schema) {
  std::size_t mismatches = 0;
  for (const auto& [up, down] : constraints.edges()) {
    const std::size_t ua = schema.offset(constraints.features()[up]);
    const std::size_t da = schema.offset(constraints.features()[down]);
    const double du = cf[ua] - x[ua];
    const double dd = cf[da] - x[da];
    if (std::abs(du) > kMismatchThreshold && Sign(dd) != Sign(du)) ++mismatches;
  }
  return mismatches;
}

RunReport EvaluateRun(const std::vector<CFResult>& results,
                      const CompiledConstraints& constraints,
                      const Schema& schema) {
  if (results.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no runs to evaluate");
  }
  RunReport r;
  r.runs = results.size();
  std::size_t valid = 0;
  double masked = 0.0;
  for (const CFResult& run : results) {
    r.mean_proximity += run.proximity;
    r.mean_diversity += run.diversity;
    masked += static_cast<double>(run.audit_summary.audited_steps);
    for (const Counterfactual& cf : run.counterfactuals) {
      ++r.counterfactuals;
      valid += cf.valid ? 1 : 0;
      r.unary_violations += CountUnaryViolations(cf, run.original, constraints, schema);
      r.binary_mismatches += CountBinaryMismatches(cf.encoded, run.original.encoded,
                                                   constraints, schema);
      r.binary_pairs += constraints.edges().size();
    }
  }
  const double runs = static_cast<double>(r.runs);
  r.mean_proximity /= runs;
  r.mean_diversity /= runs;
  r.mean_masked_steps = masked / runs;
  r.validity_rate = r.counterfactuals == 0
                        ? 0.0
                        : static_cast<double>(valid) /
                              static_cast<double>(r.counterfactuals);
  r.binary_mismatch_rate =
      r.binary_pairs == 0 ? 0.0
                          : static_cast<double>(r.binary_mismatches) /
                                static_cast<double>(r.binary_pairs);
  return r;
}

nlohmann::json RunReport::ToJson() const {
  return {{"runs", runs},
          {"counterfactuals", counterfactuals},
          {"validity_rate", validity_rate},
          {"mean_proximity", mean_proximity},
          {"mean_diversity", mean_diversity},
          {"unary_violations", unary_violations},
          {"binary_pairs", binary_pairs},
          {"binary_mismatches", binary_mismatches},
          {"binary_mismatch_rate", binary_mismatch_rate},
          {"mean_masked_steps", mean_masked_steps}};
}

void RunReport::PrintTable(std::ostream& out) const {
  const auto flags = out.flags();
  out << std::left << std::fixed << std::setprecision(4);
  auto row = [&](const char* name, auto value) {
    out << "  " << std::setw(26) << name << value << '\n';
  };
  out << "run report\n";
  row("runs", runs);
  row("counterfactuals", counterfactuals);
  row("validity rate", validity_rate);
  row("mean proximity", mean_proximity);
  row("mean diversity", mean_diversity);
  row("unary violations", unary_violations);
  row("binary mismatch rate", binary_mismatch_rate);
  row("mean masked steps / run", mean_masked_steps);
  out.flags(flags);
}

}  // namespace cfx
