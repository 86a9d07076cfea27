#include "cfx/constraints.h"

#include <algorithm>
#include <fstream>
#include <set>

#include "cfx/error.h"

namespace cfx {
namespace {

using nlohmann::json;

int Sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

std::string_view MaskCauseName(MaskCause cause) {
  switch (cause) {
    case MaskCause::kBinarySignConflict:
      return "binary_sign_conflict";
    case MaskCause::kBinaryDownstreamFrozen:
      return "binary_downstream_frozen";
    case MaskCause::kUnaryViolation:
      return "unary_violation";
  }
  return "unknown";
}

CausalConstraintSet CausalConstraintSet::FromJson(const json& doc) {
  CausalConstraintSet out;
  try {
    if (doc.contains("binary")) {
      for (const json& e : doc.at("binary")) {
        out.binary.push_back(
            {e.at("up").get<std::string>(), e.at("down").get<std::string>()});
      }
    }
    if (doc.contains("unary_increase")) {
      out.unary_increase =
          doc.at("unary_increase").get<std::vector<std::string>>();
    }
    if (doc.contains("unary_decrease")) {
      out.unary_decrease =
          doc.at("unary_decrease").get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse,
                std::string("malformed constraint file: ") + e.what());
  }
  return out;
}

CausalConstraintSet CausalConstraintSet::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return FromJson(doc);
}

json CausalConstraintSet::ToJson() const {
  json binary_json = json::array();
  for (const BinaryEdge& e : binary) {
    binary_json.push_back({{"up", e.upstream}, {"down", e.downstream}});
  }
  return {{"binary", binary_json},
          {"unary_increase", unary_increase},
          {"unary_decrease", unary_decrease}};
}

CompiledConstraints CompiledConstraints::None(const Schema& schema) {
  return Compile({}, schema);
}

CompiledConstraints CompiledConstraints::Compile(
    const CausalConstraintSet& constraints, const Schema& schema) {
  CompiledConstraints out;
  out.features_ = schema.directed_features();
  const auto p = static_cast<Eigen::Index>(out.features_.size());
  out.b_ = -Eigen::MatrixXi::Identity(p, p);
  out.b_plus_ = Eigen::VectorXi::Zero(p);
  out.b_minus_ = Eigen::VectorXi::Zero(p);

  auto position = [&](const std::string& name) {
    const std::size_t f = schema.IndexOrThrow(name);
    const auto pos = out.PositionOf(f);
    if (!pos) {
      throw Error(ErrorCode::kInvalidArgument,
                  "feature '" + name +
                      "' is nominal; constraints need a direction of change");
    }
    return *pos;
  };

  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const BinaryEdge& e : constraints.binary) {
    const std::size_t up = position(e.upstream);
    const std::size_t down = position(e.downstream);
    if (up == down) {
      throw Error(ErrorCode::kInvalidArgument,
                  "self edge on '" + e.upstream + "'");
    }
    if (!seen.insert({up, down}).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate edge '" + e.upstream +
                                                   "' -> '" + e.downstream + "'");
    }
    out.b_(up, down) = -1;
    out.edges_.emplace_back(up, down);
  }
  for (const std::string& name : constraints.unary_increase) {
    out.b_plus_[position(name)] = -1;
  }
  for (const std::string& name : constraints.unary_decrease) {
    const std::size_t pos = position(name);
    if (out.b_plus_[pos] != 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "feature '" + name + "' is both increase-only and decrease-only");
    }
    out.b_minus_[pos] = -1;
  }
  out.has_unary_ = out.b_plus_.any() || out.b_minus_.any();
  return out;
}

std::optional<std::size_t> CompiledConstraints::PositionOf(std::size_t feature) const {
  const auto it = std::find(features_.begin(), features_.end(), feature);
  if (it == features_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - features_.begin());
}

Eigen::VectorXi CompiledConstraints::ViolationVector(
    std::size_t i, const Eigen::VectorXd& grad) const {
  const Eigen::Index p = b_.rows();
  if (grad.size() != p) {
    throw Error(ErrorCode::kInvalidArgument, "gradient width does not match");
  }
  Eigen::VectorXi v(p);
  const int si = Sign(grad[i]);
  for (Eigen::Index j = 0; j < p; ++j) {
    v[j] = b_(i, j) * Sign(grad[j]) + si;
  }
  return v;
}

MaskResult CompiledConstraints::Mask(const Eigen::VectorXd& grad) const {
  const Eigen::Index p = b_.rows();
  if (grad.size() != p) {
    throw Error(ErrorCode::kInvalidArgument, "gradient width does not match");
  }
  MaskResult out;
  out.masked = grad;
  if (empty()) return out;

  for (Eigen::Index i = 0; i < p; ++i) {
    if (grad[i] == 0.0) continue;
    std::optional<MaskCause> cause;
    // Only downstream features of i are inspected: for unrelated j the
    // +-1 entries of v^i carry no constraint.
    for (Eigen::Index j = 0; j < p && !cause; ++j) {
      if (j == i || b_(i, j) == 0) continue;
      const int v = b_(i, j) * Sign(grad[j]) + Sign(grad[i]);
      if (v == 2 || v == -2) {
        cause = MaskCause::kBinarySignConflict;
      } else if ((v == 1 || v == -1) && grad[j] == 0.0) {
        cause = MaskCause::kBinaryDownstreamFrozen;
      }
    }
    if (!cause) {
      // The optimizer steps along -grad, so with b = -1 a value of -1 in
      // v+ (or +1 in v-) is a step in the forbidden direction.
      const int v_plus = b_plus_[i] * Sign(grad[i]);
      const int v_minus = b_minus_[i] * Sign(grad[i]);
      if (v_plus == -1 || v_minus == 1) cause = MaskCause::kUnaryViolation;
    }
    if (cause) {
      out.masked[i] = 0.0;
      out.positions.push_back(static_cast<std::size_t>(i));
      out.causes.push_back(*cause);
    }
  }
  return out;
}

Eigen::VectorXd CompiledConstraints::Gather(const Eigen::VectorXd& encoded,
                                            const Schema& schema) const {
  Eigen::VectorXd out(features_.size());
  for (std::size_t pos = 0; pos < features_.size(); ++pos) {
    out[pos] = encoded[schema.offset(features_[pos])];
  }
  return out;
}

void CompiledConstraints::Scatter(const Eigen::VectorXd& directed,
                                  const Schema& schema,
                                  Eigen::VectorXd& encoded) const {
  for (std::size_t pos = 0; pos < features_.size(); ++pos) {
    encoded[schema.offset(features_[pos])] = directed[pos];
  }
}

}  // namespace cfx
