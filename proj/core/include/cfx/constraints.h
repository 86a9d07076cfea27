#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "cfx/schema.h"

namespace cfx {

struct BinaryEdge {
  std::string upstream;
  std::string downstream;
};

// Expert-declared monotonic constraints. A binary edge up -> down says a
// change in `up` must come with a same-direction change in `down`; unary
// declarations say a feature may only increase / only decrease.
struct CausalConstraintSet {
  std::vector<BinaryEdge> binary;
  std::vector<std::string> unary_increase;
  std::vector<std::string> unary_decrease;

  bool empty() const {
    return binary.empty() && unary_increase.empty() && unary_decrease.empty();
  }

  static CausalConstraintSet FromJson(const nlohmann::json& doc);
  static CausalConstraintSet Load(const std::filesystem::path& path);
  nlohmann::json ToJson() const;
};

enum class MaskCause : std::uint8_t {
  kBinarySignConflict,
  kBinaryDownstreamFrozen,
  kUnaryViolation,
};

std::string_view MaskCauseName(MaskCause cause);

// What the mask did to one candidate's gradient in one iteration. Positions
// index the directed coordinates (see CompiledConstraints::features).
struct StepAudit {
  int iteration = 0;
  int candidate = 0;
  std::vector<std::size_t> masked;
  std::vector<MaskCause> causes;  // parallel to `masked`
  // Mask-approved steps that the [0, 1] box shortened.
  std::vector<std::size_t> clamped;
};

struct MaskResult {
  Eigen::VectorXd masked;
  std::vector<std::size_t> positions;
  std::vector<MaskCause> causes;
};

// Constraint vectors over the p directed coordinates (continuous + ordinal
// features, schema order). Row i of `b` is b^i with b^i_j = -1 iff i -> j or
// i == j; b_plus / b_minus carry -1 on unary-constrained features.
class CompiledConstraints {
 public:
  CompiledConstraints() = default;

  // Rejects unknown or nominal features, self-edges, duplicate edges and
  // features declared both increase-only and decrease-only.
  static CompiledConstraints Compile(const CausalConstraintSet& constraints,
                                     const Schema& schema);
  static CompiledConstraints None(const Schema& schema);

  std::size_t dimension() const { return features_.size(); }
  // Schema feature index of each directed position.
  const std::vector<std::size_t>& features() const { return features_; }
  std::optional<std::size_t> PositionOf(std::size_t feature) const;

  const Eigen::MatrixXi& b() const { return b_; }
  const Eigen::VectorXi& b_plus() const { return b_plus_; }
  const Eigen::VectorXi& b_minus() const { return b_minus_; }
  // (upstream, downstream) position pairs.
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const {
    return edges_;
  }
  bool empty() const { return edges_.empty() && !has_unary_; }

  // v^i = b^i o sgn(grad) + sgn(grad_i) 1, entries in {0, +-1, +-2}.
  Eigen::VectorXi ViolationVector(std::size_t i,
                                  const Eigen::VectorXd& grad) const;

  // Single pass over the pre-mask gradient: entry i is zeroed when some
  // downstream j of i has |v^i_j| = 2, or |v^i_j| = 1 with grad_j = 0, or when
  // the step -grad_i would move a unary-constrained feature the wrong way.
  // Surviving entries are untouched.
  MaskResult Mask(const Eigen::VectorXd& grad) const;

  // Directed coordinates of a full encoded-space vector, and back.
  Eigen::VectorXd Gather(const Eigen::VectorXd& encoded, const Schema& schema) const;
  void Scatter(const Eigen::VectorXd& directed, const Schema& schema,
               Eigen::VectorXd& encoded) const;

 private:
  std::vector<std::size_t> features_;
  Eigen::MatrixXi b_;
  Eigen::VectorXi b_plus_;
  Eigen::VectorXi b_minus_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  bool has_unary_ = false;
};

}  // namespace cfx
