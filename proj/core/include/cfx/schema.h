#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace cfx {

enum class FeatureKind { kContinuous, kOrdinal, kNominal };

std::string_view FeatureKindName(FeatureKind kind);

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  // Categorical only. Ordinal levels are listed in their semantic order.
  std::vector<std::string> levels;
  // Continuous only, original units.
  double min = 0.0;
  double max = 1.0;
  bool user_modifiable = true;

  bool categorical() const { return kind != FeatureKind::kContinuous; }
  // Continuous and ordinal features have a direction of change; nominal
  // features do not.
  bool directed() const { return kind != FeatureKind::kNominal; }
};

// Original-space value of one feature: a real for continuous features, a
// level label for categorical ones.
using Value = std::variant<double, std::string>;
using OriginalValues = std::vector<Value>;

struct Target {
  std::string name;
  std::string positive;  // label text mapped to class 1
  std::string negative;  // optional; when set, any other text is an error
};

struct Instance {
  OriginalValues original;
  Eigen::VectorXd encoded;
};

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<Feature> features, Target target = {});

  static Schema FromJson(const nlohmann::json& doc);
  static Schema Load(const std::filesystem::path& path);
  nlohmann::json ToJson() const;

  const std::vector<Feature>& features() const { return features_; }
  const Feature& feature(std::size_t i) const { return features_.at(i); }
  std::size_t size() const { return features_.size(); }
  const Target& target() const { return target_; }

  std::optional<std::size_t> IndexOf(std::string_view name) const;
  std::size_t IndexOrThrow(std::string_view name) const;

  // Layout of the encoded vector: feature i occupies
  // [offset(i), offset(i) + width(i)).
  std::size_t encoded_width() const { return encoded_width_; }
  std::size_t offset(std::size_t i) const { return offsets_.at(i); }
  std::size_t width(std::size_t i) const;

  // Feature indices of continuous + ordinal features, in schema order.
  const std::vector<std::size_t>& directed_features() const {
    return directed_;
  }

  // Stable hash of the feature list; guards model files against being
  // loaded with a different encoding.
  std::string Fingerprint() const;

  // Throws on values outside [min, max] or unknown levels; no clamping.
  Eigen::VectorXd Encode(const OriginalValues& values) const;
  Instance MakeInstance(OriginalValues values) const;

  // Total on vectors of the encoded width: ordinals round to the nearest
  // level, nominals take the argmax of their block (lowest index on ties).
  OriginalValues Decode(const Eigen::Ref<const Eigen::VectorXd>& encoded) const;

  // Like Decode, but features whose encoded block equals the reference's
  // decode to the reference's original value, and continuous features never
  // decode on the wrong side of the reference value.
  OriginalValues DecodeRelativeTo(
      const Eigen::Ref<const Eigen::VectorXd>& encoded,
      const Instance& reference) const;

  // Snap every categorical block onto its nearest valid encoding.
  Eigen::VectorXd Project(const Eigen::Ref<const Eigen::VectorXd>& encoded) const;

  std::size_t OrdinalLevel(const Eigen::Ref<const Eigen::VectorXd>& encoded,
                           std::size_t feature) const;
  std::size_t NominalLevel(const Eigen::Ref<const Eigen::VectorXd>& encoded,
                           std::size_t feature) const;

  // {name: value} objects, as used by every JSON surface.
  OriginalValues ValuesFromJson(const nlohmann::json& object) const;
  nlohmann::json ValuesToJson(const OriginalValues& values) const;
  // Parses one textual cell (CSV or CLI) for feature i.
  Value ParseCell(std::size_t feature, std::string_view text) const;

 private:
  void Validate() const;

  std::vector<Feature> features_;
  Target target_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> directed_;
  std::size_t encoded_width_ = 0;
};

std::string ValueToString(const Value& value);

}  // namespace cfx
