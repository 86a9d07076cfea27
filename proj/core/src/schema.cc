#include "cfx/schema.h"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include "cfx/error.h"

namespace cfx {
namespace {

using nlohmann::json;

FeatureKind ParseKind(const std::string& text) {
  if (text == "continuous") return FeatureKind::kContinuous;
  if (text == "ordinal_categorical") return FeatureKind::kOrdinal;
  if (text == "nominal_categorical") return FeatureKind::kNominal;
  throw Error(ErrorCode::kParse, "unknown feature kind '" + text + "'");
}

std::size_t LevelIndex(const Feature& f, const std::string& level) {
  for (std::size_t l = 0; l < f.levels.size(); ++l) {
    if (f.levels[l] == level) return l;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown level '" + level +
                                               "' for feature '" + f.name +
                                               "'");
}

std::string FormatDouble(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string_view FeatureKindName(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kContinuous:
      return "continuous";
    case FeatureKind::kOrdinal:
      return "ordinal_categorical";
    case FeatureKind::kNominal:
      return "nominal_categorical";
  }
  return "continuous";
}

std::string ValueToString(const Value& value) {
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  std::ostringstream os;
  os.precision(15);
  os << std::get<double>(value);
  return os.str();
}

Schema::Schema(std::vector<Feature> features, Target target)
    : features_(std::move(features)), target_(std::move(target)) {
  Validate();
  offsets_.reserve(features_.size());
  for (std::size_t i = 0; i < features_.size(); ++i) {
    offsets_.push_back(encoded_width_);
    encoded_width_ += width(i);
    if (features_[i].directed()) directed_.push_back(i);
  }
}

void Schema::Validate() const {
  if (features_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "schema has no features");
  }
  std::set<std::string> names;
  for (const Feature& f : features_) {
    if (f.name.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "feature with empty name");
    }
    if (!names.insert(f.name).second) {
      throw Error(ErrorCode::kInvalidArgument,
                  "duplicate feature '" + f.name + "'");
    }
    if (f.categorical() == f.levels.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "feature '" + f.name +
                      "': levels must be non-empty iff categorical");
    }
    if (f.categorical()) {
      std::set<std::string> seen(f.levels.begin(), f.levels.end());
      if (seen.size() != f.levels.size()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "feature '" + f.name + "' repeats a level");
      }
    } else if (!(f.min < f.max) || !std::isfinite(f.min) ||
               !std::isfinite(f.max)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "feature '" + f.name + "' needs finite min < max");
    }
  }
}

Schema Schema::FromJson(const json& doc) {
  try {
    std::vector<Feature> features;
    for (const json& item : doc.at("features")) {
      Feature f;
      f.name = item.at("name").get<std::string>();
      f.kind = ParseKind(item.at("kind").get<std::string>());
      if (item.contains("levels")) {
        f.levels = item.at("levels").get<std::vector<std::string>>();
      }
      if (f.kind == FeatureKind::kContinuous) {
        f.min = item.at("min").get<double>();
        f.max = item.at("max").get<double>();
      }
      f.user_modifiable = item.value("user_modifiable", true);
      features.push_back(std::move(f));
    }
    Target target;
    if (doc.contains("target")) {
      const json& t = doc.at("target");
      target.name = t.at("name").get<std::string>();
      target.positive = t.at("positive").get<std::string>();
      target.negative = t.value("negative", std::string{});
    }
    return Schema(std::move(features), std::move(target));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed schema: ") + e.what());
  }
}

Schema Schema::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open schema file " + path.string());
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse,
                "schema file " + path.string() + ": " + e.what());
  }
  return FromJson(doc);
}

json Schema::ToJson() const {
  json features = json::array();
  for (const Feature& f : features_) {
    json item = {{"name", f.name},
                 {"kind", FeatureKindName(f.kind)},
                 {"user_modifiable", f.user_modifiable}};
    if (f.categorical()) {
      item["levels"] = f.levels;
    } else {
      item["min"] = f.min;
      item["max"] = f.max;
    }
    features.push_back(std::move(item));
  }
  json doc = {{"features", std::move(features)}};
  if (!target_.name.empty()) {
    doc["target"] = {{"name", target_.name}, {"positive", target_.positive}};
    if (!target_.negative.empty()) doc["target"]["negative"] = target_.negative;
  }
  return doc;
}

std::size_t Schema::width(std::size_t i) const {
  const Feature& f = features_.at(i);
  return f.kind == FeatureKind::kNominal ? f.levels.size() : 1;
}

std::optional<std::size_t> Schema::IndexOf(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::IndexOrThrow(std::string_view name) const {
  if (auto i = IndexOf(name)) return *i;
  throw Error(ErrorCode::kNotFound,
              "unknown feature '" + std::string(name) + "'");
}

std::string Schema::Fingerprint() const {
  // FNV-1a over the canonical feature list.
  const std::string canonical = ToJson().at("features").dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

Eigen::VectorXd Schema::Encode(const OriginalValues& values) const {
  if (values.size() != features_.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "instance has " + std::to_string(values.size()) +
                    " values, schema has " + std::to_string(features_.size()));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(encoded_width_);
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const Feature& f = features_[i];
    const std::size_t at = offsets_[i];
    if (f.kind == FeatureKind::kContinuous) {
      const double* v = std::get_if<double>(&values[i]);
      if (v == nullptr) {
        throw Error(ErrorCode::kInvalidArgument,
                    "feature '" + f.name + "' expects a number");
      }
      if (!(*v >= f.min && *v <= f.max)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "feature '" + f.name + "' value " + FormatDouble(*v) +
                        " outside [" + FormatDouble(f.min) + ", " +
                        FormatDouble(f.max) + "]");
      }
      out[at] = (*v - f.min) / (f.max - f.min);
      continue;
    }
    const std::string* level = std::get_if<std::string>(&values[i]);
    if (level == nullptr) {
      throw Error(ErrorCode::kInvalidArgument,
                  "feature '" + f.name + "' expects a level label");
    }
    const std::size_t l = LevelIndex(f, *level);
    if (f.kind == FeatureKind::kOrdinal) {
      out[at] = f.levels.size() > 1
                    ? static_cast<double>(l) / static_cast<double>(f.levels.size() - 1)
                    : 0.0;
    } else {
      out[at + l] = 1.0;
    }
  }
  return out;
}

Instance Schema::MakeInstance(OriginalValues values) const {
  Eigen::VectorXd encoded = Encode(values);
  return Instance{std::move(values), std::move(encoded)};
}

std::size_t Schema::OrdinalLevel(const Eigen::Ref<const Eigen::VectorXd>& encoded,
                                 std::size_t feature) const {
  const Feature& f = features_.at(feature);
  const double top = static_cast<double>(f.levels.size() - 1);
  const double scaled = std::nearbyint(encoded[offsets_[feature]] * top);
  if (!(scaled > 0.0)) return 0;  // also catches NaN
  return static_cast<std::size_t>(std::min(scaled, top));
}

std::size_t Schema::NominalLevel(const Eigen::Ref<const Eigen::VectorXd>& encoded,
                                 std::size_t feature) const {
  const std::size_t at = offsets_[feature];
  const std::size_t n = width(feature);
  std::size_t best = 0;
  for (std::size_t l = 1; l < n; ++l) {
    if (encoded[at + l] > encoded[at + best]) best = l;
  }
  return best;
}

OriginalValues Schema::Decode(const Eigen::Ref<const Eigen::VectorXd>& encoded) const {
  if (static_cast<std::size_t>(encoded.size()) != encoded_width_) {
    throw Error(ErrorCode::kInvalidArgument, "encoded vector has wrong width");
  }
  OriginalValues out;
  out.reserve(features_.size());
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const Feature& f = features_[i];
    switch (f.kind) {
      case FeatureKind::kContinuous:
        out.emplace_back(f.min + encoded[offsets_[i]] * (f.max - f.min));
        break;
      case FeatureKind::kOrdinal:
        out.emplace_back(f.levels[OrdinalLevel(encoded, i)]);
        break;
      case FeatureKind::kNominal:
        out.emplace_back(f.levels[NominalLevel(encoded, i)]);
        break;
    }
  }
  return out;
}

OriginalValues Schema::DecodeRelativeTo(
    const Eigen::Ref<const Eigen::VectorXd>& encoded,
    const Instance& reference) const {
  OriginalValues out = Decode(encoded);
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const std::size_t at = offsets_[i];
    const std::size_t n = width(i);
    if (encoded.segment(at, n) == reference.encoded.segment(at, n)) {
      out[i] = reference.original[i];
      continue;
    }
    if (features_[i].kind != FeatureKind::kContinuous) continue;
    // Decoding is monotone but can land one ulp across the reference value;
    // keep the direction of change consistent with the encoded one.
    const double ref = std::get<double>(reference.original[i]);
    const double v = std::get<double>(out[i]);
    const double enc_delta = encoded[at] - reference.encoded[at];
    if ((enc_delta > 0.0 && v < ref) || (enc_delta < 0.0 && v > ref)) {
      out[i] = ref;
    }
  }
  return out;
}

Eigen::VectorXd Schema::Project(const Eigen::Ref<const Eigen::VectorXd>& encoded) const {
  Eigen::VectorXd out = encoded;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const Feature& f = features_[i];
    const std::size_t at = offsets_[i];
    if (f.kind == FeatureKind::kOrdinal) {
      const std::size_t l = OrdinalLevel(encoded, i);
      out[at] = f.levels.size() > 1
                    ? static_cast<double>(l) / static_cast<double>(f.levels.size() - 1)
                    : 0.0;
    } else if (f.kind == FeatureKind::kNominal) {
      const std::size_t l = NominalLevel(encoded, i);
      out.segment(at, width(i)).setZero();
      out[at + l] = 1.0;
    }
  }
  return out;
}

Value Schema::ParseCell(std::size_t feature, std::string_view text) const {
  const Feature& f = features_.at(feature);
  if (f.categorical()) {
    std::string level(text);
    LevelIndex(f, level);  // throws naming the level
    return level;
  }
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw Error(ErrorCode::kParse, "feature '" + f.name + "': '" +
                                       std::string(text) + "' is not a number");
  }
  return v;
}

OriginalValues Schema::ValuesFromJson(const json& object) const {
  if (!object.is_object()) {
    throw Error(ErrorCode::kParse, "instance must be a JSON object");
  }
  for (const auto& [key, _] : object.items()) {
    IndexOrThrow(key);
  }
  OriginalValues out;
  out.reserve(features_.size());
  for (const Feature& f : features_) {
    if (!object.contains(f.name)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "instance is missing feature '" + f.name + "'");
    }
    const json& v = object.at(f.name);
    if (f.categorical()) {
      if (!v.is_string()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "feature '" + f.name + "' expects a level label");
      }
      out.emplace_back(v.get<std::string>());
    } else {
      if (!v.is_number()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "feature '" + f.name + "' expects a number");
      }
      out.emplace_back(v.get<double>());
    }
  }
  return out;
}

json Schema::ValuesToJson(const OriginalValues& values) const {
  json out = json::object();
  for (std::size_t i = 0; i < features_.size() && i < values.size(); ++i) {
    std::visit([&](const auto& v) { out[features_[i].name] = v; }, values[i]);
  }
  return out;
}

}  // namespace cfx
