#include "cfx/json_io.h"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cfx/error.h"

namespace cfx {
namespace {

using nlohmann::json;

std::vector<double> ToStd(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd FromStd(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string CsvCell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json SummaryToJson(const AuditSummary& s) {
  return {{"audited_steps", s.audited_steps},
          {"masked_entries", s.masked_entries},
          {"binary_sign_conflict", s.sign_conflicts},
          {"binary_downstream_frozen", s.downstream_frozen},
          {"unary_violation", s.unary_violations},
          {"clamped_entries", s.clamped_entries}};
}

}  // namespace

std::string CounterfactualId(const Eigen::VectorXd& encoded) {
  std::uint64_t h = 1469598103934665603ULL;
  for (Eigen::Index i = 0; i < encoded.size(); ++i) {
    double v = encoded[i] == 0.0 ? 0.0 : encoded[i];  // fold -0.0
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  std::ostringstream os;
  os << "cf-" << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json FeatureChanges(const OriginalValues& original, const OriginalValues& cf,
                    const Schema& schema) {
  json out = json::object();
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (original.at(i) == cf.at(i)) continue;
    const Feature& f = schema.feature(i);
    json change;
    std::visit([&](const auto& v) { change["from"] = v; }, original[i]);
    std::visit([&](const auto& v) { change["to"] = v; }, cf[i]);
    if (f.kind == FeatureKind::kContinuous) {
      change["delta"] = std::get<double>(cf[i]) - std::get<double>(original[i]);
    } else if (f.kind == FeatureKind::kOrdinal) {
      auto level = [&](const Value& v) {
        const auto& s = std::get<std::string>(v);
        for (std::size_t l = 0; l < f.levels.size(); ++l) {
          if (f.levels[l] == s) return static_cast<long>(l);
        }
        return 0L;
      };
      change["delta"] = level(cf[i]) - level(original[i]);
    }
    out[f.name] = std::move(change);
  }
  return out;
}

json ResultToJson(const CFResult& result, const Schema& schema) {
  json cfs = json::array();
  json valid = json::array();
  for (const Counterfactual& cf : result.counterfactuals) {
    cfs.push_back({{"id", CounterfactualId(cf.encoded)},
                   {"values", schema.ValuesToJson(cf.values)},
                   {"encoded", ToStd(cf.encoded)},
                   {"valid", cf.valid},
                   {"logit", cf.logit},
                   {"probability", cf.probability},
                   {"distance", cf.distance},
                   {"changes", FeatureChanges(result.original.original,
                                              cf.values, schema)}});
    valid.push_back(cf.valid);
  }
  return {{"original",
           {{"values", schema.ValuesToJson(result.original.original)},
            {"encoded", ToStd(result.original.encoded)}}},
          {"condition", ConditionName(result.condition)},
          {"desired_class", result.desired_class},
          {"seed", result.seed},
          {"counterfactuals", std::move(cfs)},
          {"valid", std::move(valid)},
          {"proximity", result.proximity},
          {"diversity", result.diversity},
          {"iterations_used", result.iterations_used},
          {"converged", result.converged},
          {"final_objective", result.objective_trace.empty()
                                  ? json(nullptr)
                                  : json(result.objective_trace.back())},
          {"audit_summary", SummaryToJson(result.audit_summary)}};
}

CFResult ResultFromJson(const json& doc, const Schema& schema) {
  CFResult r;
  try {
    const json& original = doc.at("original");
    r.original.original = schema.ValuesFromJson(original.at("values"));
    r.original.encoded = FromStd(original.at("encoded").get<std::vector<double>>());
    r.condition = ParseCondition(doc.at("condition").get<std::string>());
    r.desired_class = doc.value("desired_class", 1);
    r.seed = doc.value("seed", std::uint64_t{0});
    for (const json& item : doc.at("counterfactuals")) {
      Counterfactual cf;
      cf.values = schema.ValuesFromJson(item.at("values"));
      cf.encoded = FromStd(item.at("encoded").get<std::vector<double>>());
      cf.valid = item.at("valid").get<bool>();
      cf.logit = item.value("logit", 0.0);
      cf.probability = item.value("probability", 0.0);
      cf.distance = item.value("distance", 0.0);
      if (static_cast<std::size_t>(cf.encoded.size()) != schema.encoded_width()) {
        throw Error(ErrorCode::kSchemaMismatch,
                    "result does not match the schema encoding");
      }
      r.counterfactuals.push_back(std::move(cf));
    }
    r.proximity = doc.at("proximity").get<double>();
    r.diversity = doc.at("diversity").get<double>();
    r.iterations_used = doc.value("iterations_used", 0);
    r.converged = doc.value("converged", false);
    if (doc.contains("audit_summary")) {
      const json& s = doc.at("audit_summary");
      r.audit_summary.audited_steps = s.value("audited_steps", std::size_t{0});
      r.audit_summary.masked_entries = s.value("masked_entries", std::size_t{0});
      r.audit_summary.sign_conflicts = s.value("binary_sign_conflict", std::size_t{0});
      r.audit_summary.downstream_frozen =
          s.value("binary_downstream_frozen", std::size_t{0});
      r.audit_summary.unary_violations = s.value("unary_violation", std::size_t{0});
      r.audit_summary.clamped_entries = s.value("clamped_entries", std::size_t{0});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed result: ") + e.what());
  }
  return r;
}

void WriteResultCsv(const CFResult& result, const Schema& schema,
                    std::ostream& out) {
  out << "row,valid,probability,distance";
  for (const Feature& f : schema.features()) out << ',' << CsvCell(f.name);
  out << '\n';
  auto write_values = [&](const OriginalValues& values) {
    for (const Value& v : values) out << ',' << CsvCell(ValueToString(v));
    out << '\n';
  };
  out << "original,,,";
  write_values(result.original.original);
  for (std::size_t k = 0; k < result.counterfactuals.size(); ++k) {
    const Counterfactual& cf = result.counterfactuals[k];
    out << "cf" << k << ',' << (cf.valid ? "true" : "false") << ','
        << cf.probability << ',' << cf.distance;
    write_values(cf.values);
  }
}

json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

json ParseJsonArgument(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && (text[first] == '{' || text[first] == '[')) {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, std::string("inline JSON: ") + e.what());
    }
  }
  return ReadJsonFile(std::filesystem::path(std::string(text)));
}

}  // namespace cfx
