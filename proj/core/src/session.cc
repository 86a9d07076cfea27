#include "cfx/session.h"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <set>
#include <sstream>

#include "cfx/json_io.h"
#include "cfx/ranks.h"

namespace cfx {
namespace {

using nlohmann::json;

std::string Timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

SessionService::SessionService(ServiceContext context)
    : context_(std::move(context)), id_rng_(context_.id_seed) {
  if (!context_.model) {
    throw Error(ErrorCode::kInvalidArgument, "session service needs a model");
  }
  context_.engine.Validate();
}

std::uint64_t SessionService::GenerationSeed(const std::string& id,
                                             std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return DeriveSeed(h, n);
}

std::string SessionService::CreateSession(const json& instance_ref) {
  const Schema& schema = context_.schema;
  auto session = std::make_shared<Session>();
  if (!instance_ref.is_object()) {
    throw ServiceError(ErrorCode::kInvalidArgument,
                       "instance reference must be a JSON object");
  }
  if (instance_ref.contains("row")) {
    const json& row = instance_ref.at("row");
    if (!row.is_number_integer() || row.get<long long>() < 0 ||
        row.get<std::size_t>() >= context_.instances.size()) {
      throw ServiceError(ErrorCode::kNotFound, "no such instance row",
                         {{"row", row},
                          {"available", context_.instances.size()}});
    }
    const auto r = row.get<std::size_t>();
    session->instance = context_.instances[r];
    session->sample = "row" + std::to_string(r);
  } else if (instance_ref.contains("instance")) {
    try {
      session->instance =
          schema.MakeInstance(schema.ValuesFromJson(instance_ref.at("instance")));
    } catch (const Error& e) {
      throw ServiceError(e.code(), e.what());
    }
    session->sample = CounterfactualId(session->instance.encoded);
  } else {
    throw ServiceError(ErrorCode::kInvalidArgument,
                       "expected {\"row\": n} or {\"instance\": {...}}");
  }

  const Classifier& model = *context_.model;
  if (model.Predict(session->instance.encoded) == context_.engine.desired_class) {
    throw ServiceError(ErrorCode::kNothingToExplain, "nothing to explain",
                       {{"probability", model.Probability(session->instance.encoded)}});
  }

  {
    std::lock_guard lock(id_mu_);
    std::unique_lock map_lock(sessions_mu_);
    std::string id;
    do {
      std::ostringstream os;
      os << "s-" << std::hex << std::setw(16) << std::setfill('0') << id_rng_();
      id = os.str();
    } while (sessions_.count(id) != 0);
    session->id = id;
    sessions_.emplace(id, session);
  }
  return session->id;
}

std::shared_ptr<SessionService::Session> SessionService::Find(
    const std::string& id) const {
  std::shared_lock lock(sessions_mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    throw ServiceError(ErrorCode::kNotFound, "unknown session", {{"id", id}});
  }
  return it->second;
}

std::size_t SessionService::session_count() const {
  std::shared_lock lock(sessions_mu_);
  return sessions_.size();
}

json SessionService::Describe(const Session& s) const {
  const Schema& schema = context_.schema;
  json gamma = json::object();
  for (const Feature& f : schema.features()) {
    const auto it = s.gamma.find(f.name);
    gamma[f.name] = it == s.gamma.end() ? 1.0 : it->second;
  }
  json history = json::array();
  for (const HistoryEntry& h : s.history) {
    history.push_back({{"timestamp", h.timestamp},
                       {"config", h.config.ToJson()},
                       {"valid", h.valid},
                       {"proximity", h.proximity},
                       {"diversity", h.diversity},
                       {"iterations_used", h.iterations_used}});
  }
  json shown = json::array();
  for (std::size_t i = 0; i < s.shown.size(); ++i) {
    const ShownCf& cf = s.shown[i];
    shown.push_back({{"index", i},
                     {"cf_id", cf.cf_id},
                     {"method", ConditionName(cf.method)},
                     {"generation", cf.generation},
                     {"values", schema.ValuesToJson(cf.values)},
                     {"valid", cf.valid},
                     {"changes", FeatureChanges(s.instance.original, cf.values, schema)}});
  }
  const Classifier& model = *context_.model;
  return {{"id", s.id},
          {"sample", s.sample},
          {"instance", schema.ValuesToJson(s.instance.original)},
          {"prediction",
           {{"label", model.Predict(s.instance.encoded)},
            {"probability", model.Probability(s.instance.encoded)}}},
          {"condition", ConditionName(s.condition)},
          {"gamma", gamma},
          {"history", history},
          {"shown", shown},
          {"rankings_submitted", s.rankings}};
}

json SessionService::GetSession(const std::string& id) const {
  const auto s = Find(id);
  std::lock_guard lock(s->mu);
  return Describe(*s);
}

json SessionService::SetGamma(const std::string& id, const json& gamma) {
  const auto s = Find(id);
  if (!gamma.is_object()) {
    throw ServiceError(ErrorCode::kInvalidArgument,
                       "gamma must be an object of feature: value");
  }
  json offenders = json::array();
  std::map<std::string, double> accepted;
  for (const auto& [name, value] : gamma.items()) {
    if (!context_.schema.IndexOf(name)) {
      offenders.push_back({{"feature", name}, {"reason", "unknown feature"}});
    } else if (!value.is_number()) {
      offenders.push_back({{"feature", name}, {"value", value}, {"reason", "not a number"}});
    } else {
      const double v = value.get<double>();
      if (!(v >= kGammaMin && v <= kGammaMax)) {
        offenders.push_back({{"feature", name},
                             {"value", v},
                             {"reason", "outside [1, 5]"}});
      } else {
        accepted[name] = v;
      }
    }
  }
  if (!offenders.empty()) {
    throw ServiceError(ErrorCode::kInvalidArgument, "invalid gamma",
                       {{"offenders", offenders}});
  }
  std::lock_guard lock(s->mu);
  for (const auto& [name, v] : accepted) s->gamma[name] = v;
  return Describe(*s);
}

json SessionService::GenerateCfs(const std::string& id, int k,
                                 Condition condition) {
  const auto s = Find(id);
  if (k < 1) {
    throw ServiceError(ErrorCode::kInvalidArgument, "k must be at least 1",
                       {{"k", k}});
  }
  if (condition != Condition::kC1Unconstrained && !context_.constraints) {
    throw ServiceError(ErrorCode::kInvalidArgument,
                       "no constraint set was loaded; only c1 is available");
  }
  std::lock_guard lock(s->mu);
  EngineConfig config = context_.engine;
  config.k = k;
  config.condition = condition;
  config.seed = GenerationSeed(s->id, s->history.size());

  const Schema& schema = context_.schema;
  const CompiledConstraints constraints =
      context_.constraints ? *context_.constraints : CompiledConstraints::None(schema);
  CFResult result;
  try {
    result = Generate(s->instance, *context_.model, schema, context_.stats,
                      PerturbationWeights::FromMap(s->gamma, schema),
                      constraints, config);
  } catch (const Error& e) {
    throw ServiceError(e.code(), e.what(),
                       {{"condition", ConditionName(condition)}, {"k", k}});
  }

  const std::size_t generation = s->history.size();
  s->condition = condition;
  s->history.push_back({Timestamp(), config, result.valid(), result.proximity,
                        result.diversity, result.iterations_used});
  json cfs = json::array();
  for (const Counterfactual& cf : result.counterfactuals) {
    ShownCf shown{CounterfactualId(cf.encoded), condition, generation,
                  cf.encoded, cf.values, cf.valid};
    cfs.push_back({{"index", s->shown.size()},
                   {"cf_id", shown.cf_id},
                   {"method", ConditionName(condition)},
                   {"values", schema.ValuesToJson(cf.values)},
                   {"valid", cf.valid},
                   {"probability", cf.probability},
                   {"distance", cf.distance},
                   {"changes", FeatureChanges(s->instance.original, cf.values, schema)}});
    s->shown.push_back(std::move(shown));
  }
  json summary = ResultToJson(result, schema);
  return {{"session", s->id},
          {"generation", generation},
          {"condition", ConditionName(condition)},
          {"seed", config.seed},
          {"counterfactuals", cfs},
          {"valid", summary.at("valid")},
          {"proximity", result.proximity},
          {"diversity", result.diversity},
          {"iterations_used", result.iterations_used},
          {"audit_summary", summary.at("audit_summary")}};
}

json SessionService::SubmitRanks(const std::string& id, const json& ranks) {
  const auto s = Find(id);
  std::lock_guard lock(s->mu);
  if (s->shown.empty()) {
    throw ServiceError(ErrorCode::kInvalidArgument,
                       "no counterfactuals have been shown in this round");
  }
  const json* list = &ranks;
  if (ranks.is_object() && ranks.contains("ranks")) list = &ranks.at("ranks");
  if (!list->is_array()) {
    throw ServiceError(ErrorCode::kInvalidArgument,
                       "ranks must be an array aligned with the shown list");
  }
  const std::size_t n = s->shown.size();
  if (list->size() != n) {
    throw ServiceError(ErrorCode::kInvalidArgument,
                       "expected one rank per shown counterfactual",
                       {{"expected", n}, {"received", list->size()}});
  }
  std::vector<RankRow> rows;
  json problems = json::array();
  std::map<int, std::size_t> first_with_rank;
  for (std::size_t i = 0; i < n; ++i) {
    const json& r = (*list)[i];
    if (!r.is_number_integer() || r.get<long long>() < 1 ||
        r.get<long long>() > static_cast<long long>(n)) {
      problems.push_back({{"index", i}, {"rank", r},
                          {"reason", "rank must be an integer in 1.." + std::to_string(n)}});
      continue;
    }
    const int rank = r.get<int>();
    const auto [it, inserted] = first_with_rank.emplace(rank, i);
    if (!inserted && s->shown[it->second].cf_id != s->shown[i].cf_id) {
      problems.push_back({{"index", i},
                          {"rank", rank},
                          {"conflicts_with", it->second},
                          {"reason", "same rank on non-identical counterfactuals"}});
      continue;
    }
    // One ranking per round, so a sample may be ranked repeatedly.
    rows.push_back({s->id, s->sample + "/" + std::to_string(s->rankings),
                    s->shown[i].cf_id,
                    std::string(ConditionName(s->shown[i].method)), rank});
  }
  if (!problems.empty()) {
    throw ServiceError(ErrorCode::kInvalidArgument, "invalid ranking",
                       {{"problems", problems}});
  }
  if (!context_.ranks_path.empty()) {
    std::lock_guard file_lock(ranks_mu_);
    AppendRankCsv(context_.ranks_path, rows);
  }
  ++s->rankings;
  s->shown.clear();
  return {{"accepted", rows.size()},
          {"session", s->id},
          {"rankings_submitted", s->rankings},
          {"persisted", !context_.ranks_path.empty()}};
}

}  // namespace cfx
