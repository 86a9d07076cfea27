#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfx/classifier.h"
#include "cfx/constraints.h"
#include "cfx/engine.h"
#include "cfx/error.h"
#include "cfx/metrics.h"
#include "cfx/schema.h"

namespace cfx {

// Elicitation range for gamma set through the service.
inline constexpr double kGammaMin = 1.0;
inline constexpr double kGammaMax = 5.0;

// An Error with a structured payload for API clients.
class ServiceError : public Error {
 public:
  ServiceError(ErrorCode code, const std::string& message,
               nlohmann::json details = nlohmann::json::object())
      : Error(code, message), details_(std::move(details)) {}
  const nlohmann::json& details() const { return details_; }

 private:
  nlohmann::json details_;
};

// Shared, read-only state fixed at startup.
struct ServiceContext {
  Schema schema;
  DatasetStats stats;
  std::shared_ptr<const Classifier> model;
  std::optional<CompiledConstraints> constraints;  // needed for c2/c3
  std::vector<Instance> instances;                 // addressable by row
  EngineConfig engine;                             // defaults per request
  std::filesystem::path ranks_path;                // empty: ranks not persisted
  std::uint64_t id_seed = 0;
};

// Interactive explanation sessions. Sessions are isolated from each other;
// operations on one session are serialized, and every mutating call
// validates fully before committing anything.
//
// JSON shapes:
//   create:   {"row": n} | {"instance": {feature: value, ...}}
//   gamma:    {feature: value in [1, 5], ...} (merged into the session)
//   generate: {"k": 5, "condition": "c1" | "c2" | "c3"}
//   ranks:    {"ranks": [r_0, ..., r_{n-1}]} aligned with the shown list
class SessionService {
 public:
  explicit SessionService(ServiceContext context);

  std::string CreateSession(const nlohmann::json& instance_ref);
  nlohmann::json GetSession(const std::string& id) const;
  nlohmann::json SetGamma(const std::string& id, const nlohmann::json& gamma);
  nlohmann::json GenerateCfs(const std::string& id, int k, Condition condition);
  nlohmann::json SubmitRanks(const std::string& id, const nlohmann::json& ranks);

  std::size_t session_count() const;
  const ServiceContext& context() const { return context_; }

  // Seed of a session's n-th generation.
  static std::uint64_t GenerationSeed(const std::string& id, std::size_t n);

 private:
  struct ShownCf {
    std::string cf_id;
    Condition method;
    std::size_t generation;
    Eigen::VectorXd encoded;
    OriginalValues values;
    bool valid;
  };
  struct HistoryEntry {
    std::string timestamp;
    EngineConfig config;
    std::vector<bool> valid;
    double proximity;
    double diversity;
    int iterations_used;
  };
  struct Session {
    std::string id;
    std::string sample;  // instance reference as recorded in rank files
    Instance instance;
    Condition condition = Condition::kC2Global;
    std::map<std::string, double> gamma;
    std::vector<HistoryEntry> history;
    std::vector<ShownCf> shown;
    std::size_t rankings = 0;
    mutable std::mutex mu;
  };

  std::shared_ptr<Session> Find(const std::string& id) const;
  nlohmann::json Describe(const Session& s) const;

  ServiceContext context_;
  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex id_mu_;
  std::mt19937_64 id_rng_;
  std::mutex ranks_mu_;
};

}  // namespace cfx
