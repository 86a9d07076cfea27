#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "cfx/engine.h"
#include "cfx/schema.h"

namespace cfx {

// Content identifier of a counterfactual: equal for identical encodings.
std::string CounterfactualId(const Eigen::VectorXd& encoded);

// Per-feature changes of `cf` against `original`, changed features only:
// {feature: {from, to, delta?}} with delta for continuous (original units)
// and ordinal (level steps) features.
nlohmann::json FeatureChanges(const OriginalValues& original,
                              const OriginalValues& cf, const Schema& schema);

// {original, counterfactuals[], valid[], proximity, diversity,
//  iterations_used, audit_summary, ...}. Encoded vectors are included so a
// result can be re-evaluated later.
nlohmann::json ResultToJson(const CFResult& result, const Schema& schema);
// Inverse of ResultToJson up to the trace and per-step audits, which are
// exported only in summary form.
CFResult ResultFromJson(const nlohmann::json& doc, const Schema& schema);

// One row per counterfactual, original first.
void WriteResultCsv(const CFResult& result, const Schema& schema,
                    std::ostream& out);

nlohmann::json ReadJsonFile(const std::filesystem::path& path);
// Inline JSON when `text` starts with '{' or '[', otherwise a file path.
nlohmann::json ParseJsonArgument(std::string_view text);

}  // namespace cfx
