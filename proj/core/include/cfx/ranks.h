#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cfx {

// One ranked counterfactual. Rows sharing (user, sample) form one ranking;
// rows with equal cf_id within a ranking are identical counterfactuals and
// are the only rows allowed to share a rank.
struct RankRow {
  std::string user;
  std::string sample;
  std::string cf_id;
  std::string method;
  int rank = 0;
};

inline constexpr const char* kRankCsvHeader = "user,sample,cf_id,method,rank";

// Parses and validates a rank CSV (header required). Errors name the
// offending data row (0-based).
std::vector<RankRow> ParseRankCsv(std::istream& in);
std::vector<RankRow> LoadRankCsv(const std::filesystem::path& path);

// Throws unless, within every (user, sample), ranks lie in 1..n and equal
// ranks only occur on rows with equal cf_id.
void ValidateRanks(const std::vector<RankRow>& rows);

void WriteRankRows(std::ostream& out, const std::vector<RankRow>& rows);
// Appends, writing the header first when the file is new or empty.
void AppendRankCsv(const std::filesystem::path& path,
                   const std::vector<RankRow>& rows);

// Percentage of top-k rank positions occupied by each method. Position r is
// credited to every method with a row ranked r, so identical counterfactuals
// from different methods credit both and a column may sum past 100. Ratios
// are averaged over a user's rankings, then over users.
struct TopKTable {
  std::vector<int> ks;
  std::vector<std::string> methods;          // first-appearance order
  std::vector<std::vector<double>> percent;  // [method][k index]
  std::size_t users = 0;

  double at(const std::string& method, int k) const;
  nlohmann::json ToJson() const;
  void PrintTable(std::ostream& out) const;
};

TopKTable SummarizeRanks(const std::vector<RankRow>& rows,
                         const std::vector<int>& ks = {1, 2, 3});

}  // namespace cfx
