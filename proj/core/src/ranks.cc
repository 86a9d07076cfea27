#include "cfx/ranks.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "cfx/error.h"

namespace cfx {
namespace {

std::vector<std::string> SplitPlain(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

using RankingKey = std::pair<std::string, std::string>;

std::map<RankingKey, std::vector<const RankRow*>> GroupRankings(
    const std::vector<RankRow>& rows) {
  std::map<RankingKey, std::vector<const RankRow*>> out;
  for (const RankRow& r : rows) out[{r.user, r.sample}].push_back(&r);
  return out;
}

}  // namespace

std::vector<RankRow> ParseRankCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kParse, "rank CSV is empty");
  }
  const std::vector<std::string> header = SplitPlain(line);
  const std::vector<std::string> expected = {"user", "sample", "cf_id",
                                             "method", "rank"};
  if (header != expected) {
    throw Error(ErrorCode::kParse,
                std::string("rank CSV header must be '") + kRankCsvHeader + "'");
  }
  std::vector<RankRow> rows;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = SplitPlain(line);
    const std::string where = "rank CSV row " + std::to_string(index);
    if (cells.size() != 5) {
      throw Error(ErrorCode::kParse, where + ": expected 5 columns");
    }
    RankRow r{cells[0], cells[1], cells[2], cells[3], 0};
    const std::string& rank = cells[4];
    auto [ptr, ec] = std::from_chars(rank.data(), rank.data() + rank.size(), r.rank);
    if (ec != std::errc() || ptr != rank.data() + rank.size() || r.rank < 1) {
      throw Error(ErrorCode::kParse,
                  where + ": rank '" + rank + "' is not a positive integer");
    }
    if (r.user.empty() || r.sample.empty() || r.cf_id.empty() || r.method.empty()) {
      throw Error(ErrorCode::kParse, where + ": empty field");
    }
    rows.push_back(std::move(r));
    ++index;
  }
  ValidateRanks(rows);
  return rows;
}

std::vector<RankRow> LoadRankCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return ParseRankCsv(in);
}

void ValidateRanks(const std::vector<RankRow>& rows) {
  for (const auto& [key, group] : GroupRankings(rows)) {
    const std::string where = "user '" + key.first + "' sample '" + key.second + "'";
    const auto n = static_cast<int>(group.size());
    std::map<int, std::string> owner;
    for (const RankRow* r : group) {
      if (r->rank < 1 || r->rank > n) {
        throw Error(ErrorCode::kInvalidArgument,
                    where + ": rank " + std::to_string(r->rank) +
                        " outside 1.." + std::to_string(n));
      }
      auto [it, inserted] = owner.emplace(r->rank, r->cf_id);
      if (!inserted && it->second != r->cf_id) {
        throw Error(ErrorCode::kInvalidArgument,
                    where + ": rank " + std::to_string(r->rank) +
                        " assigned to non-identical counterfactuals '" +
                        it->second + "' and '" + r->cf_id + "'");
      }
    }
  }
}

void WriteRankRows(std::ostream& out, const std::vector<RankRow>& rows) {
  for (const RankRow& r : rows) {
    out << r.user << ',' << r.sample << ',' << r.cf_id << ',' << r.method << ','
        << r.rank << '\n';
  }
}

void AppendRankCsv(const std::filesystem::path& path,
                   const std::vector<RankRow>& rows) {
  std::error_code ec;
  const bool fresh =
      !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  if (fresh) out << kRankCsvHeader << '\n';
  WriteRankRows(out, rows);
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

double TopKTable::at(const std::string& method, int k) const {
  const auto m = std::find(methods.begin(), methods.end(), method);
  const auto kk = std::find(ks.begin(), ks.end(), k);
  if (m == methods.end() || kk == ks.end()) {
    throw Error(ErrorCode::kNotFound, "no entry for " + method + " at k=" +
                                          std::to_string(k));
  }
  return percent[m - methods.begin()][kk - ks.begin()];
}

nlohmann::json TopKTable::ToJson() const {
  nlohmann::json rows = nlohmann::json::object();
  for (std::size_t m = 0; m < methods.size(); ++m) {
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t k = 0; k < ks.size(); ++k) {
      row["top" + std::to_string(ks[k])] = percent[m][k];
    }
    rows[methods[m]] = row;
  }
  return {{"users", users}, {"ks", ks}, {"methods", rows}};
}

void TopKTable::PrintTable(std::ostream& out) const {
  const auto flags = out.flags();
  out << std::left << std::setw(14) << "method";
  for (int k : ks) out << std::right << std::setw(9) << ("Top-" + std::to_string(k));
  out << '\n';
  out << std::fixed << std::setprecision(1);
  for (std::size_t m = 0; m < methods.size(); ++m) {
    out << std::left << std::setw(14) << methods[m];
    for (double v : percent[m]) out << std::right << std::setw(9) << v;
    out << '\n';
  }
  out << "(averaged over " << users << " users)\n";
  out.flags(flags);
}

TopKTable SummarizeRanks(const std::vector<RankRow>& rows,
                         const std::vector<int>& ks) {
  ValidateRanks(rows);
  TopKTable table;
  table.ks = ks;
  for (const RankRow& r : rows) {
    if (std::find(table.methods.begin(), table.methods.end(), r.method) ==
        table.methods.end()) {
      table.methods.push_back(r.method);
    }
  }
  const std::size_t n_methods = table.methods.size();
  auto method_index = [&](const std::string& m) {
    return static_cast<std::size_t>(
        std::find(table.methods.begin(), table.methods.end(), m) -
        table.methods.begin());
  };

  // user -> (sum over rankings of per-ranking percent, ranking count)
  std::map<std::string, std::pair<std::vector<std::vector<double>>, int>> per_user;
  for (const auto& [key, group] : GroupRankings(rows)) {
    auto& [sums, count] = per_user[key.first];
    if (sums.empty()) sums.assign(n_methods, std::vector<double>(ks.size(), 0.0));
    ++count;
    std::vector<std::set<int>> ranks_of(n_methods);
    for (const RankRow* r : group) ranks_of[method_index(r->method)].insert(r->rank);
    for (std::size_t m = 0; m < n_methods; ++m) {
      for (std::size_t k = 0; k < ks.size(); ++k) {
        const auto credited = std::count_if(
            ranks_of[m].begin(), ranks_of[m].end(),
            [&](int rank) { return rank <= ks[k]; });
        sums[m][k] += 100.0 * static_cast<double>(credited) / ks[k];
      }
    }
  }

  table.users = per_user.size();
  table.percent.assign(n_methods, std::vector<double>(ks.size(), 0.0));
  for (const auto& [user, entry] : per_user) {
    const auto& [sums, count] = entry;
    for (std::size_t m = 0; m < n_methods; ++m) {
      for (std::size_t k = 0; k < ks.size(); ++k) {
        table.percent[m][k] += sums[m][k] / count;
      }
    }
  }
  if (table.users > 0) {
    for (auto& row : table.percent) {
      for (double& v : row) v /= static_cast<double>(table.users);
    }
  }
  return table;
}

}  // namespace cfx
