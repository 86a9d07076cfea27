#include "cfx/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>

#include "cfx/error.h"

namespace cfx {
namespace {

using nlohmann::json;

std::string Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// Comma separated; double quotes are honoured for label text only.
std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(Trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.push_back(Trim(cur));
  return cells;
}

double Median(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace

Eigen::MatrixXd LabeledSet::EncodedMatrix() const {
  if (rows.empty()) return {};
  Eigen::MatrixXd m(rows.size(), rows.front().encoded.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    m.row(r) = rows[r].encoded.transpose();
  }
  return m;
}

double MedianAbsoluteDeviation(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const double med = Median(values);
  for (double& v : values) v = std::abs(v - med);
  return Median(values);
}

LabeledSet ParseCsv(std::istream& in, const Schema& schema) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kParse, "CSV is empty; a header row is required");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    line.erase(0, 3);
  }
  const std::vector<std::string> header = SplitCsvLine(line);
  auto column_of = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return c;
    }
    return std::nullopt;
  };

  std::vector<std::size_t> columns;
  for (const Feature& f : schema.features()) {
    auto c = column_of(f.name);
    if (!c) {
      throw Error(ErrorCode::kParse,
                  "CSV header lacks column '" + f.name + "'");
    }
    columns.push_back(*c);
  }
  const Target& target = schema.target();
  if (target.name.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "schema declares no target column");
  }
  const auto target_col = column_of(target.name);
  if (!target_col) {
    throw Error(ErrorCode::kParse,
                "CSV header lacks target column '" + target.name + "'");
  }

  LabeledSet out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    const std::vector<std::string> cells = SplitCsvLine(line);
    const std::string where = "row " + std::to_string(row);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kParse,
                  where + ": expected " + std::to_string(header.size()) +
                      " columns, found " + std::to_string(cells.size()));
    }
    OriginalValues values;
    values.reserve(schema.size());
    for (std::size_t i = 0; i < schema.size(); ++i) {
      try {
        values.push_back(schema.ParseCell(i, cells[columns[i]]));
      } catch (const Error& e) {
        throw Error(e.code(), where + " column '" + schema.feature(i).name +
                                  "': " + e.what());
      }
    }
    const std::string& label_text = cells[*target_col];
    int label = 0;
    if (label_text == target.positive) {
      label = 1;
    } else if (!target.negative.empty() && label_text != target.negative) {
      throw Error(ErrorCode::kParse, where + " column '" + target.name +
                                         "': unknown label '" + label_text +
                                         "'");
    }
    try {
      out.rows.push_back(schema.MakeInstance(std::move(values)));
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
    out.labels.push_back(label);
    ++row;
  }
  return out;
}

LoadedDataset SplitDataset(LabeledSet all, const Schema& schema,
                           double split_fraction, std::uint64_t seed) {
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "split fraction must lie strictly between 0 and 1");
  }
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(split_fraction * static_cast<double>(all.size())));

  LoadedDataset out;
  for (std::size_t r = 0; r < order.size(); ++r) {
    LabeledSet& dst = r < n_train ? out.train : out.test;
    dst.rows.push_back(std::move(all.rows[order[r]]));
    dst.labels.push_back(all.labels[order[r]]);
  }
  out.stats = ComputeStats(out.train, schema);
  out.stats.test_rows = out.test.size();
  return out;
}

LoadedDataset LoadDataset(std::istream& csv, const Schema& schema,
                          double split_fraction, std::uint64_t seed) {
  return SplitDataset(ParseCsv(csv, schema), schema, split_fraction, seed);
}

LoadedDataset LoadDatasetFile(const std::filesystem::path& path,
                              const Schema& schema, double split_fraction,
                              std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return LoadDataset(in, schema, split_fraction, seed);
}

DatasetStats ComputeStats(const LabeledSet& train, const Schema& schema) {
  DatasetStats stats;
  stats.train_rows = train.size();
  stats.mad.assign(schema.size(), 1.0);
  stats.std.assign(schema.size(), 1.0);
  if (train.empty()) return stats;

  std::vector<double> column(train.size());
  for (std::size_t i : schema.directed_features()) {
    const std::size_t at = schema.offset(i);
    double sum = 0.0;
    for (std::size_t r = 0; r < train.size(); ++r) {
      column[r] = train.rows[r].encoded[at];
      sum += column[r];
    }
    const double mean = sum / static_cast<double>(train.size());
    double sq = 0.0;
    for (double v : column) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / static_cast<double>(train.size()));
    const double mad = MedianAbsoluteDeviation(column);

    stats.std[i] = sd > 0.0 ? sd : 1.0;
    // Zero MAD falls back to std, then to 1.
    stats.mad[i] = mad > 0.0 ? mad : stats.std[i];
  }
  return stats;
}

json DatasetStats::ToJson(const Schema& schema) const {
  json features = json::object();
  for (std::size_t i = 0; i < schema.size(); ++i) {
    features[schema.feature(i).name] = {{"mad", mad.at(i)}, {"std", std.at(i)}};
  }
  return {{"features", features},
          {"train_rows", train_rows},
          {"test_rows", test_rows}};
}

DatasetStats DatasetStats::FromJson(const json& doc, const Schema& schema) {
  DatasetStats stats;
  stats.mad.assign(schema.size(), 1.0);
  stats.std.assign(schema.size(), 1.0);
  try {
    const json& features = doc.at("features");
    for (std::size_t i = 0; i < schema.size(); ++i) {
      const std::string& name = schema.feature(i).name;
      if (!features.contains(name)) {
        throw Error(ErrorCode::kParse, "stats lack feature '" + name + "'");
      }
      stats.mad[i] = features.at(name).at("mad").get<double>();
      stats.std[i] = features.at(name).at("std").get<double>();
      if (!(stats.mad[i] > 0.0) || !(stats.std[i] > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "stats for '" + name + "' must be strictly positive");
      }
    }
    stats.train_rows = doc.value("train_rows", std::size_t{0});
    stats.test_rows = doc.value("test_rows", std::size_t{0});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed stats: ") + e.what());
  }
  return stats;
}

DatasetStats DatasetStats::Load(const std::filesystem::path& path,
                                const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return FromJson(doc, schema);
}

}  // namespace cfx
