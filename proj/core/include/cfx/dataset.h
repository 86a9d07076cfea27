#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "cfx/schema.h"

namespace cfx {

struct LabeledSet {
  std::vector<Instance> rows;
  std::vector<int> labels;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  // One encoded row per instance.
  Eigen::MatrixXd EncodedMatrix() const;
};

// Per-feature spread statistics on the encoded scale, computed from the
// training split only. Indexed by feature; nominal features carry 1.0 since
// their distance does not use a normalizer.
struct DatasetStats {
  std::vector<double> mad;
  std::vector<double> std;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;

  nlohmann::json ToJson(const Schema& schema) const;
  static DatasetStats FromJson(const nlohmann::json& doc, const Schema& schema);
  static DatasetStats Load(const std::filesystem::path& path,
                           const Schema& schema);
};

struct LoadedDataset {
  LabeledSet train;
  LabeledSet test;
  DatasetStats stats;
};

// Header row required; columns are matched by name, extra columns ignored.
// Errors name the data row index (0-based) and the offending column.
LabeledSet ParseCsv(std::istream& in, const Schema& schema);

LoadedDataset SplitDataset(LabeledSet all, const Schema& schema,
                           double split_fraction, std::uint64_t seed);
LoadedDataset LoadDataset(std::istream& csv, const Schema& schema,
                          double split_fraction, std::uint64_t seed);
LoadedDataset LoadDatasetFile(const std::filesystem::path& path,
                              const Schema& schema, double split_fraction,
                              std::uint64_t seed);

DatasetStats ComputeStats(const LabeledSet& train, const Schema& schema);

// Median of |v - median(v)|; even-length medians average the middle pair.
double MedianAbsoluteDeviation(std::vector<double> values);

}  // namespace cfx
