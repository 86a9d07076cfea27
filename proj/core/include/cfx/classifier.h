#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "cfx/dataset.h"
#include "cfx/schema.h"

namespace cfx {

struct TrainingConfig {
  int epochs = 20;
  double learning_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 32;

  nlohmann::json ToJson() const;
  static TrainingConfig FromJson(const nlohmann::json& doc);
};

double Sigmoid(double z);

// A differentiable binary classifier as seen by the counterfactual engine:
// only the unscaled output and its input gradient are consumed.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::size_t input_width() const = 0;
  virtual double Logit(const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;
  // d logit / d x.
  virtual Eigen::VectorXd InputGradient(
      const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;

  double Probability(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return Sigmoid(Logit(x));
  }
  // 1 iff probability >= 0.5.
  int Predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return Probability(x) >= 0.5 ? 1 : 0;
  }
};

// Affine map followed by a sigmoid.
class LinearModel final : public Classifier {
 public:
  LinearModel() = default;
  LinearModel(Eigen::VectorXd weights, double bias, TrainingConfig config = {},
              std::string schema_fingerprint = {});

  std::size_t input_width() const override { return weights_.size(); }
  double Logit(const Eigen::Ref<const Eigen::VectorXd>& x) const override;
  Eigen::VectorXd InputGradient(
      const Eigen::Ref<const Eigen::VectorXd>& x) const override;

  const Eigen::VectorXd& weights() const { return weights_; }
  double bias() const { return bias_; }
  const TrainingConfig& training_config() const { return config_; }
  const std::string& schema_fingerprint() const { return fingerprint_; }

  nlohmann::json ToJson() const;
  // Refuses documents whose fingerprint differs from the schema's.
  static LinearModel FromJson(const nlohmann::json& doc, const Schema& schema);
  void Save(const std::filesystem::path& path) const;
  static LinearModel Load(const std::filesystem::path& path,
                          const Schema& schema);

 private:
  void CheckWidth(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  Eigen::VectorXd weights_;
  double bias_ = 0.0;
  TrainingConfig config_;
  std::string fingerprint_;
};

// Mini-batch Adam on binary cross-entropy. Weights start uniform in
// [-0.01, 0.01], bias at 0; batches follow a per-epoch shuffle drawn from
// the same seeded generator, so equal seeds give bitwise-equal models.
LinearModel TrainLinearModel(const LabeledSet& train,
                             const TrainingConfig& config, std::uint64_t seed,
                             std::string schema_fingerprint = {});

double Accuracy(const Classifier& model, const LabeledSet& data);
// Mean binary cross-entropy.
double CrossEntropy(const Classifier& model, const LabeledSet& data);

}  // namespace cfx
