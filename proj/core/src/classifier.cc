#include "cfx/classifier.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "cfx/error.h"

namespace cfx {

using nlohmann::json;

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

json TrainingConfig::ToJson() const {
  return {{"epochs", epochs},
          {"learning_rate", learning_rate},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"adam_epsilon", adam_epsilon},
          {"batch_size", batch_size}};
}

TrainingConfig TrainingConfig::FromJson(const json& doc) {
  TrainingConfig c;
  c.epochs = doc.value("epochs", c.epochs);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.adam_beta1 = doc.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = doc.value("adam_beta2", c.adam_beta2);
  c.adam_epsilon = doc.value("adam_epsilon", c.adam_epsilon);
  c.batch_size = doc.value("batch_size", c.batch_size);
  return c;
}

LinearModel::LinearModel(Eigen::VectorXd weights, double bias,
                         TrainingConfig config, std::string schema_fingerprint)
    : weights_(std::move(weights)),
      bias_(bias),
      config_(config),
      fingerprint_(std::move(schema_fingerprint)) {}

void LinearModel::CheckWidth(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != weights_.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "input width " + std::to_string(x.size()) +
                    " does not match model width " +
                    std::to_string(weights_.size()));
  }
}

double LinearModel::Logit(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  CheckWidth(x);
  return weights_.dot(x) + bias_;
}

Eigen::VectorXd LinearModel::InputGradient(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  CheckWidth(x);
  return weights_;
}

json LinearModel::ToJson() const {
  return {{"weights", std::vector<double>(weights_.data(),
                                          weights_.data() + weights_.size())},
          {"bias", bias_},
          {"schema_fingerprint", fingerprint_},
          {"training_config", config_.ToJson()}};
}

LinearModel LinearModel::FromJson(const json& doc, const Schema& schema) {
  try {
    const auto fp = doc.at("schema_fingerprint").get<std::string>();
    if (fp != schema.Fingerprint()) {
      throw Error(ErrorCode::kSchemaMismatch,
                  "model was trained against schema " + fp +
                      ", not " + schema.Fingerprint());
    }
    const auto w = doc.at("weights").get<std::vector<double>>();
    if (w.size() != schema.encoded_width()) {
      throw Error(ErrorCode::kSchemaMismatch,
                  "model width does not match schema encoding");
    }
    TrainingConfig config;
    if (doc.contains("training_config")) {
      config = TrainingConfig::FromJson(doc.at("training_config"));
    }
    return LinearModel(Eigen::Map<const Eigen::VectorXd>(w.data(), w.size()),
                       doc.at("bias").get<double>(), config, fp);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed model: ") + e.what());
  }
}

void LinearModel::Save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << ToJson().dump(2) << '\n';
}

LinearModel LinearModel::Load(const std::filesystem::path& path,
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

LinearModel TrainLinearModel(const LabeledSet& train,
                             const TrainingConfig& config, std::uint64_t seed,
                             std::string schema_fingerprint) {
  if (train.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "training set is empty");
  }
  const auto positives = std::count(train.labels.begin(), train.labels.end(), 1);
  if (positives == 0 || positives == static_cast<long>(train.size())) {
    throw Error(ErrorCode::kDegenerateLabels, "degenerate labels");
  }
  if (config.epochs < 0 || config.batch_size <= 0 ||
      !(config.learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid training config");
  }

  const Eigen::Index width = train.rows.front().encoded.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(-0.01, 0.01);
  Eigen::VectorXd w(width);
  for (Eigen::Index j = 0; j < width; ++j) w[j] = init(rng);
  double b = 0.0;

  Eigen::VectorXd m_w = Eigen::VectorXd::Zero(width);
  Eigen::VectorXd v_w = Eigen::VectorXd::Zero(width);
  double m_b = 0.0;
  double v_b = 0.0;
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);
  Eigen::VectorXd g_w(width);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      g_w.setZero();
      double g_b = 0.0;
      for (std::size_t r = start; r < end; ++r) {
        const Instance& row = train.rows[order[r]];
        const double err =
            Sigmoid(w.dot(row.encoded) + b) - train.labels[order[r]];
        g_w += err * row.encoded;
        g_b += err;
      }
      const double n = static_cast<double>(end - start);
      g_w /= n;
      g_b /= n;

      beta1_t *= config.adam_beta1;
      beta2_t *= config.adam_beta2;
      m_w = config.adam_beta1 * m_w + (1.0 - config.adam_beta1) * g_w;
      v_w = config.adam_beta2 * v_w +
            (1.0 - config.adam_beta2) * g_w.cwiseProduct(g_w);
      m_b = config.adam_beta1 * m_b + (1.0 - config.adam_beta1) * g_b;
      v_b = config.adam_beta2 * v_b + (1.0 - config.adam_beta2) * g_b * g_b;
      const double step_scale = config.learning_rate / (1.0 - beta1_t);
      const double bias_corr2 = 1.0 - beta2_t;
      for (Eigen::Index j = 0; j < width; ++j) {
        w[j] -= step_scale * m_w[j] /
                (std::sqrt(v_w[j] / bias_corr2) + config.adam_epsilon);
      }
      b -= step_scale * m_b / (std::sqrt(v_b / bias_corr2) + config.adam_epsilon);
    }
  }
  return LinearModel(std::move(w), b, config, std::move(schema_fingerprint));
}

double Accuracy(const Classifier& model, const LabeledSet& data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    hits += model.Predict(data.rows[r].encoded) == data.labels[r] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double CrossEntropy(const Classifier& model, const LabeledSet& data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const double z = model.Logit(data.rows[r].encoded);
    // log(1 + e^z) - y z, written to avoid overflow.
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z))
                                     : std::log1p(std::exp(z));
    total += softplus - data.labels[r] * z;
  }
  return total / static_cast<double>(data.size());
}

}  // namespace cfx
