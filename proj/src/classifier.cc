//
// Copyright 2026 The Attackscope Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "attackscope/classifier.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "attackscope/error.h"
#include "attackscope/rng.h"
#include "json_util.h"

namespace attackscope {

namespace {

using internal::json;

Matrix Activate(Nonlinearity act, const Matrix& pre) {
  if (act == Nonlinearity::kTanh) return pre.array().tanh().matrix();
  return pre.array().max(-1.0).min(1.0).matrix();
}

// Derivative of the activation given pre-activation and activation values.
Matrix ActivationSlope(Nonlinearity act, const Matrix& pre, const Matrix& out) {
  if (act == Nonlinearity::kTanh) return (1.0 - out.array().square()).matrix();
  return (pre.array().abs() < 1.0).cast<double>().matrix();
}

// Column-wise softmax with the max subtracted for stability.
Matrix Softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double top = logits.col(c).maxCoeff();
    out.col(c) = (logits.col(c).array() - top).exp().matrix();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

}  // namespace

std::string_view NonlinearityName(Nonlinearity act) {
  return act == Nonlinearity::kTanh ? "tanh" : "clipped_linear";
}

Nonlinearity ParseNonlinearity(std::string_view name) {
  if (name == "tanh") return Nonlinearity::kTanh;
  if (name == "clipped_linear") return Nonlinearity::kClippedLinear;
  throw Error(ErrorCode::kConfig, "unknown nonlinearity '" + std::string(name) + "'");
}

void ClassifierModel::Validate() const {
  const auto d_h = encoder_weights.cols();
  const auto c = head_weights.cols();
  if (encoder_bias.size() != d_h || head_weights.rows() != d_h || head_bias.size() != c) {
    throw Error(ErrorCode::kContractViolation, "model '" + model_id + "' has inconsistent shapes");
  }
  if (c < 2) throw Error(ErrorCode::kContractViolation, "model '" + model_id + "' needs C >= 2");
  if (!encoder_weights.allFinite() || !encoder_bias.allFinite() || !head_weights.allFinite() ||
      !head_bias.allFinite()) {
    throw Error(ErrorCode::kContractViolation, "model '" + model_id + "' has non-finite weights");
  }
}

Vector EncodeEmbedding(const ClassifierModel& model, const Vector& sentence) {
  if (sentence.size() != model.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "sentence embedding does not match model input");
  }
  const Vector pre = model.encoder_weights.transpose() * sentence + model.encoder_bias;
  return Activate(model.nonlinearity, pre);
}

Vector Encode(const ClassifierModel& model, const TokenSeq& seq, const EmbeddingTable& emb) {
  return EncodeEmbedding(model, SentenceEmbed(seq, emb));
}

Vector ProbaFromHidden(const ClassifierModel& model, const Vector& hidden) {
  const Vector logits = model.head_weights.transpose() * hidden + model.head_bias;
  return Softmax(logits);
}

Vector PredictProba(const ClassifierModel& model, const TokenSeq& seq, const EmbeddingTable& emb) {
  return ProbaFromHidden(model, Encode(model, seq, emb));
}

int ArgMax(const Vector& values) {
  int best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = static_cast<int>(i);
  }
  return best;
}

int Predict(const ClassifierModel& model, const TokenSeq& seq, const EmbeddingTable& emb) {
  return ArgMax(PredictProba(model, seq, emb));
}

double Confidence(const ClassifierModel& model, const TokenSeq& seq, const EmbeddingTable& emb) {
  return PredictProba(model, seq, emb).maxCoeff();
}

ClassifierModel InitClassifier(const ModelArch& arch, int input_dim, std::uint64_t seed) {
  if (arch.hidden_dim < 1 || arch.num_classes < 2 || input_dim < 1) {
    throw Error(ErrorCode::kConfig, "invalid architecture for '" + arch.model_id + "'");
  }
  Rng rng(DeriveSeed(seed, {"classifier-init", arch.model_id}));
  auto fill = [&rng](Matrix& m) {
    const double scale = std::sqrt(2.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = scale * StandardNormal(rng);
    }
  };
  ClassifierModel model;
  model.model_id = arch.model_id;
  model.nonlinearity = arch.nonlinearity;
  model.encoder_weights = Matrix(input_dim, arch.hidden_dim);
  model.head_weights = Matrix(arch.hidden_dim, arch.num_classes);
  fill(model.encoder_weights);
  fill(model.head_weights);
  model.encoder_bias = Vector::Zero(arch.hidden_dim);
  model.head_bias = Vector::Zero(arch.num_classes);
  return model;
}

ClassifierGradient ClassifierLossAndGradient(const ClassifierModel& model, const Matrix& inputs,
                                             const std::vector<int>& labels) {
  const auto n = inputs.cols();
  if (n == 0 || static_cast<std::size_t>(n) != labels.size()) {
    throw Error(ErrorCode::kContractViolation, "inputs and labels must be non-empty and aligned");
  }
  const Matrix pre = (model.encoder_weights.transpose() * inputs).colwise() + model.encoder_bias;
  const Matrix hidden = Activate(model.nonlinearity, pre);
  const Matrix logits = (model.head_weights.transpose() * hidden).colwise() + model.head_bias;
  const Matrix probs = Softmax(logits);

  ClassifierGradient grad;
  Matrix dlogits = probs;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    const double top = logits.col(i).maxCoeff();
    const double log_z = top + std::log((logits.col(i).array() - top).exp().sum());
    loss += log_z - logits(y, i);
    dlogits(y, i) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  grad.loss = loss * inv_n;
  dlogits *= inv_n;

  grad.head_weights = hidden * dlogits.transpose();
  grad.head_bias = dlogits.rowwise().sum();
  const Matrix dpre = (model.head_weights * dlogits).cwiseProduct(
      ActivationSlope(model.nonlinearity, pre, hidden));
  grad.encoder_weights = inputs * dpre.transpose();
  grad.encoder_bias = dpre.rowwise().sum();
  return grad;
}

TrainResult TrainClassifier(const ClassifierModel& init, const Matrix& inputs,
                            const std::vector<int>& labels, const TrainConfig& cfg) {
  if (inputs.cols() == 0) throw Error(ErrorCode::kDegenerateInput, "empty training set");
  if (cfg.epochs < 1 || cfg.learning_rate < 0.0 || cfg.batch_size < 1) {
    throw Error(ErrorCode::kConfig, "invalid training config");
  }
  for (int y : labels) {
    if (y < 0 || y >= init.num_classes()) throw Error(ErrorCode::kContractViolation, "label out of range");
  }
  TrainResult result;
  result.model = init;
  ClassifierModel& model = result.model;
  const auto n = static_cast<std::size_t>(inputs.cols());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(DeriveSeed(cfg.seed, {"classifier-batches", init.model_id}));

  auto full_loss = [&](int epoch) {
    const double loss = ClassifierLossAndGradient(model, inputs, labels).loss;
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::kDivergence,
                  "model '" + model.model_id + "' loss is non-finite at epoch " + std::to_string(epoch));
    }
    return loss;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    result.loss_history.push_back(full_loss(epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[UniformIndex(rng, i)]);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      Matrix batch(inputs.rows(), static_cast<Eigen::Index>(end - start));
      std::vector<int> batch_labels;
      for (std::size_t j = start; j < end; ++j) {
        batch.col(static_cast<Eigen::Index>(j - start)) = inputs.col(static_cast<Eigen::Index>(order[j]));
        batch_labels.push_back(labels[order[j]]);
      }
      const ClassifierGradient g = ClassifierLossAndGradient(model, batch, batch_labels);
      const double lr = cfg.learning_rate;
      const double shrink = 1.0 - lr * cfg.weight_decay;
      model.encoder_weights = shrink * model.encoder_weights - lr * g.encoder_weights;
      model.head_weights = shrink * model.head_weights - lr * g.head_weights;
      model.encoder_bias -= lr * g.encoder_bias;
      model.head_bias -= lr * g.head_bias;
    }
  }
  result.loss_history.push_back(full_loss(cfg.epochs));

  int correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vector h = EncodeEmbedding(model, inputs.col(static_cast<Eigen::Index>(i)));
    if (ArgMax(ProbaFromHidden(model, h)) == labels[i]) ++correct;
  }
  result.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return result;
}

Matrix SentenceEmbeddings(const Dataset& data, const EmbeddingTable& emb) {
  Matrix out(emb.dim(), static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = SentenceEmbed(data.examples[i].seq, emb);
  }
  return out;
}

TrainResult TrainClassifier(const Dataset& train, const ModelArch& arch, const TrainConfig& cfg,
                            const EmbeddingTable& emb) {
  if (train.size() == 0) throw Error(ErrorCode::kDegenerateInput, "empty training set");
  std::vector<int> labels;
  labels.reserve(train.size());
  for (const auto& ex : train.examples) labels.push_back(ex.label);
  const ClassifierModel init = InitClassifier(arch, emb.dim(), cfg.seed);
  return TrainClassifier(init, SentenceEmbeddings(train, emb), labels, cfg);
}

double Accuracy(const ClassifierModel& model, const Dataset& data, const EmbeddingTable& emb) {
  if (data.size() == 0) return 0.0;
  int correct = 0;
  for (const auto& ex : data.examples) {
    if (Predict(model, ex.seq, emb) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::string ModelToJson(const ClassifierModel& model) {
  json j;
  j["model_id"] = model.model_id;
  j["d"] = model.input_dim();
  j["d_h"] = model.hidden_dim();
  j["C"] = model.num_classes();
  j["nonlinearity"] = std::string(NonlinearityName(model.nonlinearity));
  j["W_e"] = internal::MatrixToJson(model.encoder_weights);
  j["b_e"] = internal::VectorToJson(model.encoder_bias);
  j["W_c"] = internal::MatrixToJson(model.head_weights);
  j["b_c"] = internal::VectorToJson(model.head_bias);
  return j.dump(1) + "\n";
}

ClassifierModel ModelFromJson(std::string_view text) {
  const json j = internal::ParseJson(text, "model");
  ClassifierModel model;
  try {
    model.model_id = j.at("model_id").get<std::string>();
    const auto d = j.at("d").get<Eigen::Index>();
    const auto d_h = j.at("d_h").get<Eigen::Index>();
    const auto c = j.at("C").get<Eigen::Index>();
    model.nonlinearity = ParseNonlinearity(j.at("nonlinearity").get<std::string>());
    model.encoder_weights = internal::MatrixFromJson(j.at("W_e"), d, d_h, "W_e");
    model.encoder_bias = internal::VectorFromJson(j.at("b_e"), d_h, "b_e");
    model.head_weights = internal::MatrixFromJson(j.at("W_c"), d_h, c, "W_c");
    model.head_bias = internal::VectorFromJson(j.at("b_c"), c, "b_c");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("model: ") + e.what());
  }
  model.Validate();
  return model;
}

void SaveModel(const ClassifierModel& model, const std::string& path) {
  internal::WriteFile(path, ModelToJson(model));
}

ClassifierModel LoadModel(const std::string& path) {
  return ModelFromJson(internal::ReadFile(path));
}

void ModelPool::Validate() const {
  if (seen.empty()) throw Error(ErrorCode::kConfig, "model pool has no seen models");
  std::unordered_set<std::string> ids;
  for (const auto& m : seen) {
    if (!ids.insert(m.model_id).second) throw Error(ErrorCode::kConfig, "duplicate model id " + m.model_id);
  }
  if (ids.contains(target.model_id)) {
    throw Error(ErrorCode::kConfig, "target model '" + target.model_id + "' is in the seen pool");
  }
}

}  // namespace attackscope
