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

#include "attackscope/detector.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "attackscope/csv.h"
#include "attackscope/error.h"
#include "attackscope/rng.h"
#include "json_util.h"

namespace attackscope {

namespace {

using internal::json;

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double Softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

Matrix SigmoidMatrix(const Matrix& z) { return z.unaryExpr([](double v) { return Sigmoid(v); }); }

void CheckProbs(const std::vector<double>& probs) {
  if (probs.empty()) throw Error(ErrorCode::kEmptyInput, "no probabilities to aggregate");
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::kContractViolation, "probability " + FormatDouble(p) + " outside [0, 1]");
    }
  }
}

}  // namespace

void DetectorParams::Validate() const {
  if (w0.rows() < 1 || w0.cols() < 1 || w1.size() != w0.cols()) {
    throw Error(ErrorCode::kContractViolation, "detector '" + model_id + "' has inconsistent shapes");
  }
  if (!w0.allFinite() || !w1.allFinite()) {
    throw Error(ErrorCode::kContractViolation, "detector '" + model_id + "' has non-finite weights");
  }
}

double DetectorProb(const DetectorParams& params, const Vector& h) {
  if (h.size() != params.w0.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "detector input has " + std::to_string(h.size()) +
                                                   " components, expected " +
                                                   std::to_string(params.w0.rows()));
  }
  const Vector hidden = SigmoidMatrix(params.w0.transpose() * h);
  return Sigmoid(params.w1.dot(hidden));
}

DetectorGradient DetectorLossAndGradient(const DetectorParams& params, const Matrix& hidden,
                                         const std::vector<bool>& labels) {
  const auto n = hidden.cols();
  if (n == 0 || static_cast<std::size_t>(n) != labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one label per detector input column");
  }
  if (hidden.rows() != params.w0.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "detector input width mismatch");
  }
  const Matrix a = SigmoidMatrix(params.w0.transpose() * hidden);  // d_hidden x n
  const Vector z = a.transpose() * params.w1;                       // n
  Vector dz(n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    // -[y log s(z) + (1 - y) log(1 - s(z))] = softplus(z) - y z
    loss += Softplus(z(i)) - y * z(i);
    dz(i) = (Sigmoid(z(i)) - y) / static_cast<double>(n);
  }
  DetectorGradient g;
  g.loss = loss / static_cast<double>(n);
  g.w1 = a * dz;
  const Matrix da = params.w1 * dz.transpose();  // d_hidden x n
  const Matrix dpre = (da.array() * a.array() * (1.0 - a.array())).matrix();
  g.w0 = hidden * dpre.transpose();
  return g;
}

DetectorParams InitDetector(std::string model_id, LabelMode mode, int input_dim, int hidden_dim,
                            std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1) throw Error(ErrorCode::kConfig, "detector widths must be positive");
  Rng rng(DeriveSeed(seed, {"detector-init", model_id, LabelModeName(mode)}));
  DetectorParams params;
  params.model_id = std::move(model_id);
  params.mode = mode;
  params.w0 = Matrix(input_dim, hidden_dim);
  params.w1 = Vector(hidden_dim);
  const double s0 = std::sqrt(2.0 / static_cast<double>(input_dim + hidden_dim));
  for (Eigen::Index c = 0; c < params.w0.cols(); ++c) {
    for (Eigen::Index r = 0; r < params.w0.rows(); ++r) params.w0(r, c) = s0 * StandardNormal(rng);
  }
  const double s1 = std::sqrt(2.0 / static_cast<double>(hidden_dim + 1));
  for (Eigen::Index i = 0; i < params.w1.size(); ++i) params.w1(i) = s1 * StandardNormal(rng);
  return params;
}

DetectorTrainResult TrainDetector(std::string model_id, LabelMode mode, const Matrix& hidden,
                                  const std::vector<bool>& labels, const DetectorTrainConfig& cfg) {
  if (cfg.epochs < 1 || cfg.learning_rate < 0.0 || cfg.batch_size < 1 || cfg.hidden_dim < 0) {
    throw Error(ErrorCode::kConfig, "invalid detector training config");
  }
  if (static_cast<std::size_t>(hidden.cols()) != labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one label per detector input column");
  }
  const auto positives = std::count(labels.begin(), labels.end(), true);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size())) {
    throw Error(ErrorCode::kDegenerateTraining,
                "detector '" + model_id + "' (" + std::string(LabelModeName(mode)) +
                    ") needs both classes; got " + std::to_string(positives) + " positives of " +
                    std::to_string(labels.size()));
  }
  const int input_dim = static_cast<int>(hidden.rows());
  const int hidden_dim = cfg.hidden_dim > 0 ? cfg.hidden_dim : input_dim;

  DetectorTrainResult result;
  result.params = InitDetector(model_id, mode, input_dim, hidden_dim, cfg.seed);
  DetectorParams& params = result.params;
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(DeriveSeed(cfg.seed, {"detector-batches", model_id, LabelModeName(mode)}));

  auto full_loss = [&](int epoch) {
    const double loss = DetectorLossAndGradient(params, hidden, labels).loss;
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::kDivergence,
                  "detector '" + params.model_id + "' loss is non-finite at epoch " + std::to_string(epoch));
    }
    return loss;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    result.loss_history.push_back(full_loss(epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[UniformIndex(rng, i)]);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      Matrix batch(hidden.rows(), static_cast<Eigen::Index>(end - start));
      std::vector<bool> batch_labels;
      for (std::size_t j = start; j < end; ++j) {
        batch.col(static_cast<Eigen::Index>(j - start)) = hidden.col(static_cast<Eigen::Index>(order[j]));
        batch_labels.push_back(labels[order[j]]);
      }
      const DetectorGradient g = DetectorLossAndGradient(params, batch, batch_labels);
      params.w0 -= cfg.learning_rate * g.w0;
      params.w1 -= cfg.learning_rate * g.w1;
    }
  }
  result.loss_history.push_back(full_loss(cfg.epochs));

  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool predicted = DetectorProb(params, hidden.col(static_cast<Eigen::Index>(i))) > 0.5;
    if (predicted == labels[i]) ++correct;
  }
  result.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return result;
}

Matrix HiddenStates(const ClassifierModel& model, const Dataset& data, const EmbeddingTable& emb) {
  Matrix out(model.hidden_dim(), static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = Encode(model, data.examples[i].seq, emb);
  }
  return out;
}

DetectorTrainResult TrainDetector(const ClassifierModel& model, const Dataset& data,
                                  const LabelMatrix& labels, LabelMode mode,
                                  const EmbeddingTable& emb, const DetectorTrainConfig& cfg) {
  const std::size_t k = labels.ModelIndex(model.model_id);
  const auto& grid = labels.labels(mode);
  std::vector<Vector> columns;
  std::vector<bool> targets;
  for (const auto& ex : data.examples) {
    const std::size_t n = labels.SampleIndex(ex.id);
    if (!labels.defined(n, k)) continue;
    columns.push_back(Encode(model, ex.seq, emb));
    targets.push_back(grid[n][k]);
  }
  Matrix hidden(model.hidden_dim(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) hidden.col(static_cast<Eigen::Index>(i)) = columns[i];
  return TrainDetector(model.model_id, mode, hidden, targets, cfg);
}

std::vector<double> DetectorScores(const DetectorParams& params, const ClassifierModel& model,
                                   const Dataset& data, const EmbeddingTable& emb) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& ex : data.examples) out.push_back(DetectorProb(params, Encode(model, ex.seq, emb)));
  return out;
}

double AggregateMean(const std::vector<double>& probs) {
  CheckProbs(probs);
  return std::accumulate(probs.begin(), probs.end(), 0.0) / static_cast<double>(probs.size());
}

double AggregateUniversal(const std::vector<double>& probs, double alpha) {
  if (!(alpha >= 1.0)) throw Error(ErrorCode::kConfig, "alpha must be >= 1, got " + FormatDouble(alpha));
  return std::pow(AggregateMean(probs), alpha);
}

double AggregationConfig::Alpha(std::size_t pool_size) const {
  const double alpha = rule == AlphaRule::kPoolSize ? static_cast<double>(pool_size) : value;
  if (!(alpha >= 1.0)) throw Error(ErrorCode::kConfig, "alpha must be >= 1, got " + FormatDouble(alpha));
  return alpha;
}

std::string_view ConfVariantName(ConfVariant variant) {
  return variant == ConfVariant::kConfS ? "conf_s" : "conf_u";
}

double ConfScore(LabelMode mode, const std::vector<double>& confidences) {
  const double c = AggregateMean(confidences);
  return mode == LabelMode::kAttackable ? 1.0 - c : c;
}

double ConfBaseline(ConfVariant variant, LabelMode mode, const ClassifierModel* target,
                    const std::vector<const ClassifierModel*>& seen, const TokenSeq& seq,
                    const EmbeddingTable& emb) {
  std::vector<double> confidences;
  if (variant == ConfVariant::kConfS) {
    if (target == nullptr) throw Error(ErrorCode::kConfig, "conf_s needs the target model");
    confidences.push_back(Confidence(*target, seq, emb));
  } else {
    if (seen.empty()) throw Error(ErrorCode::kConfig, "conf_u needs at least one seen model");
    for (const ClassifierModel* m : seen) confidences.push_back(Confidence(*m, seq, emb));
  }
  return ConfScore(mode, confidences);
}

std::string DetectorToJson(const DetectorParams& params) {
  params.Validate();
  json j;
  j["model_id"] = params.model_id;
  j["mode"] = std::string(LabelModeName(params.mode));
  j["d_in"] = params.input_dim();
  j["d_hidden"] = params.hidden_dim();
  j["W0"] = internal::MatrixToJson(params.w0);
  j["W1"] = internal::MatrixToJson(Matrix(params.w1));
  return j.dump(1) + "\n";
}

DetectorParams DetectorFromJson(std::string_view text) {
  const json j = internal::ParseJson(text, "detector");
  DetectorParams params;
  try {
    params.model_id = j.at("model_id").get<std::string>();
    params.mode = ParseLabelMode(j.at("mode").get<std::string>());
    const auto d_in = j.at("d_in").get<Eigen::Index>();
    const auto d_hidden = j.at("d_hidden").get<Eigen::Index>();
    if (d_in < 1 || d_hidden < 1) throw Error(ErrorCode::kParse, "detector widths must be positive");
    params.w0 = internal::MatrixFromJson(j.at("W0"), d_in, d_hidden, "W0");
    params.w1 = internal::MatrixFromJson(j.at("W1"), d_hidden, 1, "W1").col(0);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("detector: ") + e.what());
  }
  params.Validate();
  return params;
}

void SaveDetector(const DetectorParams& params, const std::string& path) {
  internal::WriteFile(path, DetectorToJson(params));
}

DetectorParams LoadDetector(const std::string& path) {
  return DetectorFromJson(internal::ReadFile(path));
}

std::string ScoresToCsv(const std::vector<std::string>& ids, const std::vector<double>& scores) {
  if (ids.size() != scores.size()) throw Error(ErrorCode::kDimensionMismatch, "one score per id");
  std::string out = "sample_id,score\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CheckCsvField(ids[i]);
    out += JoinCsvRow({ids[i], FormatDouble(scores[i])});
  }
  return out;
}

std::vector<std::pair<std::string, double>> ScoresFromCsv(std::string_view text,
                                                          const std::string& what) {
  const CsvTable table = ParseCsv(text, what);
  const std::size_t c_id = table.Column("sample_id");
  const std::size_t c_score = table.Column("score");
  std::vector<std::pair<std::string, double>> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) out.emplace_back(row[c_id], ParseDouble(row[c_score]));
  return out;
}

}  // namespace attackscope
