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

// Deep attackability detectors and confidence baselines.
//
// A detector reads the encoder output h of one seen model and predicts
//
//   D(h) = sigmoid(W1^T sigmoid(W0^T h))
//
// the probability that the sample is attackable (or robust) for that model.
// Detectors of several seen models are combined either by their mean, which
// estimates the probability for an unseen target model, or by the mean
// raised to a power alpha >= 1, which estimates the probability of being
// attackable for the whole pool plus the target.

#ifndef ATTACKSCOPE_DETECTOR_H_
#define ATTACKSCOPE_DETECTOR_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "attackscope/attackability.h"
#include "attackscope/classifier.h"
#include "attackscope/text_core.h"

namespace attackscope {

struct DetectorParams {
  std::string model_id;
  LabelMode mode = LabelMode::kAttackable;
  Matrix w0;  // d_in x d_hidden
  Vector w1;  // d_hidden

  int input_dim() const { return static_cast<int>(w0.rows()); }
  int hidden_dim() const { return static_cast<int>(w0.cols()); }
  // Throws kContractViolation on inconsistent shapes or non-finite weights.
  void Validate() const;
};

struct DetectorTrainConfig {
  int epochs = 300;
  double learning_rate = 0.05;
  int batch_size = 8;
  // 0 means "same as the input (encoder) width".
  int hidden_dim = 0;
  std::uint64_t seed = 0;
};

struct DetectorTrainResult {
  DetectorParams params;
  double train_accuracy = 0.0;
  // Mean binary cross-entropy before each epoch and after the last.
  std::vector<double> loss_history;
};

// Throws kDimensionMismatch if h does not match the detector's input width.
double DetectorProb(const DetectorParams& params, const Vector& h);

// Mean binary cross-entropy over the columns of `hidden` and its gradient.
struct DetectorGradient {
  double loss = 0.0;
  Matrix w0;
  Vector w1;
};
DetectorGradient DetectorLossAndGradient(const DetectorParams& params, const Matrix& hidden,
                                         const std::vector<bool>& labels);

// Xavier-normal initialization.
DetectorParams InitDetector(std::string model_id, LabelMode mode, int input_dim, int hidden_dim,
                            std::uint64_t seed);

// Mini-batch gradient descent on binary cross-entropy. Throws
// kDegenerateTraining unless both classes occur and kDivergence on a
// non-finite loss.
DetectorTrainResult TrainDetector(std::string model_id, LabelMode mode, const Matrix& hidden,
                                  const std::vector<bool>& labels, const DetectorTrainConfig& cfg);

// Trains on the samples of `data` the model classifies correctly, with the
// model's own column of `labels` as targets.
DetectorTrainResult TrainDetector(const ClassifierModel& model, const Dataset& data,
                                  const LabelMatrix& labels, LabelMode mode,
                                  const EmbeddingTable& emb, const DetectorTrainConfig& cfg);

// Encoder outputs, one column per example.
Matrix HiddenStates(const ClassifierModel& model, const Dataset& data, const EmbeddingTable& emb);

// Detector probability for every example of `data`, in dataset order.
std::vector<double> DetectorScores(const DetectorParams& params, const ClassifierModel& model,
                                   const Dataset& data, const EmbeddingTable& emb);

// Throws kEmptyInput on no probabilities and kContractViolation on values
// outside [0, 1].
double AggregateMean(const std::vector<double>& probs);
// Mean raised to `alpha`; throws kConfig when alpha < 1.
double AggregateUniversal(const std::vector<double>& probs, double alpha);

enum class AlphaRule { kPoolSize, kFixed };

struct AggregationConfig {
  AlphaRule rule = AlphaRule::kPoolSize;
  double value = 1.0;  // used by kFixed

  // Throws kConfig when the result would be below 1.
  double Alpha(std::size_t pool_size) const;
};

enum class ConfVariant { kConfS, kConfU };

std::string_view ConfVariantName(ConfVariant variant);

// Attackable mode: 1 - confidence; robust mode: confidence. The confidence
// is the target model's (conf_s) or the mean over the seen models (conf_u).
double ConfScore(LabelMode mode, const std::vector<double>& confidences);
// Throws kConfig when conf_s lacks a target or conf_u lacks seen models.
double ConfBaseline(ConfVariant variant, LabelMode mode, const ClassifierModel* target,
                    const std::vector<const ClassifierModel*>& seen, const TokenSeq& seq,
                    const EmbeddingTable& emb);

// {model_id, mode, d_in, d_hidden, W0, W1}; matrices as row-major arrays.
std::string DetectorToJson(const DetectorParams& params);
DetectorParams DetectorFromJson(std::string_view text);
void SaveDetector(const DetectorParams& params, const std::string& path);
DetectorParams LoadDetector(const std::string& path);

// sample_id,score
std::string ScoresToCsv(const std::vector<std::string>& ids, const std::vector<double>& scores);
std::vector<std::pair<std::string, double>> ScoresFromCsv(std::string_view text,
                                                          const std::string& what);

}  // namespace attackscope

#endif  // ATTACKSCOPE_DETECTOR_H_
