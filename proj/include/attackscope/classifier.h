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

// Desk-scale text classifiers with an explicit encoder/head split:
//
//   h      = act(W_e^T s + b_e)     s = SentenceEmbed(x)
//   logits = W_c^T h + b_c
//
// where act is tanh or a linear map clipped to [-1, 1].

#ifndef ATTACKSCOPE_CLASSIFIER_H_
#define ATTACKSCOPE_CLASSIFIER_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "attackscope/text_core.h"

namespace attackscope {

enum class Nonlinearity { kTanh, kClippedLinear };

std::string_view NonlinearityName(Nonlinearity act);
Nonlinearity ParseNonlinearity(std::string_view name);

struct ClassifierModel {
  std::string model_id;
  Matrix encoder_weights;  // d x d_h
  Vector encoder_bias;     // d_h
  Matrix head_weights;     // d_h x C
  Vector head_bias;        // C
  Nonlinearity nonlinearity = Nonlinearity::kTanh;

  int input_dim() const { return static_cast<int>(encoder_weights.rows()); }
  int hidden_dim() const { return static_cast<int>(encoder_weights.cols()); }
  int num_classes() const { return static_cast<int>(head_weights.cols()); }

  // Throws kContractViolation on inconsistent shapes, C < 2 or non-finite
  // weights.
  void Validate() const;
};

struct ModelArch {
  std::string model_id;
  int hidden_dim = 32;
  Nonlinearity nonlinearity = Nonlinearity::kTanh;
  int num_classes = 2;
};

struct TrainConfig {
  int epochs = 300;
  double learning_rate = 0.05;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double weight_decay = 1e-4;
};

struct TrainResult {
  ClassifierModel model;
  double train_accuracy = 0.0;
  // Mean cross-entropy over the training set, measured before each epoch
  // and once after the last.
  std::vector<double> loss_history;
};

// Encoder output from a precomputed sentence embedding.
Vector EncodeEmbedding(const ClassifierModel& model, const Vector& sentence);
Vector Encode(const ClassifierModel& model, const TokenSeq& seq, const EmbeddingTable& emb);

Vector ProbaFromHidden(const ClassifierModel& model, const Vector& hidden);
Vector PredictProba(const ClassifierModel& model, const TokenSeq& seq, const EmbeddingTable& emb);

// Index of the largest component; ties go to the lowest index.
int ArgMax(const Vector& values);
int Predict(const ClassifierModel& model, const TokenSeq& seq, const EmbeddingTable& emb);
double Confidence(const ClassifierModel& model, const TokenSeq& seq, const EmbeddingTable& emb);

// Xavier-normal encoder/head weights, zero biases.
ClassifierModel InitClassifier(const ModelArch& arch, int input_dim, std::uint64_t seed);

// Mean cross-entropy over the columns of `inputs` (one sentence embedding
// per column) and its gradient with respect to every parameter. Weight decay is
// not part of the loss.
struct ClassifierGradient {
  double loss = 0.0;
  Matrix encoder_weights;
  Vector encoder_bias;
  Matrix head_weights;
  Vector head_bias;
};
ClassifierGradient ClassifierLossAndGradient(const ClassifierModel& model, const Matrix& inputs,
                                             const std::vector<int>& labels);

// Mini-batch gradient descent with decoupled weight decay. Throws
// kDegenerateInput on an empty dataset and kDivergence (naming the epoch)
// when the loss turns non-finite.
TrainResult TrainClassifier(const Dataset& train, const ModelArch& arch, const TrainConfig& cfg,
                            const EmbeddingTable& emb);
TrainResult TrainClassifier(const ClassifierModel& init, const Matrix& inputs,
                            const std::vector<int>& labels, const TrainConfig& cfg);

// Fraction of examples whose prediction matches the label.
double Accuracy(const ClassifierModel& model, const Dataset& data, const EmbeddingTable& emb);

// One column per example.
Matrix SentenceEmbeddings(const Dataset& data, const EmbeddingTable& emb);

std::string ModelToJson(const ClassifierModel& model);
ClassifierModel ModelFromJson(std::string_view text);
void SaveModel(const ClassifierModel& model, const std::string& path);
ClassifierModel LoadModel(const std::string& path);

struct ModelPool {
  std::vector<ClassifierModel> seen;
  ClassifierModel target;

  // Throws kConfig if the pool is empty or the target id is among the seen.
  void Validate() const;
};

}  // namespace attackscope

#endif  // ATTACKSCOPE_CLASSIFIER_H_
