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

// Seeded generator of tiny attack instances: at most 6 tokens, at most 3
// lexicon candidates per position, and a fraction-of-words filter that caps
// every attack at 2 substitutions. Small enough for exhaustive enumeration.

#ifndef ATTACKSCOPE_TESTS_TINY_INSTANCE_H_
#define ATTACKSCOPE_TESTS_TINY_INSTANCE_H_

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "attackscope/attack_engine.h"
#include "attackscope/classifier.h"
#include "attackscope/rng.h"
#include "attackscope/text_core.h"

namespace attackscope::testing {

struct TinyInstance {
  Vocab vocab;
  EmbeddingTable emb;
  Lexicons lexicons;
  ClassifierModel model;
  LabeledExample example;
  AttackMethodSpec spec;
  int max_subs = 2;

  TextResources resources() const { return {vocab, emb, lexicons}; }
};

inline std::unique_ptr<TinyInstance> MakeTinyInstance(std::uint64_t seed) {
  Rng rng(DeriveSeed(seed, {"tiny-instance"}));
  auto inst = std::make_unique<TinyInstance>();
  constexpr int kWords = 14;
  constexpr int kDim = 4;

  std::vector<std::string> words;
  for (int i = 0; i < kWords; ++i) words.push_back("w" + std::to_string(i));
  inst->vocab = Vocab(words);

  RowMatrix rows = RowMatrix::Zero(kWords + 1, kDim);
  for (int i = 0; i < kWords; ++i) {
    for (int j = 0; j < kDim; ++j) rows(i, j) = StandardNormal(rng);
  }
  inst->emb = EmbeddingTable(rows);

  std::unordered_map<std::string, std::vector<std::string>> synonyms;
  for (int i = 0; i < kWords; ++i) {
    const std::size_t n = 1 + UniformIndex(rng, 3);
    std::vector<std::string>& list = synonyms[words[static_cast<std::size_t>(i)]];
    while (list.size() < n) {
      const std::string& w = words[UniformIndex(rng, kWords)];
      if (w != words[static_cast<std::size_t>(i)] &&
          std::find(list.begin(), list.end(), w) == list.end()) {
        list.push_back(w);
      }
    }
  }
  // One stopword so the constraint participates.
  inst->lexicons = Lexicons({words[0]}, synonyms, {});

  ModelArch arch{"tiny", 6, Nonlinearity::kTanh, 2};
  inst->model = InitClassifier(arch, kDim, seed);
  inst->model.head_weights *= 3.0;
  inst->model.encoder_weights *= 2.0;

  const std::size_t length = 4 + UniformIndex(rng, 3);
  TokenSeq seq;
  for (std::size_t i = 0; i < length; ++i) {
    const auto id = static_cast<TokenId>(UniformIndex(rng, kWords));
    seq.ids.push_back(id);
    seq.surface.push_back(inst->vocab.Token(id));
  }
  inst->example.id = "tiny-" + std::to_string(seed);
  inst->example.seq = seq;
  inst->example.label = Predict(inst->model, seq, inst->emb);

  inst->spec.name = "tiny_greedy";
  inst->spec.pre.forbid_repeat_token_changes = true;
  inst->spec.pre.forbid_stopword_changes = true;
  inst->spec.pre.synonym_source = SynonymSource::kLexicon;
  inst->spec.constraints = {
      {DistanceMetric::kSentenceCosine, kInf, ConstraintRole::kPerturbationMetric},
      {DistanceMetric::kFractionWordsChanged,
       2.0 / static_cast<double>(length) + 1e-12, ConstraintRole::kFeasibilityFilter}};
  inst->spec.search = SearchStrategy::kGreedyDeletionImportance;
  return inst;
}

}  // namespace attackscope::testing

#endif  // ATTACKSCOPE_TESTS_TINY_INSTANCE_H_
