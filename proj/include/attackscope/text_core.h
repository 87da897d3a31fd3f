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

// Shared text substrate: vocabulary, tokenization, datasets, static word
// embeddings, lexicons and the sentence-embedding cosine distance.

#ifndef ATTACKSCOPE_TEXT_CORE_H_
#define ATTACKSCOPE_TEXT_CORE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

namespace attackscope {

using TokenId = std::int32_t;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Token <-> id map. Real tokens occupy [0, size() - 1); the final id is the
// out-of-vocabulary id.
class Vocab {
 public:
  Vocab() = default;
  // Throws kDuplicateId if a token repeats.
  explicit Vocab(const std::vector<std::string>& tokens);

  TokenId Lookup(std::string_view token) const;
  bool Contains(std::string_view token) const;
  const std::string& Token(TokenId id) const;
  TokenId oov_id() const { return static_cast<TokenId>(tokens_.size()); }
  bool IsOov(TokenId id) const { return id == oov_id(); }
  // Number of ids including the OOV id.
  std::size_t size() const { return tokens_.size() + 1; }

 private:
  std::unordered_map<std::string, TokenId> ids_;
  std::vector<std::string> tokens_;
};

struct TokenSeq {
  std::vector<TokenId> ids;
  std::vector<std::string> surface;

  std::size_t size() const { return ids.size(); }
  bool operator==(const TokenSeq& other) const = default;
};

struct LabeledExample {
  std::string id;
  TokenSeq seq;
  int label = 0;
};

enum class Split { kTrain, kValidation, kTest };

std::string_view SplitName(Split split);
Split ParseSplit(std::string_view name);

struct Dataset {
  std::string name;
  Split split = Split::kTrain;
  std::vector<LabeledExample> examples;

  std::size_t size() const { return examples.size(); }
};

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  // Throws kDimensionMismatch if d < 2 and kContractViolation on non-finite
  // entries.
  // The last row belongs to the OOV id.
  explicit EmbeddingTable(RowMatrix rows);

  int dim() const { return static_cast<int>(rows_.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(rows_.rows()); }
  Eigen::Map<const Vector> Row(TokenId id) const {
    return Eigen::Map<const Vector>(rows_.data() + static_cast<Eigen::Index>(id) * rows_.cols(),
                                    rows_.cols());
  }
  const RowMatrix& rows() const { return rows_; }

 private:
  RowMatrix rows_;
};

struct EmbeddingBundle {
  Vocab vocab;
  EmbeddingTable table;
};

// Closed universal part-of-speech tag set.
enum class PosTag { kNoun, kVerb, kAdj, kAdv, kPron, kDet, kAdp, kConj, kNum, kPrt, kOther };

std::optional<PosTag> ParsePosTag(std::string_view tag);

class Lexicons {
 public:
  Lexicons() = default;
  // Headwords are stripped from their own synonym lists.
  Lexicons(std::unordered_set<std::string> stopwords,
           std::unordered_map<std::string, std::vector<std::string>> synonyms,
           std::unordered_map<std::string, PosTag> pos);

  bool IsStopword(std::string_view token) const;
  // Empty for unknown tokens.
  const std::vector<std::string>& Synonyms(std::string_view token) const;
  std::optional<PosTag> Pos(std::string_view token) const;

 private:
  std::unordered_set<std::string> stopwords_;
  std::unordered_map<std::string, std::vector<std::string>> synonyms_;
  std::unordered_map<std::string, PosTag> pos_;
};

// Lowercases, splits on whitespace and ASCII punctuation, and maps unknown
// tokens to the OOV id. Throws kDegenerateInput if nothing remains.
TokenSeq Tokenize(std::string_view text, const Vocab& vocab);

// Joins surface strings with single spaces.
std::string Detokenize(const TokenSeq& seq);

// L2-normalized mean of the non-OOV token embeddings.
// Throws kNoEmbeddableContent when every token is OOV.
Vector SentenceEmbed(const TokenSeq& seq, const EmbeddingTable& emb);

// 1 - a.b for unit vectors; throws kContractViolation when either input is
// off the unit sphere by more than 1e-6.
double CosineDistance(const Vector& a, const Vector& b);

// Cosine similarity of two arbitrary non-zero vectors (0 if either is zero).
double CosineSimilarity(const Vector& a, const Vector& b);

// Loaders. Parse failures name the offending line.
Dataset LoadDataset(const std::string& path, const Vocab& vocab, std::string name, Split split,
                    int num_classes);
EmbeddingBundle LoadEmbeddings(const std::string& path);
Lexicons LoadLexicons(const std::string& stopwords_path, const std::string& synonyms_path,
                      const std::string& pos_path);

// Throws kDuplicateId if any example id appears in both datasets.
void CheckDisjoint(const Dataset& a, const Dataset& b);

}  // namespace attackscope

#endif  // ATTACKSCOPE_TEXT_CORE_H_
