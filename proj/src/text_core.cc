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

#include "attackscope/text_core.h"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include "attackscope/error.h"
#include "json.hpp"

namespace attackscope {

namespace {

using json = nlohmann::json;

std::ifstream OpenOrThrow(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return in;
}

std::string Where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line);
}

json ReadJsonFile(const std::string& path) {
  std::ifstream in = OpenOrThrow(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

}  // namespace

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateInput: return "degenerate-input";
    case ErrorCode::kNoEmbeddableContent: return "no-embeddable-content";
    case ErrorCode::kContractViolation: return "contract-violation";
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kDuplicateId: return "duplicate-id";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kBudgetExceeded: return "budget-exceeded";
    case ErrorCode::kUndefinedRate: return "undefined-rate";
    case ErrorCode::kIncompleteGrid: return "incomplete-grid";
    case ErrorCode::kUnknownSetting: return "unknown-setting";
    case ErrorCode::kDegenerateTraining: return "degenerate-training";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kIdMismatch: return "id-mismatch";
    case ErrorCode::kUndefinedRecall: return "undefined-recall";
    case ErrorCode::kUndefinedCorrelation: return "undefined-correlation";
    case ErrorCode::kUnknownMethod: return "unknown-method";
    case ErrorCode::kConfig: return "config-error";
    case ErrorCode::kMissingArtifact: return "missing-artifact";
    case ErrorCode::kInvariantAudit: return "invariant-audit";
    case ErrorCode::kIo: return "io-error";
  }
  return "unknown";
}

Vocab::Vocab(const std::vector<std::string>& tokens) : tokens_(tokens) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = ids_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) throw Error(ErrorCode::kDuplicateId, "token '" + tokens_[i] + "' repeats");
  }
}

TokenId Vocab::Lookup(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? oov_id() : it->second;
}

bool Vocab::Contains(std::string_view token) const {
  return ids_.contains(std::string(token));
}

const std::string& Vocab::Token(TokenId id) const {
  static const std::string kOovToken = "<oov>";
  if (id == oov_id()) return kOovToken;
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error(ErrorCode::kContractViolation, "token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "train";
}

Split ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw Error(ErrorCode::kConfig, "unknown split '" + std::string(name) + "'");
}

EmbeddingTable::EmbeddingTable(RowMatrix rows) : rows_(std::move(rows)) {
  if (rows_.cols() < 2) throw Error(ErrorCode::kDimensionMismatch, "embedding dimension < 2");
  if (!rows_.allFinite()) throw Error(ErrorCode::kContractViolation, "non-finite embedding entry");
}

std::optional<PosTag> ParsePosTag(std::string_view tag) {
  static const std::pair<std::string_view, PosTag> kTags[] = {
      {"NOUN", PosTag::kNoun}, {"VERB", PosTag::kVerb}, {"ADJ", PosTag::kAdj},
      {"ADV", PosTag::kAdv},   {"PRON", PosTag::kPron}, {"DET", PosTag::kDet},
      {"ADP", PosTag::kAdp},   {"CONJ", PosTag::kConj}, {"NUM", PosTag::kNum},
      {"PRT", PosTag::kPrt},   {"X", PosTag::kOther},
  };
  for (const auto& [name, value] : kTags) {
    if (name == tag) return value;
  }
  return std::nullopt;
}

Lexicons::Lexicons(std::unordered_set<std::string> stopwords,
                   std::unordered_map<std::string, std::vector<std::string>> synonyms,
                   std::unordered_map<std::string, PosTag> pos)
    : stopwords_(std::move(stopwords)), synonyms_(std::move(synonyms)), pos_(std::move(pos)) {
  for (auto& [head, list] : synonyms_) {
    std::erase(list, head);
  }
}

bool Lexicons::IsStopword(std::string_view token) const {
  return stopwords_.contains(std::string(token));
}

const std::vector<std::string>& Lexicons::Synonyms(std::string_view token) const {
  static const std::vector<std::string> kEmpty;
  auto it = synonyms_.find(std::string(token));
  return it == synonyms_.end() ? kEmpty : it->second;
}

std::optional<PosTag> Lexicons::Pos(std::string_view token) const {
  auto it = pos_.find(std::string(token));
  if (it == pos_.end()) return std::nullopt;
  return it->second;
}

TokenSeq Tokenize(std::string_view text, const Vocab& vocab) {
  TokenSeq seq;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    seq.ids.push_back(vocab.Lookup(current));
    seq.surface.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c) || std::ispunct(c)) {
      flush();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  if (seq.ids.empty()) throw Error(ErrorCode::kDegenerateInput, "text is empty after normalization");
  return seq;
}

std::string Detokenize(const TokenSeq& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.surface.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += seq.surface[i];
  }
  return out;
}

Vector SentenceEmbed(const TokenSeq& seq, const EmbeddingTable& emb) {
  Vector sum = Vector::Zero(emb.dim());
  int count = 0;
  const auto oov = static_cast<TokenId>(emb.size() - 1);
  for (TokenId id : seq.ids) {
    if (id == oov) continue;
    sum += emb.Row(id);
    ++count;
  }
  if (count == 0) throw Error(ErrorCode::kNoEmbeddableContent, "sequence has only OOV tokens");
  const double norm = sum.norm();
  if (norm == 0.0) throw Error(ErrorCode::kNoEmbeddableContent, "mean embedding is the zero vector");
  return sum / norm;
}

double CosineDistance(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kContractViolation, "dimension mismatch");
  if (std::abs(a.norm() - 1.0) > 1e-6 || std::abs(b.norm() - 1.0) > 1e-6) {
    throw Error(ErrorCode::kContractViolation, "cosine distance needs unit vectors");
  }
  return 1.0 - a.dot(b);
}

double CosineSimilarity(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

Dataset LoadDataset(const std::string& path, const Vocab& vocab, std::string name, Split split,
                    int num_classes) {
  std::ifstream in = OpenOrThrow(path);
  Dataset dataset{std::move(name), split, {}};
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParse, Where(path, line_no) + ": " + e.what());
    }
    if (!row.is_object() || !row.contains("id") || !row["id"].is_string() ||
        !row.contains("text") || !row["text"].is_string() || !row.contains("label") ||
        !row["label"].is_number_integer()) {
      throw Error(ErrorCode::kParse, Where(path, line_no) + ": expected {id, text, label}");
    }
    LabeledExample example;
    example.id = row["id"].get<std::string>();
    example.label = row["label"].get<int>();
    if (example.label < 0 || example.label >= num_classes) {
      throw Error(ErrorCode::kParse, Where(path, line_no) + ": label out of range");
    }
    if (!seen.insert(example.id).second) {
      throw Error(ErrorCode::kDuplicateId, Where(path, line_no) + ": sample id '" + example.id + "'");
    }
    try {
      example.seq = Tokenize(row["text"].get<std::string>(), vocab);
    } catch (const Error& e) {
      throw Error(e.code(), Where(path, line_no) + ": " + e.what());
    }
    dataset.examples.push_back(std::move(example));
  }
  return dataset;
}

EmbeddingBundle LoadEmbeddings(const std::string& path) {
  std::ifstream in = OpenOrThrow(path);
  std::vector<std::string> tokens;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    std::string field;
    while (fields >> field) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kParse, Where(path, line_no) + ": bad float '" + field + "'");
      }
    }
    if (rows.empty()) {
      dim = values.size();
    } else if (values.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  Where(path, line_no) + ": expected " + std::to_string(dim) + " values, got " +
                      std::to_string(values.size()));
    }
    tokens.push_back(std::move(token));
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw Error(ErrorCode::kParse, path + ": no embedding rows");

  EmbeddingBundle bundle;
  bundle.vocab = Vocab(tokens);
  // The trailing row belongs to the OOV id and stays zero.
  RowMatrix matrix = RowMatrix::Zero(static_cast<Eigen::Index>(rows.size() + 1),
                                     static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  bundle.table = EmbeddingTable(std::move(matrix));
  return bundle;
}

Lexicons LoadLexicons(const std::string& stopwords_path, const std::string& synonyms_path,
                      const std::string& pos_path) {
  std::unordered_set<std::string> stopwords;
  {
    std::ifstream in = OpenOrThrow(stopwords_path);
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream fields(line);
      std::string token;
      if (fields >> token) stopwords.insert(token);
    }
  }

  std::unordered_map<std::string, std::vector<std::string>> synonyms;
  const json syn = ReadJsonFile(synonyms_path);
  if (!syn.is_object()) throw Error(ErrorCode::kParse, synonyms_path + ": expected an object");
  for (const auto& [head, list] : syn.items()) {
    if (!list.is_array()) {
      throw Error(ErrorCode::kParse, synonyms_path + ": entry '" + head + "' is not an array");
    }
    auto& out = synonyms[head];
    for (const auto& item : list) {
      if (!item.is_string()) {
        throw Error(ErrorCode::kParse, synonyms_path + ": entry '" + head + "' has a non-string");
      }
      out.push_back(item.get<std::string>());
    }
  }

  std::unordered_map<std::string, PosTag> pos;
  const json tags = ReadJsonFile(pos_path);
  if (!tags.is_object()) throw Error(ErrorCode::kParse, pos_path + ": expected an object");
  for (const auto& [token, tag] : tags.items()) {
    std::optional<PosTag> parsed = tag.is_string() ? ParsePosTag(tag.get<std::string>()) : std::nullopt;
    if (!parsed) throw Error(ErrorCode::kParse, pos_path + ": bad tag for '" + token + "'");
    pos.emplace(token, *parsed);
  }
  return Lexicons(std::move(stopwords), std::move(synonyms), std::move(pos));
}

void CheckDisjoint(const Dataset& a, const Dataset& b) {
  std::unordered_set<std::string> ids;
  for (const auto& ex : a.examples) ids.insert(ex.id);
  for (const auto& ex : b.examples) {
    if (ids.contains(ex.id)) {
      throw Error(ErrorCode::kDuplicateId, "sample '" + ex.id + "' appears in both " +
                                               std::string(SplitName(a.split)) + " and " +
                                               std::string(SplitName(b.split)));
    }
  }
}

}  // namespace attackscope
