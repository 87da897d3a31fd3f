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

#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include "attackscope/error.h"
#include "test_util.h"

namespace attackscope {
namespace {

using ::attackscope::testing::WriteTemp;

EmbeddingTable SmallTable() {
  RowMatrix rows(4, 2);
  rows << 1, 0,  //
      0, 1,      //
      1, 1,      //
      0, 0;      // OOV
  return EmbeddingTable(rows);
}

TEST(VocabTest, OovIdFollowsRealTokens) {
  Vocab vocab({"good", "bad", "movie"});
  EXPECT_EQ(vocab.size(), 4u);
  EXPECT_EQ(vocab.oov_id(), 3);
  EXPECT_EQ(vocab.Lookup("bad"), 1);
  EXPECT_EQ(vocab.Lookup("unseen"), 3);
  EXPECT_TRUE(vocab.IsOov(vocab.Lookup("unseen")));
  EXPECT_FALSE(vocab.Contains("unseen"));
  EXPECT_EQ(vocab.Token(2), "movie");
}

TEST(VocabTest, DuplicateTokensAreRejected) {
  EXPECT_ERROR_CODE(Vocab({"a", "b", "a"}), ErrorCode::kDuplicateId);
}

TEST(TokenizeTest, LowercasesAndSplitsOnPunctuation) {
  Vocab vocab({"the", "movie", "was", "good"});
  TokenSeq seq = Tokenize("The movie,was  GOOD!", vocab);
  EXPECT_EQ(seq.surface, (std::vector<std::string>{"the", "movie", "was", "good"}));
  EXPECT_EQ(seq.ids, (std::vector<TokenId>{0, 1, 2, 3}));
  EXPECT_EQ(Detokenize(seq), "the movie was good");
}

TEST(TokenizeTest, UnknownTokensMapToOov) {
  Vocab vocab({"good"});
  TokenSeq seq = Tokenize("good gravy", vocab);
  ASSERT_EQ(seq.size(), 2u);
  EXPECT_EQ(seq.ids[1], vocab.oov_id());
  EXPECT_EQ(seq.surface[1], "gravy");
}

TEST(TokenizeTest, EmptyAfterNormalizationIsDegenerate) {
  Vocab vocab({"good"});
  EXPECT_ERROR_CODE(Tokenize(" ... !? ", vocab), ErrorCode::kDegenerateInput);
  EXPECT_ERROR_CODE(Tokenize("", vocab), ErrorCode::kDegenerateInput);
}

TEST(TokenizeTest, TokenizeDetokenizeIsIdempotent) {
  Vocab vocab({"a", "b"});
  for (const char* text : {"A b, c.", "  x  ", "a-b-c", "B!"}) {
    const std::string once = Detokenize(Tokenize(text, vocab));
    EXPECT_EQ(Detokenize(Tokenize(once, vocab)), once) << text;
  }
}

TEST(SentenceEmbedTest, NormalizedMeanOfKnownTokens) {
  EmbeddingTable emb = SmallTable();
  TokenSeq seq{{0, 1, 3}, {"x", "y", "?"}};
  Vector s = SentenceEmbed(seq, emb);
  EXPECT_NEAR(s(0), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(s(1), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(s.norm(), 1.0, 1e-12);
}

TEST(SentenceEmbedTest, AllOovHasNoEmbeddableContent) {
  EmbeddingTable emb = SmallTable();
  TokenSeq seq{{3, 3}, {"?", "?"}};
  EXPECT_ERROR_CODE(SentenceEmbed(seq, emb), ErrorCode::kNoEmbeddableContent);
}

TEST(CosineDistanceTest, KnownValues) {
  Vector a(2), b(2), c(2);
  a << 1, 0;
  b << 0, 1;
  c << -1, 0;
  EXPECT_DOUBLE_EQ(CosineDistance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(CosineDistance(a, b), 1.0);
  EXPECT_DOUBLE_EQ(CosineDistance(a, c), 2.0);
  EXPECT_DOUBLE_EQ(CosineDistance(a, b), CosineDistance(b, a));
}

TEST(CosineDistanceTest, RejectsNonUnitInputs) {
  Vector a(2), b(2);
  a << 2, 0;
  b << 0, 1;
  EXPECT_ERROR_CODE(CosineDistance(a, b), ErrorCode::kContractViolation);
}

TEST(CosineSimilarityTest, ZeroVectorGivesZero) {
  Vector a(2), z = Vector::Zero(2);
  a << 3, 4;
  EXPECT_EQ(CosineSimilarity(a, z), 0.0);
  EXPECT_NEAR(CosineSimilarity(a, 2.0 * a), 1.0, 1e-12);
}

TEST(EmbeddingTableTest, RejectsBadShapesAndValues) {
  EXPECT_ERROR_CODE(EmbeddingTable(RowMatrix::Zero(3, 1)), ErrorCode::kDimensionMismatch);
  RowMatrix rows = RowMatrix::Zero(3, 2);
  rows(1, 1) = std::nan("");
  EXPECT_ERROR_CODE(EmbeddingTable(rows), ErrorCode::kContractViolation);
}

TEST(LoadEmbeddingsTest, AppendsZeroOovRow) {
  const std::string path = WriteTemp("emb_ok.txt", "good 1 0\nbad -1 0.5\n");
  EmbeddingBundle bundle = LoadEmbeddings(path);
  EXPECT_EQ(bundle.vocab.size(), 3u);
  EXPECT_EQ(bundle.table.size(), 3u);
  EXPECT_EQ(bundle.table.dim(), 2);
  EXPECT_DOUBLE_EQ(bundle.table.Row(1)(1), 0.5);
  EXPECT_EQ(bundle.table.Row(bundle.vocab.oov_id()).norm(), 0.0);
}

TEST(LoadEmbeddingsTest, RaggedRowIsDimensionMismatch) {
  const std::string path = WriteTemp("emb_ragged.txt", "good 1 0\nbad -1\n");
  try {
    LoadEmbeddings(path);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
}

TEST(LoadDatasetTest, ParsesRowsAndRejectsDuplicates) {
  Vocab vocab({"good", "bad"});
  const std::string ok = WriteTemp(
      "ds_ok.jsonl",
      "{\"id\": \"a\", \"text\": \"good\", \"label\": 1}\n\n"
      "{\"id\": \"b\", \"text\": \"bad!\", \"label\": 0}\n");
  Dataset data = LoadDataset(ok, vocab, "toy", Split::kTest, 2);
  ASSERT_EQ(data.size(), 2u);
  EXPECT_EQ(data.examples[1].id, "b");
  EXPECT_EQ(data.examples[1].seq.ids, (std::vector<TokenId>{1}));

  const std::string dup = WriteTemp(
      "ds_dup.jsonl",
      "{\"id\": \"a\", \"text\": \"good\", \"label\": 1}\n"
      "{\"id\": \"a\", \"text\": \"bad\", \"label\": 0}\n");
  EXPECT_ERROR_CODE(LoadDataset(dup, vocab, "toy", Split::kTest, 2), ErrorCode::kDuplicateId);

  const std::string bad_label =
      WriteTemp("ds_label.jsonl", "{\"id\": \"a\", \"text\": \"good\", \"label\": 2}\n");
  EXPECT_ERROR_CODE(LoadDataset(bad_label, vocab, "toy", Split::kTest, 2), ErrorCode::kParse);

  EXPECT_ERROR_CODE(LoadDataset("/nonexistent/x.jsonl", vocab, "toy", Split::kTest, 2),
                    ErrorCode::kIo);
}

TEST(CheckDisjointTest, SharedIdIsRejected) {
  Dataset a{"a", Split::kTrain, {{"x", {}, 0}, {"y", {}, 1}}};
  Dataset b{"b", Split::kTest, {{"z", {}, 0}}};
  EXPECT_NO_THROW(CheckDisjoint(a, b));
  b.examples.push_back({"y", {}, 0});
  EXPECT_ERROR_CODE(CheckDisjoint(a, b), ErrorCode::kDuplicateId);
}

TEST(LexiconsTest, HeadwordIsStrippedFromItsSynonyms) {
  Lexicons lex({"the"}, {{"good", {"good", "fine", "nice"}}}, {{"good", PosTag::kAdj}});
  EXPECT_TRUE(lex.IsStopword("the"));
  EXPECT_FALSE(lex.IsStopword("good"));
  EXPECT_EQ(lex.Synonyms("good"), (std::vector<std::string>{"fine", "nice"}));
  EXPECT_TRUE(lex.Synonyms("absent").empty());
  EXPECT_EQ(lex.Pos("good"), PosTag::kAdj);
  EXPECT_FALSE(lex.Pos("fine").has_value());
}

TEST(ParseSplitTest, RoundTrip) {
  for (Split s : {Split::kTrain, Split::kValidation, Split::kTest}) {
    EXPECT_EQ(ParseSplit(SplitName(s)), s);
  }
  EXPECT_ERROR_CODE(ParseSplit("dev"), ErrorCode::kConfig);
}

}  // namespace
}  // namespace attackscope
