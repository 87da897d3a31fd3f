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


#include "attackscope/attack_engine.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include "attackscope/classifier.h"
#include "attackscope/error.h"
#include "attackscope/text_core.h"
#include "test_util.h"
#include "tiny_instance.h"

namespace attackscope {
namespace {

// A two-dimensional sentiment world: the first axis is polarity, the
// classifier predicts "positive" (class 1) when the sentence leans right.
class ToyWorld : public ::testing::Test {
 protected:
  ToyWorld()
      : vocab_({"the", "movie", "good", "great", "bad", "fine"}),
        emb_(MakeRows()),
        lexicons_({"the"}, {{"good", {"great", "bad"}}, {"movie", {"fine"}}},
                  {{"good", PosTag::kAdj}, {"great", PosTag::kAdj}, {"bad", PosTag::kAdj},
                   {"movie", PosTag::kNoun}, {"fine", PosTag::kAdj}}) {
    model_.model_id = "toy";
    model_.encoder_weights = Matrix::Identity(2, 2);
    model_.encoder_bias = Vector::Zero(2);
    model_.head_weights = Matrix(2, 2);
    model_.head_weights << -4, 4,  //
        0, 0;
    model_.head_bias = Vector::Zero(2);
    example_.id = "s0";
    example_.seq = Tokenize("the movie good", vocab_);
    example_.label = 1;

    spec_.name = "toy_greedy";
    spec_.pre.synonym_source = SynonymSource::kLexicon;
    spec_.constraints = {{DistanceMetric::kSentenceCosine, 1.0, ConstraintRole::kPerturbationMetric}};
    spec_.search = SearchStrategy::kGreedyDeletionImportance;
  }

  static RowMatrix MakeRows() {
    RowMatrix rows(7, 2);
    rows << 0.05, 0.5,  // the
        0.0, 1.0,       // movie
        1.0, 0.1,       // good
        0.9, 0.3,       // great
        -1.0, 0.1,      // bad
        0.3, 0.2,       // fine
        0.0, 0.0;       // OOV
    return rows;
  }

  TextResources res() const { return {vocab_, emb_, lexicons_}; }

  Vocab vocab_;
  EmbeddingTable emb_;
  Lexicons lexicons_;
  ClassifierModel model_;
  LabeledExample example_;
  AttackMethodSpec spec_;
};

TEST_F(ToyWorld, NearestNeighborsOrderAndThreshold) {
  // Cosine similarities to "good" (1, 0.1): great 0.975, fine 0.883,
  // the 0.198, movie 0.0995, bad -0.980.
  EXPECT_EQ(NearestNeighbors(2, 3, -1.0, emb_), (std::vector<TokenId>{3, 5, 0}));
  EXPECT_EQ(NearestNeighbors(2, 10, 0.5, emb_), (std::vector<TokenId>{3, 5}));
  EXPECT_TRUE(NearestNeighbors(2, 10, 0.99, emb_).empty());
}

TEST_F(ToyWorld, CandidatesRespectStopwordsAndPos) {
  const TextResources r = res();
  EXPECT_TRUE(CandidateSubstitutions(example_.seq, 0, spec_.pre, r).empty());
  EXPECT_EQ(CandidateSubstitutions(example_.seq, 2, spec_.pre, r), (std::vector<TokenId>{3, 4}));
  EXPECT_EQ(CandidateSubstitutions(example_.seq, 1, spec_.pre, r), (std::vector<TokenId>{5}));

  PreTransformConstraintSet pos = spec_.pre;
  pos.require_same_pos = true;
  EXPECT_TRUE(CandidateSubstitutions(example_.seq, 1, pos, r).empty());

  std::vector<bool> substituted = {false, false, true};
  EXPECT_TRUE(CandidateSubstitutions(example_.seq, 2, spec_.pre, r, &substituted).empty());
  PreTransformConstraintSet repeat = spec_.pre;
  repeat.forbid_repeat_token_changes = false;
  EXPECT_EQ(CandidateSubstitutions(example_.seq, 2, repeat, r, &substituted).size(), 2u);
}

TEST_F(ToyWorld, DistanceMetricsByHand) {
  const TokenSeq flipped = WithSubstitution(example_.seq, 2, 4, vocab_);
  EXPECT_EQ(flipped.surface[2], "bad");
  EXPECT_DOUBLE_EQ(
      PerturbationDistance(example_.seq, flipped, DistanceMetric::kFractionWordsChanged, emb_),
      1.0 / 3.0);
  const double swap = 1.0 - (-1.0 + 0.01) / (1.0 + 0.01);
  EXPECT_NEAR(PerturbationDistance(example_.seq, flipped, DistanceMetric::kWordEmbeddingSwap, emb_),
              swap, 1e-12);
  // Sentence sums (1.05, 1.6) and (-0.95, 1.6).
  const double cos = (1.05 * -0.95 + 1.6 * 1.6) /
                     (std::hypot(1.05, 1.6) * std::hypot(-0.95, 1.6));
  EXPECT_NEAR(PerturbationDistance(example_.seq, flipped, DistanceMetric::kSentenceCosine, emb_),
              1.0 - cos, 1e-12);
  EXPECT_EQ(PerturbationDistance(example_.seq, example_.seq, DistanceMetric::kSentenceCosine, emb_),
            0.0);

  TokenSeq shorter = example_.seq;
  shorter.ids.pop_back();
  EXPECT_ERROR_CODE(
      PerturbationDistance(example_.seq, shorter, DistanceMetric::kSentenceCosine, emb_),
      ErrorCode::kContractViolation);
}

TEST_F(ToyWorld, DeletionRankingPutsPolarityWordFirst) {
  // Removing "good" lowers p(positive); removing "movie" raises it the most.
  EXPECT_EQ(WordImportanceRanking(model_, example_, ImportanceMode::kDeletion, spec_, res()),
            (std::vector<std::size_t>{2, 0, 1}));
}

TEST_F(ToyWorld, GreedyFlipsWithTheAntonym) {
  AttackOutcome out = GreedyAttack(model_, example_, spec_, res());
  ASSERT_TRUE(out.success());
  ASSERT_TRUE(out.adversarial.has_value());
  EXPECT_EQ(Detokenize(*out.adversarial), "the movie bad");
  EXPECT_EQ(out.substituted_positions, (std::vector<std::size_t>{2}));
  const double cos = (1.05 * -0.95 + 1.6 * 1.6) /
                     (std::hypot(1.05, 1.6) * std::hypot(-0.95, 1.6));
  EXPECT_NEAR(out.delta, 1.0 - cos, 1e-12);
  EXPECT_GT(out.queries, 0);
  EXPECT_DOUBLE_EQ(out.delta, BruteForceMin(model_, example_, spec_, res(), 2));
}

TEST_F(ToyWorld, FeasibilityFilterBlocksTheOnlyFlip) {
  spec_.constraints.push_back(
      {DistanceMetric::kWordEmbeddingSwap, 0.5, ConstraintRole::kFeasibilityFilter});
  AttackOutcome out = GreedyAttack(model_, example_, spec_, res());
  EXPECT_EQ(out.status, AttackStatus::kFailure);
  EXPECT_TRUE(std::isinf(out.delta));
  EXPECT_TRUE(std::isinf(BruteForceMin(model_, example_, spec_, res(), 2)));
}

TEST_F(ToyWorld, MisclassifiedSampleIsSkipped) {
  example_.label = 0;
  AttackOutcome out = RunAttack(model_, example_, spec_, res(), 0);
  EXPECT_TRUE(out.skipped());
  EXPECT_TRUE(std::isnan(out.delta));
  EXPECT_ERROR_CODE(BruteForceMin(model_, example_, spec_, res(), 2),
                    ErrorCode::kContractViolation);
}

TEST_F(ToyWorld, PreTransformAudit) {
  const TextResources r = res();
  EXPECT_TRUE(PassesPreTransform(example_.seq, WithSubstitution(example_.seq, 2, 4, vocab_), spec_, r));
  // "the" is a stopword; "movie" -> "good" is not in the lexicon.
  EXPECT_FALSE(PassesPreTransform(example_.seq, WithSubstitution(example_.seq, 0, 1, vocab_), spec_, r));
  EXPECT_FALSE(PassesPreTransform(example_.seq, WithSubstitution(example_.seq, 1, 2, vocab_), spec_, r));
}

TEST(AttackSpecTest, ValidateRejectsMalformedSpecs) {
  AttackMethodSpec spec;
  spec.name = "x";
  EXPECT_ERROR_CODE(spec.Validate(), ErrorCode::kConfig);  // no perturbation metric
  spec.constraints = {{DistanceMetric::kSentenceCosine, 0.1, ConstraintRole::kPerturbationMetric},
                      {DistanceMetric::kFractionWordsChanged, 0.1, ConstraintRole::kPerturbationMetric}};
  EXPECT_ERROR_CODE(spec.Validate(), ErrorCode::kConfig);
  spec.constraints.pop_back();
  EXPECT_NO_THROW(spec.Validate());
  spec.constraints[0].threshold = -1.0;
  EXPECT_ERROR_CODE(spec.Validate(), ErrorCode::kConfig);
  spec.constraints[0].threshold = 0.1;
  spec.search = SearchStrategy::kGenetic;
  EXPECT_ERROR_CODE(spec.Validate(), ErrorCode::kConfig);
}

TEST(AttackSpecTest, PresetsRoundTripThroughJson) {
  const auto presets = DefaultAttackPresets();
  ASSERT_EQ(presets.size(), 4u);
  for (const auto& [name, spec] : presets) EXPECT_NO_THROW(spec.Validate()) << name;
  const std::string text = AttackSpecsToJson(presets);
  EXPECT_EQ(AttackSpecsToJson(AttackSpecsFromJson(text)), text);
  EXPECT_ERROR_CODE(AttackSpecsFromJson("{\"m\": {\"search\": \"annealing\"}}"), ErrorCode::kConfig);
}

// The search result is a feasible, class-flipping member of the enumerated
// set, so it can never beat the exhaustive minimum.
TEST(TinyInstanceTest, EstimateIsAnUpperBoundOfTheOracle) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto inst = testing::MakeTinyInstance(seed);
    const TextResources res = inst->resources();
    const double estimate = MinPerturbation(inst->model, inst->example, inst->spec, res);
    const double exact = BruteForceMin(inst->model, inst->example, inst->spec, res, inst->max_subs);
    EXPECT_GE(estimate, exact - 1e-12) << "seed " << seed;
    if (std::isfinite(estimate)) {
      EXPECT_TRUE(std::isfinite(exact)) << "seed " << seed;
    }
  }
}

TEST(TinyInstanceTest, SuccessfulOutcomesPassEveryAudit) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto inst = testing::MakeTinyInstance(seed);
    const TextResources res = inst->resources();
    AttackOutcome out = RunAttack(inst->model, inst->example, inst->spec, res, 0);
    if (!out.success()) continue;
    const TokenSeq& adv = *out.adversarial;
    EXPECT_NE(Predict(inst->model, adv, res.emb), inst->example.label) << seed;
    EXPECT_TRUE(PassesPreTransform(inst->example.seq, adv, inst->spec, res)) << seed;
    EXPECT_TRUE(PassesFeasibility(inst->example.seq, adv, inst->spec, res.emb)) << seed;
    EXPECT_DOUBLE_EQ(out.delta, PerturbationDistance(inst->example.seq, adv,
                                                     DistanceMetric::kSentenceCosine, res.emb));
    EXPECT_LE(out.delta, out.first_success_delta + 1e-12) << seed;
  }
}

TEST(TinyInstanceTest, BruteForceBudgetIsEnforced) {
  auto inst = testing::MakeTinyInstance(3);
  const TextResources res = inst->resources();
  // A 64-token sequence with up to six substitutions is far beyond the
  // enumeration budget.
  LabeledExample big = inst->example;
  for (int i = 0; i < 60; ++i) {
    big.seq.ids.push_back(big.seq.ids[1 + static_cast<std::size_t>(i) % (inst->example.seq.size() - 1)]);
    big.seq.surface.push_back(inst->vocab.Token(big.seq.ids.back()));
  }
  big.label = Predict(inst->model, big.seq, res.emb);
  AttackMethodSpec spec = inst->spec;
  spec.pre.forbid_stopword_changes = false;
  spec.constraints.pop_back();
  EXPECT_ERROR_CODE(BruteForceMin(inst->model, big, spec, res, 6), ErrorCode::kBudgetExceeded);
}

TEST(GeneticTest, SameSeedSameOutcome) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto inst = testing::MakeTinyInstance(seed);
    inst->spec.search = SearchStrategy::kGenetic;
    inst->spec.genetic = GeneticParams{8, 10, 0.5, 3};
    const TextResources res = inst->resources();
    AttackOutcome a = RunAttack(inst->model, inst->example, inst->spec, res, 42);
    AttackOutcome b = RunAttack(inst->model, inst->example, inst->spec, res, 42);
    EXPECT_EQ(ToRecord(a), ToRecord(b)) << seed;
    EXPECT_EQ(a.adversarial, b.adversarial) << seed;
    if (a.success()) {
      EXPECT_NE(Predict(inst->model, *a.adversarial, res.emb), inst->example.label);
      EXPECT_TRUE(PassesFeasibility(inst->example.seq, *a.adversarial, inst->spec, res.emb));
    }
  }
}

TEST(GeneticTest, NextGenerationKeepsSizeEliteAndAdmissibility) {
  auto inst = testing::MakeTinyInstance(5);
  inst->spec.search = SearchStrategy::kGenetic;
  inst->spec.genetic = GeneticParams{6, 5, 1.0, 0};
  const TextResources res = inst->resources();
  const TokenSeq& x = inst->example.seq;
  std::vector<TokenSeq> population(6, x);
  std::vector<double> fitness = {0.9, 0.8, 0.2, 0.7, 0.6, 0.5};
  // Give the fittest member a distinguishing admissible edit if one exists.
  for (std::size_t p = 0; p < x.size(); ++p) {
    const auto cands = CandidateSubstitutions(x, p, inst->spec.pre, res);
    if (!cands.empty()) {
      population[2] = WithSubstitution(x, p, cands[0], inst->vocab);
      break;
    }
  }
  Rng rng(17);
  const auto next = NextGeneration(population, fitness, inst->example, inst->spec, res, rng);
  ASSERT_EQ(next.size(), 6u);
  EXPECT_EQ(next[0], population[2]);
  for (const auto& member : next) {
    EXPECT_TRUE(PassesPreTransform(x, member, inst->spec, res));
    EXPECT_TRUE(PassesFeasibility(x, member, inst->spec, res.emb));
  }
  EXPECT_ERROR_CODE(NextGeneration(population, {0.1}, inst->example, inst->spec, res, rng),
                    ErrorCode::kContractViolation);
}

TEST(RunAttacksTest, OrderDoesNotDependOnThreads) {
  std::vector<std::unique_ptr<testing::TinyInstance>> insts;
  for (std::uint64_t seed = 0; seed < 3; ++seed) insts.push_back(testing::MakeTinyInstance(seed));
  // Every tiny instance shares the same vocabulary, so examples from other
  // seeds can be attacked with instance 0's model and resources.
  Dataset data;
  for (std::uint64_t seed = 10; seed < 16; ++seed) {
    auto other = testing::MakeTinyInstance(seed);
    LabeledExample ex = other->example;
    ex.id = "ex" + std::to_string(seed);
    ex.label = Predict(insts[0]->model, ex.seq, insts[0]->emb);
    data.examples.push_back(ex);
  }
  std::vector<const ClassifierModel*> models = {&insts[0]->model};
  const TextResources res = insts[0]->resources();
  const auto one = RunAttacks(models, data, insts[0]->spec, res, 5, 1);
  const auto three = RunAttacks(models, data, insts[0]->spec, res, 5, 3);
  ASSERT_EQ(one.size(), data.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].sample_id, data.examples[i].id);
    EXPECT_EQ(ToRecord(one[i]), ToRecord(three[i]));
  }
}

std::vector<PerturbationRecord> SampleRecords() {
  return {{"a", "m1", "x", AttackStatus::kSuccess, 0.05, 10},
          {"b", "m1", "x", AttackStatus::kSuccess, 0.3, 12},
          {"c", "m1", "x", AttackStatus::kFailure, kInf, 40},
          {"d", "m1", "x", AttackStatus::kSkipped, std::nan(""), 1}};
}

TEST(RecordsTest, CsvRoundTrip) {
  const auto records = SampleRecords();
  const std::string csv = RecordsToCsv(records);
  EXPECT_EQ(csv,
            "sample_id,model_id,method,success,delta,queries\n"
            "a,m1,x,1,0.05,10\n"
            "b,m1,x,1,0.3,12\n"
            "c,m1,x,0,inf,40\n"
            "d,m1,x,0,nan,1\n");
  EXPECT_EQ(RecordsFromCsv(csv, "records"), records);
}

TEST(RecordsTest, InconsistentRowsAreParseErrors) {
  const std::string header = "sample_id,model_id,method,success,delta,queries\n";
  EXPECT_ERROR_CODE(RecordsFromCsv(header + "a,m,x,1,inf,3\n", "r"), ErrorCode::kParse);
  EXPECT_ERROR_CODE(RecordsFromCsv(header + "a,m,x,0,0.2,3\n", "r"), ErrorCode::kParse);
  EXPECT_ERROR_CODE(RecordsFromCsv(header + "a,m,x,2,0.2,3\n", "r"), ErrorCode::kParse);
  EXPECT_ERROR_CODE(RecordsFromCsv(header + "a,m,x,1,0.2\n", "r"), ErrorCode::kParse);
  EXPECT_ERROR_CODE(RecordsFromCsv(header + "a,m,x,1,abc,3\n", "r"), ErrorCode::kParse);
}

AttackMethodSpec SpecWithThreshold(double threshold) {
  AttackMethodSpec spec;
  spec.name = "x";
  spec.constraints = {{DistanceMetric::kSentenceCosine, threshold, ConstraintRole::kPerturbationMetric}};
  return spec;
}

TEST(FoolingRateTest, CountsOnlyAttackedSamplesWithinThreshold) {
  const auto records = SampleRecords();
  EXPECT_DOUBLE_EQ(FoolingRate(records, SpecWithThreshold(0.1)), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(FoolingRate(records, SpecWithThreshold(0.3)), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(FoolingRate(records, SpecWithThreshold(kInf)), 2.0 / 3.0);
  EXPECT_ERROR_CODE(FoolingRate(std::vector<PerturbationRecord>{records[3]}, SpecWithThreshold(1)),
                    ErrorCode::kUndefinedRate);
}

TEST(FoolingRateTest, MonotoneInThreshold) {
  const auto records = SampleRecords();
  double previous = 0.0;
  for (double t = 0.0; t <= 0.5; t += 0.01) {
    const double rate = FoolingRate(records, SpecWithThreshold(t));
    EXPECT_GE(rate, previous);
    previous = rate;
  }
}

TEST(FoolingRateTest, UnionIsIdempotentAndDominatesEachMethod) {
  const auto a = SampleRecords();
  std::vector<PerturbationRecord> b = {{"a", "m1", "y", AttackStatus::kFailure, kInf, 3},
                                       {"b", "m1", "y", AttackStatus::kFailure, kInf, 3},
                                       {"c", "m1", "y", AttackStatus::kSuccess, 0.01, 3},
                                       {"d", "m1", "y", AttackStatus::kSkipped, std::nan(""), 1}};
  const AttackMethodSpec spec = SpecWithThreshold(0.1);
  EXPECT_DOUBLE_EQ(UnionFoolingRate({a}, {spec}), FoolingRate(a, spec));
  EXPECT_DOUBLE_EQ(UnionFoolingRate({a, a}, {spec, spec}), FoolingRate(a, spec));
  const double both = UnionFoolingRate({a, b}, {spec, spec});
  EXPECT_DOUBLE_EQ(both, 2.0 / 3.0);
  EXPECT_GE(both, std::max(FoolingRate(a, spec), FoolingRate(b, spec)));
  EXPECT_ERROR_CODE(UnionFoolingRate({a, b}, {spec}), ErrorCode::kContractViolation);
}

}  // namespace
}  // namespace attackscope
