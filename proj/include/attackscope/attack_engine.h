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

// Word-substitution attacks built from three parts:
//
//   * pre-transformation constraints, which decide the admissible
//     replacements at each position (the available set of sequences);
//   * distance constraints, one of which measures the perturbation size
//     while the others act as hard feasibility filters;
//   * a search strategy (greedy by deletion importance, greedy by saliency,
//     or a genetic search).
//
// A successful search is followed by a minimization pass so the reported
// perturbation size estimates the smallest class-flipping perturbation in
// the available set. BruteForceMin evaluates that minimum exactly on tiny
// instances and serves as the test oracle.

#ifndef ATTACKSCOPE_ATTACK_ENGINE_H_
#define ATTACKSCOPE_ATTACK_ENGINE_H_

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "attackscope/classifier.h"
#include "attackscope/rng.h"
#include "attackscope/text_core.h"

namespace attackscope {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class SynonymSource { kEmbeddingKnn, kLexicon };

struct PreTransformConstraintSet {
  bool forbid_repeat_token_changes = true;
  bool forbid_stopword_changes = true;
  bool require_same_pos = false;
  SynonymSource synonym_source = SynonymSource::kEmbeddingKnn;
  int knn_k = 8;
  double knn_min_similarity = 0.5;
};

enum class DistanceMetric { kSentenceCosine, kWordEmbeddingSwap, kFractionWordsChanged };
enum class ConstraintRole { kPerturbationMetric, kFeasibilityFilter };

struct DistanceConstraint {
  DistanceMetric metric = DistanceMetric::kSentenceCosine;
  double threshold = 0.0;
  ConstraintRole role = ConstraintRole::kPerturbationMetric;
};

enum class SearchStrategy { kGreedyDeletionImportance, kGreedySaliency, kGenetic };

struct GeneticParams {
  int population = 20;
  int generations = 30;
  double mutation_rate = 0.3;
  std::uint64_t seed = 0;
};

struct AttackMethodSpec {
  std::string name;
  PreTransformConstraintSet pre;
  std::vector<DistanceConstraint> constraints;
  SearchStrategy search = SearchStrategy::kGreedyDeletionImportance;
  std::optional<GeneticParams> genetic;

  // Throws kConfig unless exactly one constraint is the perturbation metric,
  // thresholds are non-negative, knn_k >= 1 for embedding neighbours and
  // genetic parameters accompany the genetic search.
  void Validate() const;
  const DistanceConstraint& perturbation_metric() const;
};

std::string_view SynonymSourceName(SynonymSource source);
std::string_view DistanceMetricName(DistanceMetric metric);
std::string_view ConstraintRoleName(ConstraintRole role);
std::string_view SearchStrategyName(SearchStrategy search);
DistanceMetric ParseDistanceMetric(std::string_view name);
SearchStrategy ParseSearchStrategy(std::string_view name);

// Specs keyed by method name. JSON layout per method:
//   {"pre_transform": {...}, "distance_constraints": [{metric, threshold, role}],
//    "search": "...", "genetic": {population, generations, mutation_rate, seed}}
std::map<std::string, AttackMethodSpec> AttackSpecsFromJson(std::string_view text);
std::string AttackSpecsToJson(const std::map<std::string, AttackMethodSpec>& specs);

// tf_like, bae_like, pwws_like and iga_like presets mirroring the constraint
// check-marks of the four reference attacks.
std::map<std::string, AttackMethodSpec> DefaultAttackPresets();

// Borrowed, immutable resources shared by all attacks.
struct TextResources {
  const Vocab& vocab;
  const EmbeddingTable& emb;
  const Lexicons& lexicons;
};

enum class AttackStatus { kSuccess, kFailure, kSkipped };

struct AttackOutcome {
  std::string sample_id;
  std::string model_id;
  std::string method;
  AttackStatus status = AttackStatus::kFailure;
  std::optional<TokenSeq> adversarial;
  // Perturbation size of the final adversarial example; +inf on failure and
  // NaN when skipped.
  double delta = kInf;
  // Perturbation size of the first class flip, before minimization.
  double first_success_delta = kInf;
  std::vector<std::size_t> substituted_positions;
  std::int64_t queries = 0;

  bool success() const { return status == AttackStatus::kSuccess; }
  bool skipped() const { return status == AttackStatus::kSkipped; }
};

// One row of the perturbation-record table
// (sample_id,model_id,method,success,delta,queries). Failed attacks carry
// delta inf; samples skipped because the model already misclassifies them
// carry nan.
struct PerturbationRecord {
  std::string sample_id;
  std::string model_id;
  std::string method;
  AttackStatus status = AttackStatus::kFailure;
  double delta = kInf;
  std::int64_t queries = 0;

  bool success() const { return status == AttackStatus::kSuccess; }
  bool skipped() const { return status == AttackStatus::kSkipped; }
  bool operator==(const PerturbationRecord& other) const;
};

PerturbationRecord ToRecord(const AttackOutcome& outcome);
std::string RecordsToCsv(const std::vector<PerturbationRecord>& records);
// Throws kParse on malformed rows or on a success flag inconsistent with
// the delta value.
std::vector<PerturbationRecord> RecordsFromCsv(std::string_view text, const std::string& what);

// Replacement candidates for `position`, always drawn for the original
// token. `substituted` marks positions already changed (consulted only when
// repeat changes are forbidden).
std::vector<TokenId> CandidateSubstitutions(const TokenSeq& original, std::size_t position,
                                            const PreTransformConstraintSet& pre,
                                            const TextResources& res,
                                            const std::vector<bool>* substituted = nullptr);

// Ids of the k most cosine-similar tokens with similarity >= min_similarity,
// excluding `token` and the OOV id. Ties go to the lower id.
std::vector<TokenId> NearestNeighbors(TokenId token, int k, double min_similarity,
                                      const EmbeddingTable& emb);

// Requires equal lengths (kContractViolation otherwise).
double PerturbationDistance(const TokenSeq& original, const TokenSeq& perturbed,
                            DistanceMetric metric, const EmbeddingTable& emb);

// True when every feasibility-filter constraint holds.
bool PassesFeasibility(const TokenSeq& original, const TokenSeq& perturbed,
                       const AttackMethodSpec& spec, const EmbeddingTable& emb);

// Pre-transformation audit of a finished adversarial sequence: each changed
// position must hold an admissible candidate for the original token.
bool PassesPreTransform(const TokenSeq& original, const TokenSeq& perturbed,
                        const AttackMethodSpec& spec, const TextResources& res);

TokenSeq WithSubstitution(const TokenSeq& seq, std::size_t position, TokenId replacement,
                          const Vocab& vocab);

enum class ImportanceMode { kDeletion, kSaliency };

// Positions ordered by how much the true-class probability drops when the
// token is removed (replaced by OOV) or, in saliency mode, replaced by its
// best admissible candidate. Ties go to the leftmost position.
std::vector<std::size_t> WordImportanceRanking(const ClassifierModel& model,
                                               const LabeledExample& example,
                                               ImportanceMode mode, const AttackMethodSpec& spec,
                                               const TextResources& res,
                                               std::int64_t* queries = nullptr);

AttackOutcome GreedyAttack(const ClassifierModel& model, const LabeledExample& example,
                           const AttackMethodSpec& spec, const TextResources& res);

// `rng_seed` seeds the search; see AttackSeed for the per-sample derivation.
AttackOutcome GeneticAttack(const ClassifierModel& model, const LabeledExample& example,
                            const AttackMethodSpec& spec, const TextResources& res,
                            std::uint64_t rng_seed);

// One generation step of the genetic search, exposed for tests. `fitness`
// holds the true-class probability of each member (lower is fitter).
std::vector<TokenSeq> NextGeneration(const std::vector<TokenSeq>& population,
                                     const std::vector<double>& fitness,
                                     const LabeledExample& example, const AttackMethodSpec& spec,
                                     const TextResources& res, Rng& rng);

// Dispatches on the spec's search strategy.
AttackOutcome RunAttack(const ClassifierModel& model, const LabeledExample& example,
                        const AttackMethodSpec& spec, const TextResources& res,
                        std::uint64_t global_seed);

std::uint64_t AttackSeed(std::uint64_t global_seed, const AttackMethodSpec& spec,
                         std::string_view sample_id, std::string_view model_id);

// Estimated minimum perturbation size: the search result after the
// revert-then-swap minimization pass, +inf when no attack succeeds. This is
// an upper bound on the exact minimum.
double MinPerturbation(const ClassifierModel& model, const LabeledExample& example,
                       const AttackMethodSpec& spec, const TextResources& res,
                       std::uint64_t global_seed = 0);

// Exact minimum over every sequence reachable with at most `max_subs`
// admissible substitutions that passes the feasibility filters and flips the
// prediction; +inf if none. Throws kBudgetExceeded above 10^6 sequences.
double BruteForceMin(const ClassifierModel& model, const LabeledExample& example,
                     const AttackMethodSpec& spec, const TextResources& res, int max_subs);

inline constexpr std::uint64_t kBruteForceBudget = 1'000'000;

// Runs the attack over every (example, model) pair, in parallel over
// `threads` workers. Output order is model-major, then dataset order, and
// does not depend on the thread count.
std::vector<AttackOutcome> RunAttacks(const std::vector<const ClassifierModel*>& models,
                                      const Dataset& data, const AttackMethodSpec& spec,
                                      const TextResources& res, std::uint64_t global_seed,
                                      int threads);

// Fraction of attacked (correctly classified) samples whose minimized
// perturbation stays within the perturbation metric's threshold. Throws
// kUndefinedRate when no sample was attacked.
double FoolingRate(const std::vector<AttackOutcome>& outcomes, const AttackMethodSpec& spec);
double FoolingRate(const std::vector<PerturbationRecord>& records, const AttackMethodSpec& spec);
double FoolingRate(const ClassifierModel& model, const Dataset& data, const AttackMethodSpec& spec,
                   const TextResources& res, std::uint64_t global_seed = 0);

// A sample counts once if any method fools it. Each outcome list belongs to
// the spec at the same index; lists are matched by sample id.
double UnionFoolingRate(const std::vector<std::vector<AttackOutcome>>& outcomes,
                        const std::vector<AttackMethodSpec>& specs);
double UnionFoolingRate(const std::vector<std::vector<PerturbationRecord>>& records,
                        const std::vector<AttackMethodSpec>& specs);
double UnionFoolingRate(const ClassifierModel& model, const Dataset& data,
                        const std::vector<AttackMethodSpec>& specs, const TextResources& res,
                        std::uint64_t global_seed = 0);

}  // namespace attackscope

#endif  // ATTACKSCOPE_ATTACK_ENGINE_H_
