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
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>
#include <utility>

#include "attackscope/csv.h"
#include "attackscope/error.h"
#include "json_util.h"

namespace attackscope {

namespace {

using internal::json;

// Counts model evaluations and treats unscorable sequences as uninformative.
class Scorer {
 public:
  Scorer(const ClassifierModel& model, const EmbeddingTable& emb) : model_(model), emb_(emb) {}

  Vector Proba(const TokenSeq& seq) {
    ++queries_;
    try {
      return PredictProba(model_, seq, emb_);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoEmbeddableContent) throw;
      return Vector::Constant(model_.num_classes(), 1.0 / model_.num_classes());
    }
  }

  std::int64_t queries() const { return queries_; }

 private:
  const ClassifierModel& model_;
  const EmbeddingTable& emb_;
  std::int64_t queries_ = 0;
};

std::vector<std::size_t> ChangedPositions(const TokenSeq& original, const TokenSeq& perturbed) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < original.size(); ++i) {
    if (original.ids[i] != perturbed.ids[i]) out.push_back(i);
  }
  return out;
}

// Shrinks a successful adversarial example: best-first reverts while the
// flip survives, then per-position swaps to the admissible candidate with
// the smallest perturbation, then relocation and two-position moves. Every
// accepted move lowers (distance, substitution count) lexicographically, so
// the loop terminates.
TokenSeq Minimize(const TokenSeq& original, TokenSeq adversarial, int label,
                  const AttackMethodSpec& spec, const TextResources& res, Scorer& scorer) {
  const DistanceMetric metric = spec.perturbation_metric().metric;
  auto distance = [&](const TokenSeq& s) { return PerturbationDistance(original, s, metric, res.emb); };
  auto keeps_flip = [&](const TokenSeq& s) {
    return PassesFeasibility(original, s, spec, res.emb) && ArgMax(scorer.Proba(s)) != label;
  };

  double current = distance(adversarial);
  for (bool improved = true; improved;) {
    improved = false;

    // Revert step.
    for (;;) {
      std::optional<TokenSeq> best;
      double best_distance = kInf;
      for (std::size_t p : ChangedPositions(original, adversarial)) {
        TokenSeq trial = WithSubstitution(adversarial, p, original.ids[p], res.vocab);
        const double d = distance(trial);
        if (d <= current && d < best_distance && keeps_flip(trial)) {
          best = std::move(trial);
          best_distance = d;
        }
      }
      if (!best) break;
      adversarial = std::move(*best);
      current = best_distance;
      improved = true;
    }

    // Swap step.
    for (std::size_t p : ChangedPositions(original, adversarial)) {
      for (TokenId c : CandidateSubstitutions(original, p, spec.pre, res)) {
        if (c == adversarial.ids[p]) continue;
        TokenSeq trial = WithSubstitution(adversarial, p, c, res.vocab);
        const double d = distance(trial);
        if (d < current && keeps_flip(trial)) {
          adversarial = std::move(trial);
          current = d;
          improved = true;
        }
      }
    }
    if (improved) continue;

    // Relocation step: move one substitution to an unchanged position.
    const auto changed = ChangedPositions(original, adversarial);
    for (std::size_t p : changed) {
      const TokenSeq reverted = WithSubstitution(adversarial, p, original.ids[p], res.vocab);
      for (std::size_t q = 0; q < original.size() && !improved; ++q) {
        if (q == p || adversarial.ids[q] != original.ids[q]) continue;
        for (TokenId c : CandidateSubstitutions(original, q, spec.pre, res)) {
          TokenSeq trial = WithSubstitution(reverted, q, c, res.vocab);
          const double d = distance(trial);
          if (d < current && keeps_flip(trial)) {
            adversarial = std::move(trial);
            current = d;
            improved = true;
            break;
          }
        }
      }
      if (improved) break;
    }
    if (improved) continue;

    // Two-position step: re-choose one existing substitution (or revert it)
    // while adding a substitution elsewhere.
    for (std::size_t p : changed) {
      std::vector<TokenId> values = CandidateSubstitutions(original, p, spec.pre, res);
      values.push_back(original.ids[p]);
      for (TokenId v : values) {
        const TokenSeq base = WithSubstitution(adversarial, p, v, res.vocab);
        for (std::size_t q = 0; q < original.size() && !improved; ++q) {
          if (q == p || adversarial.ids[q] != original.ids[q]) continue;
          for (TokenId c : CandidateSubstitutions(original, q, spec.pre, res)) {
            TokenSeq trial = WithSubstitution(base, q, c, res.vocab);
            const double d = distance(trial);
            if (d < current && keeps_flip(trial)) {
              adversarial = std::move(trial);
              current = d;
              improved = true;
              break;
            }
          }
        }
        if (improved) break;
      }
      if (improved) break;
    }
  }
  return adversarial;
}

AttackOutcome MakeOutcome(const ClassifierModel& model, const LabeledExample& example,
                          const AttackMethodSpec& spec) {
  AttackOutcome out;
  out.sample_id = example.id;
  out.model_id = model.model_id;
  out.method = spec.name;
  return out;
}

AttackOutcome Skipped(AttackOutcome out) {
  out.status = AttackStatus::kSkipped;
  out.delta = std::numeric_limits<double>::quiet_NaN();
  out.first_success_delta = out.delta;
  return out;
}

void FinishSuccess(AttackOutcome& out, const LabeledExample& example, const TokenSeq& first_flip,
                   const AttackMethodSpec& spec, const TextResources& res, Scorer& scorer) {
  const DistanceMetric metric = spec.perturbation_metric().metric;
  out.first_success_delta = PerturbationDistance(example.seq, first_flip, metric, res.emb);
  TokenSeq best = Minimize(example.seq, first_flip, example.label, spec, res, scorer);
  out.status = AttackStatus::kSuccess;
  out.delta = PerturbationDistance(example.seq, best, metric, res.emb);
  out.substituted_positions = ChangedPositions(example.seq, best);
  out.adversarial = std::move(best);
}

bool IsCorrect(const LabeledExample& example, Scorer& scorer) {
  return ArgMax(scorer.Proba(example.seq)) == example.label;
}

double TrueClassProb(const Vector& proba, int label) { return proba(label); }

// Positions (of the original sequence) that may still change, with the
// admissible candidates for each.
struct SubstitutionSpace {
  std::vector<std::vector<TokenId>> candidates;
  std::vector<std::size_t> open_positions;
};

SubstitutionSpace BuildSpace(const TokenSeq& original, const PreTransformConstraintSet& pre,
                             const TextResources& res) {
  SubstitutionSpace space;
  space.candidates.resize(original.size());
  for (std::size_t p = 0; p < original.size(); ++p) {
    space.candidates[p] = CandidateSubstitutions(original, p, pre, res);
    if (!space.candidates[p].empty()) space.open_positions.push_back(p);
  }
  return space;
}

// One random admissible, feasible substitution applied to `seq`, or nullopt
// after a bounded number of tries.
std::optional<TokenSeq> RandomSubstitution(const TokenSeq& seq, const TokenSeq& original,
                                           const SubstitutionSpace& space,
                                           const AttackMethodSpec& spec, const TextResources& res,
                                           Rng& rng) {
  std::vector<std::size_t> positions;
  for (std::size_t p : space.open_positions) {
    if (spec.pre.forbid_repeat_token_changes && seq.ids[p] != original.ids[p]) continue;
    positions.push_back(p);
  }
  if (positions.empty()) return std::nullopt;
  const std::size_t tries = 4 * positions.size() + 8;
  for (std::size_t t = 0; t < tries; ++t) {
    const std::size_t p = positions[UniformIndex(rng, positions.size())];
    const auto& cands = space.candidates[p];
    const TokenId c = cands[UniformIndex(rng, cands.size())];
    if (c == seq.ids[p]) continue;
    TokenSeq trial = WithSubstitution(seq, p, c, res.vocab);
    if (PassesFeasibility(original, trial, spec, res.emb)) return trial;
  }
  return std::nullopt;
}

json PreToJson(const PreTransformConstraintSet& pre) {
  return json{{"forbid_repeat_token_changes", pre.forbid_repeat_token_changes},
              {"forbid_stopword_changes", pre.forbid_stopword_changes},
              {"require_same_pos", pre.require_same_pos},
              {"synonym_source", std::string(SynonymSourceName(pre.synonym_source))},
              {"knn_k", pre.knn_k},
              {"knn_min_similarity", pre.knn_min_similarity}};
}

PreTransformConstraintSet PreFromJson(const json& j) {
  PreTransformConstraintSet pre;
  pre.forbid_repeat_token_changes = j.value("forbid_repeat_token_changes", pre.forbid_repeat_token_changes);
  pre.forbid_stopword_changes = j.value("forbid_stopword_changes", pre.forbid_stopword_changes);
  pre.require_same_pos = j.value("require_same_pos", pre.require_same_pos);
  const std::string source = j.value("synonym_source", std::string("embedding_knn"));
  if (source == "embedding_knn") {
    pre.synonym_source = SynonymSource::kEmbeddingKnn;
  } else if (source == "lexicon") {
    pre.synonym_source = SynonymSource::kLexicon;
  } else {
    throw Error(ErrorCode::kConfig, "unknown synonym_source '" + source + "'");
  }
  pre.knn_k = j.value("knn_k", pre.knn_k);
  pre.knn_min_similarity = j.value("knn_min_similarity", pre.knn_min_similarity);
  return pre;
}

}  // namespace

std::string_view SynonymSourceName(SynonymSource source) {
  return source == SynonymSource::kEmbeddingKnn ? "embedding_knn" : "lexicon";
}

std::string_view DistanceMetricName(DistanceMetric metric) {
  switch (metric) {
    case DistanceMetric::kSentenceCosine: return "sentence_cosine";
    case DistanceMetric::kWordEmbeddingSwap: return "word_embedding_swap";
    case DistanceMetric::kFractionWordsChanged: return "fraction_words_changed";
  }
  return "sentence_cosine";
}

std::string_view ConstraintRoleName(ConstraintRole role) {
  return role == ConstraintRole::kPerturbationMetric ? "perturbation_metric" : "feasibility_filter";
}

std::string_view SearchStrategyName(SearchStrategy search) {
  switch (search) {
    case SearchStrategy::kGreedyDeletionImportance: return "greedy_deletion_importance";
    case SearchStrategy::kGreedySaliency: return "greedy_saliency";
    case SearchStrategy::kGenetic: return "genetic";
  }
  return "greedy_deletion_importance";
}

DistanceMetric ParseDistanceMetric(std::string_view name) {
  for (auto m : {DistanceMetric::kSentenceCosine, DistanceMetric::kWordEmbeddingSwap,
                 DistanceMetric::kFractionWordsChanged}) {
    if (DistanceMetricName(m) == name) return m;
  }
  throw Error(ErrorCode::kConfig, "unknown distance metric '" + std::string(name) + "'");
}

SearchStrategy ParseSearchStrategy(std::string_view name) {
  for (auto s : {SearchStrategy::kGreedyDeletionImportance, SearchStrategy::kGreedySaliency,
                 SearchStrategy::kGenetic}) {
    if (SearchStrategyName(s) == name) return s;
  }
  throw Error(ErrorCode::kConfig, "unknown search strategy '" + std::string(name) + "'");
}

void AttackMethodSpec::Validate() const {
  if (name.empty()) throw Error(ErrorCode::kConfig, "attack spec without a name");
  int metrics = 0;
  for (const auto& c : constraints) {
    if (!(c.threshold >= 0.0)) throw Error(ErrorCode::kConfig, name + ": negative threshold");
    if (c.role == ConstraintRole::kPerturbationMetric) ++metrics;
  }
  if (metrics != 1) {
    throw Error(ErrorCode::kConfig, name + ": needs exactly one perturbation_metric constraint");
  }
  if (pre.synonym_source == SynonymSource::kEmbeddingKnn && pre.knn_k < 1) {
    throw Error(ErrorCode::kConfig, name + ": knn_k must be >= 1");
  }
  if (search == SearchStrategy::kGenetic) {
    if (!genetic) throw Error(ErrorCode::kConfig, name + ": genetic search needs genetic params");
    if (genetic->population < 1 || genetic->generations < 1 || genetic->mutation_rate < 0.0 ||
        genetic->mutation_rate > 1.0) {
      throw Error(ErrorCode::kConfig, name + ": invalid genetic params");
    }
  }
}

const DistanceConstraint& AttackMethodSpec::perturbation_metric() const {
  for (const auto& c : constraints) {
    if (c.role == ConstraintRole::kPerturbationMetric) return c;
  }
  throw Error(ErrorCode::kConfig, name + ": no perturbation_metric constraint");
}

std::map<std::string, AttackMethodSpec> AttackSpecsFromJson(std::string_view text) {
  const json root = internal::ParseJson(text, "attack specs");
  if (!root.is_object()) throw Error(ErrorCode::kConfig, "attack specs must be a JSON object");
  std::map<std::string, AttackMethodSpec> specs;
  for (const auto& [name, body] : root.items()) {
    AttackMethodSpec spec;
    spec.name = name;
    try {
      spec.pre = PreFromJson(body.value("pre_transform", json::object()));
      for (const auto& c : body.at("distance_constraints")) {
        DistanceConstraint dc;
        dc.metric = ParseDistanceMetric(c.at("metric").get<std::string>());
        const json& threshold = c.at("threshold");
        dc.threshold = threshold.is_string() && threshold.get<std::string>() == "inf"
                           ? kInf
                           : threshold.get<double>();
        const std::string role = c.value("role", std::string("feasibility_filter"));
        if (role == "perturbation_metric") {
          dc.role = ConstraintRole::kPerturbationMetric;
        } else if (role == "feasibility_filter") {
          dc.role = ConstraintRole::kFeasibilityFilter;
        } else {
          throw Error(ErrorCode::kConfig, name + ": unknown role '" + role + "'");
        }
        spec.constraints.push_back(dc);
      }
      spec.search = ParseSearchStrategy(body.at("search").get<std::string>());
      if (body.contains("genetic")) {
        const json& g = body["genetic"];
        GeneticParams params;
        params.population = g.value("population", params.population);
        params.generations = g.value("generations", params.generations);
        params.mutation_rate = g.value("mutation_rate", params.mutation_rate);
        params.seed = g.value("seed", params.seed);
        spec.genetic = params;
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfig, "attack spec '" + name + "': " + e.what());
    }
    spec.Validate();
    specs.emplace(name, std::move(spec));
  }
  return specs;
}

std::string AttackSpecsToJson(const std::map<std::string, AttackMethodSpec>& specs) {
  json root = json::object();
  for (const auto& [name, spec] : specs) {
    json body;
    body["pre_transform"] = PreToJson(spec.pre);
    json constraints = json::array();
    for (const auto& c : spec.constraints) {
      json threshold = std::isinf(c.threshold) ? json("inf") : json(c.threshold);
      constraints.push_back({{"metric", std::string(DistanceMetricName(c.metric))},
                             {"threshold", threshold},
                             {"role", std::string(ConstraintRoleName(c.role))}});
    }
    body["distance_constraints"] = constraints;
    body["search"] = std::string(SearchStrategyName(spec.search));
    if (spec.genetic) {
      body["genetic"] = {{"population", spec.genetic->population},
                         {"generations", spec.genetic->generations},
                         {"mutation_rate", spec.genetic->mutation_rate},
                         {"seed", spec.genetic->seed}};
    }
    root[name] = body;
  }
  return root.dump(2) + "\n";
}

std::map<std::string, AttackMethodSpec> DefaultAttackPresets() {
  std::map<std::string, AttackMethodSpec> presets;

  AttackMethodSpec tf;
  tf.name = "tf_like";
  tf.pre = {.forbid_repeat_token_changes = true,
            .forbid_stopword_changes = true,
            .require_same_pos = true,
            .synonym_source = SynonymSource::kEmbeddingKnn,
            .knn_k = 8,
            .knn_min_similarity = 0.5};
  tf.constraints = {
      {DistanceMetric::kSentenceCosine, 0.2, ConstraintRole::kPerturbationMetric},
      {DistanceMetric::kWordEmbeddingSwap, 0.5, ConstraintRole::kFeasibilityFilter}};
  tf.search = SearchStrategy::kGreedyDeletionImportance;
  presets.emplace(tf.name, tf);

  // No word-embedding filter and a looser neighbourhood: a different
  // available set and a single distance constraint.
  AttackMethodSpec bae;
  bae.name = "bae_like";
  bae.pre = {.forbid_repeat_token_changes = true,
             .forbid_stopword_changes = true,
             .require_same_pos = true,
             .synonym_source = SynonymSource::kEmbeddingKnn,
             .knn_k = 12,
             .knn_min_similarity = 0.3};
  bae.constraints = {{DistanceMetric::kSentenceCosine, 0.1, ConstraintRole::kPerturbationMetric}};
  bae.search = SearchStrategy::kGreedyDeletionImportance;
  presets.emplace(bae.name, bae);

  AttackMethodSpec pwws;
  pwws.name = "pwws_like";
  pwws.pre = {.forbid_repeat_token_changes = true,
              .forbid_stopword_changes = true,
              .require_same_pos = false,
              .synonym_source = SynonymSource::kLexicon,
              .knn_k = 1,
              .knn_min_similarity = 0.0};
  pwws.constraints = {{DistanceMetric::kSentenceCosine, kInf, ConstraintRole::kPerturbationMetric}};
  pwws.search = SearchStrategy::kGreedySaliency;
  presets.emplace(pwws.name, pwws);

  AttackMethodSpec iga;
  iga.name = "iga_like";
  iga.pre = {.forbid_repeat_token_changes = false,
             .forbid_stopword_changes = true,
             .require_same_pos = false,
             .synonym_source = SynonymSource::kEmbeddingKnn,
             .knn_k = 8,
             .knn_min_similarity = 0.5};
  iga.constraints = {
      {DistanceMetric::kFractionWordsChanged, 0.2, ConstraintRole::kPerturbationMetric},
      {DistanceMetric::kWordEmbeddingSwap, 0.5, ConstraintRole::kFeasibilityFilter}};
  iga.search = SearchStrategy::kGenetic;
  iga.genetic = GeneticParams{};
  presets.emplace(iga.name, iga);
  return presets;
}

bool PerturbationRecord::operator==(const PerturbationRecord& other) const {
  const bool same_delta =
      (std::isnan(delta) && std::isnan(other.delta)) || delta == other.delta;
  return sample_id == other.sample_id && model_id == other.model_id && method == other.method &&
         status == other.status && same_delta && queries == other.queries;
}

PerturbationRecord ToRecord(const AttackOutcome& outcome) {
  return {outcome.sample_id, outcome.model_id, outcome.method,
          outcome.status,    outcome.delta,    outcome.queries};
}

std::string RecordsToCsv(const std::vector<PerturbationRecord>& records) {
  std::string out = "sample_id,model_id,method,success,delta,queries\n";
  for (const auto& r : records) {
    CheckCsvField(r.sample_id);
    CheckCsvField(r.model_id);
    CheckCsvField(r.method);
    out += JoinCsvRow({r.sample_id, r.model_id, r.method, r.success() ? "1" : "0",
                       FormatDouble(r.delta), std::to_string(r.queries)});
  }
  return out;
}

std::vector<PerturbationRecord> RecordsFromCsv(std::string_view text, const std::string& what) {
  const CsvTable table = ParseCsv(text, what);
  const std::size_t c_sample = table.Column("sample_id");
  const std::size_t c_model = table.Column("model_id");
  const std::size_t c_method = table.Column("method");
  const std::size_t c_success = table.Column("success");
  const std::size_t c_delta = table.Column("delta");
  const std::size_t c_queries = table.Column("queries");
  std::vector<PerturbationRecord> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = what + ": row " + std::to_string(i + 1);
    PerturbationRecord r;
    r.sample_id = row[c_sample];
    r.model_id = row[c_model];
    r.method = row[c_method];
    r.delta = ParseDouble(row[c_delta]);
    try {
      r.queries = std::stoll(row[c_queries]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse, where + ": bad query count");
    }
    const std::string& flag = row[c_success];
    if (flag == "1") {
      if (!std::isfinite(r.delta) || r.delta < 0) {
        throw Error(ErrorCode::kParse, where + ": success needs a finite non-negative delta");
      }
      r.status = AttackStatus::kSuccess;
    } else if (flag == "0") {
      if (std::isnan(r.delta)) {
        r.status = AttackStatus::kSkipped;
      } else if (std::isinf(r.delta) && r.delta > 0) {
        r.status = AttackStatus::kFailure;
      } else {
        throw Error(ErrorCode::kParse, where + ": failed attack needs delta inf or nan");
      }
    } else {
      throw Error(ErrorCode::kParse, where + ": success must be 0 or 1");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TokenId> NearestNeighbors(TokenId token, int k, double min_similarity,
                                      const EmbeddingTable& emb) {
  const auto oov = static_cast<TokenId>(emb.size() - 1);
  const Vector query = emb.Row(token);
  std::vector<std::pair<double, TokenId>> scored;
  for (TokenId id = 0; id < oov; ++id) {
    if (id == token) continue;
    const double sim = CosineSimilarity(query, emb.Row(id));
    if (sim >= min_similarity) scored.emplace_back(sim, id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < scored.size() && static_cast<int>(i) < k; ++i) out.push_back(scored[i].second);
  return out;
}

std::vector<TokenId> CandidateSubstitutions(const TokenSeq& original, std::size_t position,
                                            const PreTransformConstraintSet& pre,
                                            const TextResources& res,
                                            const std::vector<bool>* substituted) {
  if (position >= original.size()) {
    throw Error(ErrorCode::kContractViolation, "position out of range");
  }
  const TokenId token = original.ids[position];
  if (res.vocab.IsOov(token)) return {};
  if (pre.forbid_repeat_token_changes && substituted != nullptr && (*substituted)[position]) return {};
  const std::string& word = res.vocab.Token(token);
  if (pre.forbid_stopword_changes && res.lexicons.IsStopword(word)) return {};

  std::vector<TokenId> raw;
  if (pre.synonym_source == SynonymSource::kEmbeddingKnn) {
    raw = NearestNeighbors(token, pre.knn_k, pre.knn_min_similarity, res.emb);
  } else {
    for (const std::string& syn : res.lexicons.Synonyms(word)) {
      const TokenId id = res.vocab.Lookup(syn);
      if (!res.vocab.IsOov(id)) raw.push_back(id);
    }
  }

  std::vector<TokenId> out;
  const std::optional<PosTag> tag = res.lexicons.Pos(word);
  for (TokenId c : raw) {
    if (c == token || std::find(out.begin(), out.end(), c) != out.end()) continue;
    if (pre.require_same_pos && res.lexicons.Pos(res.vocab.Token(c)) != tag) continue;
    out.push_back(c);
  }
  return out;
}

TokenSeq WithSubstitution(const TokenSeq& seq, std::size_t position, TokenId replacement,
                          const Vocab& vocab) {
  TokenSeq out = seq;
  out.ids[position] = replacement;
  if (position < out.surface.size()) out.surface[position] = vocab.Token(replacement);
  return out;
}

double PerturbationDistance(const TokenSeq& original, const TokenSeq& perturbed,
                            DistanceMetric metric, const EmbeddingTable& emb) {
  if (original.size() != perturbed.size()) {
    throw Error(ErrorCode::kContractViolation, "substitution attacks preserve length");
  }
  if (original.ids == perturbed.ids) return 0.0;
  switch (metric) {
    case DistanceMetric::kSentenceCosine: {
      const double d = CosineDistance(SentenceEmbed(original, emb), SentenceEmbed(perturbed, emb));
      return std::max(0.0, d);
    }
    case DistanceMetric::kWordEmbeddingSwap: {
      double worst = 0.0;
      for (std::size_t i = 0; i < original.size(); ++i) {
        if (original.ids[i] == perturbed.ids[i]) continue;
        const double d = 1.0 - CosineSimilarity(emb.Row(original.ids[i]), emb.Row(perturbed.ids[i]));
        worst = std::max(worst, d);
      }
      return worst;
    }
    case DistanceMetric::kFractionWordsChanged: {
      std::size_t changed = 0;
      for (std::size_t i = 0; i < original.size(); ++i) changed += original.ids[i] != perturbed.ids[i];
      return static_cast<double>(changed) / static_cast<double>(original.size());
    }
  }
  return 0.0;
}

bool PassesFeasibility(const TokenSeq& original, const TokenSeq& perturbed,
                       const AttackMethodSpec& spec, const EmbeddingTable& emb) {
  for (const auto& c : spec.constraints) {
    if (c.role != ConstraintRole::kFeasibilityFilter) continue;
    if (PerturbationDistance(original, perturbed, c.metric, emb) > c.threshold) return false;
  }
  return true;
}

bool PassesPreTransform(const TokenSeq& original, const TokenSeq& perturbed,
                        const AttackMethodSpec& spec, const TextResources& res) {
  if (original.size() != perturbed.size()) return false;
  for (std::size_t p : ChangedPositions(original, perturbed)) {
    const auto cands = CandidateSubstitutions(original, p, spec.pre, res);
    if (std::find(cands.begin(), cands.end(), perturbed.ids[p]) == cands.end()) return false;
  }
  return true;
}

std::vector<std::size_t> WordImportanceRanking(const ClassifierModel& model,
                                               const LabeledExample& example,
                                               ImportanceMode mode, const AttackMethodSpec& spec,
                                               const TextResources& res, std::int64_t* queries) {
  const TokenSeq& seq = example.seq;
  Scorer scorer(model, res.emb);
  const double base = TrueClassProb(scorer.Proba(seq), example.label);
  std::vector<double> scores(seq.size(), 0.0);
  for (std::size_t p = 0; p < seq.size(); ++p) {
    if (mode == ImportanceMode::kDeletion) {
      if (res.vocab.IsOov(seq.ids[p])) continue;
      const TokenSeq removed = WithSubstitution(seq, p, res.vocab.oov_id(), res.vocab);
      scores[p] = base - TrueClassProb(scorer.Proba(removed), example.label);
    } else {
      double best = -kInf;
      for (TokenId c : CandidateSubstitutions(seq, p, spec.pre, res)) {
        const TokenSeq trial = WithSubstitution(seq, p, c, res.vocab);
        if (!PassesFeasibility(seq, trial, spec, res.emb)) continue;
        best = std::max(best, base - TrueClassProb(scorer.Proba(trial), example.label));
      }
      scores[p] = best;
    }
  }
  std::vector<std::size_t> order(seq.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (queries != nullptr) *queries += scorer.queries();
  return order;
}

AttackOutcome GreedyAttack(const ClassifierModel& model, const LabeledExample& example,
                           const AttackMethodSpec& spec, const TextResources& res) {
  AttackOutcome out = MakeOutcome(model, example, spec);
  Scorer scorer(model, res.emb);
  if (!IsCorrect(example, scorer)) return Skipped(std::move(out));

  const ImportanceMode mode = spec.search == SearchStrategy::kGreedySaliency
                                  ? ImportanceMode::kSaliency
                                  : ImportanceMode::kDeletion;
  std::int64_t ranking_queries = 0;
  const auto order = WordImportanceRanking(model, example, mode, spec, res, &ranking_queries);

  const TokenSeq& original = example.seq;
  TokenSeq current = original;
  std::vector<bool> substituted(original.size(), false);
  double current_p = TrueClassProb(scorer.Proba(current), example.label);
  bool flipped = false;

  for (std::size_t p : order) {
    std::optional<TokenSeq> best;
    double best_p = kInf;
    bool best_flips = false;
    for (TokenId c : CandidateSubstitutions(original, p, spec.pre, res, &substituted)) {
      TokenSeq trial = WithSubstitution(current, p, c, res.vocab);
      if (!PassesFeasibility(original, trial, spec, res.emb)) continue;
      const Vector proba = scorer.Proba(trial);
      const double pt = TrueClassProb(proba, example.label);
      const bool flips = ArgMax(proba) != example.label;
      // Flipping candidates win; then the lowest true-class probability.
      if ((flips && !best_flips) || (flips == best_flips && pt < best_p)) {
        best = std::move(trial);
        best_p = pt;
        best_flips = flips;
      }
    }
    if (!best || (!best_flips && best_p >= current_p)) continue;
    current = std::move(*best);
    current_p = best_p;
    substituted[p] = true;
    if (best_flips) {
      flipped = true;
      break;
    }
  }

  if (flipped) FinishSuccess(out, example, current, spec, res, scorer);
  out.queries = scorer.queries() + ranking_queries;
  return out;
}

std::vector<TokenSeq> NextGeneration(const std::vector<TokenSeq>& population,
                                     const std::vector<double>& fitness,
                                     const LabeledExample& example, const AttackMethodSpec& spec,
                                     const TextResources& res, Rng& rng) {
  if (population.empty() || population.size() != fitness.size()) {
    throw Error(ErrorCode::kContractViolation, "population and fitness must align");
  }
  const GeneticParams params = spec.genetic.value_or(GeneticParams{});
  const TokenSeq& original = example.seq;
  const SubstitutionSpace space = BuildSpace(original, spec.pre, res);
  const std::size_t n = population.size();
  const auto elite = static_cast<std::size_t>(
      std::min_element(fitness.begin(), fitness.end()) - fitness.begin());

  auto tournament = [&]() {
    const std::size_t a = UniformIndex(rng, n);
    const std::size_t b = UniformIndex(rng, n);
    return fitness[b] < fitness[a] ? b : a;
  };

  std::vector<TokenSeq> next;
  next.reserve(n);
  next.push_back(population[elite]);
  while (next.size() < n) {
    const std::size_t a = tournament();
    const std::size_t b = tournament();
    const std::size_t cut = UniformIndex(rng, original.size() + 1);
    TokenSeq child = population[a];
    for (std::size_t p = cut; p < original.size(); ++p) {
      child.ids[p] = population[b].ids[p];
      child.surface[p] = population[b].surface[p];
    }
    if (!PassesFeasibility(original, child, spec, res.emb)) {
      child = fitness[b] < fitness[a] ? population[b] : population[a];
    }
    if (UniformUnit(rng) < params.mutation_rate) {
      if (auto mutated = RandomSubstitution(child, original, space, spec, res, rng)) {
        child = std::move(*mutated);
      }
    }
    next.push_back(std::move(child));
  }
  return next;
}

AttackOutcome GeneticAttack(const ClassifierModel& model, const LabeledExample& example,
                            const AttackMethodSpec& spec, const TextResources& res,
                            std::uint64_t rng_seed) {
  if (!spec.genetic) throw Error(ErrorCode::kConfig, spec.name + ": genetic params missing");
  AttackOutcome out = MakeOutcome(model, example, spec);
  Scorer scorer(model, res.emb);
  if (!IsCorrect(example, scorer)) return Skipped(std::move(out));

  const GeneticParams& params = *spec.genetic;
  const TokenSeq& original = example.seq;
  const SubstitutionSpace space = BuildSpace(original, spec.pre, res);
  Rng rng(rng_seed);

  std::vector<TokenSeq> population;
  for (int i = 0; i < params.population; ++i) {
    if (auto member = RandomSubstitution(original, original, space, spec, res, rng)) {
      population.push_back(std::move(*member));
    }
  }
  if (population.empty()) {
    out.queries = scorer.queries();
    return out;
  }
  // Top up members that failed to initialize with copies of those that did.
  for (std::size_t i = 0; population.size() < static_cast<std::size_t>(params.population); ++i) {
    population.push_back(population[i]);
  }

  std::map<std::vector<TokenId>, Vector> cache;
  auto proba_of = [&](const TokenSeq& s) -> const Vector& {
    auto it = cache.find(s.ids);
    if (it == cache.end()) it = cache.emplace(s.ids, scorer.Proba(s)).first;
    return it->second;
  };

  for (int gen = 0; gen < params.generations; ++gen) {
    std::vector<double> fitness;
    fitness.reserve(population.size());
    std::optional<std::size_t> winner;
    for (std::size_t i = 0; i < population.size(); ++i) {
      const Vector& proba = proba_of(population[i]);
      fitness.push_back(TrueClassProb(proba, example.label));
      if (ArgMax(proba) != example.label && (!winner || fitness[i] < fitness[*winner])) winner = i;
    }
    if (winner) {
      FinishSuccess(out, example, population[*winner], spec, res, scorer);
      break;
    }
    if (gen + 1 < params.generations) {
      population = NextGeneration(population, fitness, example, spec, res, rng);
    }
  }
  out.queries = scorer.queries();
  return out;
}

std::uint64_t AttackSeed(std::uint64_t global_seed, const AttackMethodSpec& spec,
                         std::string_view sample_id, std::string_view model_id) {
  const std::uint64_t method_seed = spec.genetic ? spec.genetic->seed : 0;
  return DeriveSeed(global_seed ^ (method_seed * 0x9E3779B97F4A7C15ULL),
                    {spec.name, sample_id, model_id});
}

AttackOutcome RunAttack(const ClassifierModel& model, const LabeledExample& example,
                        const AttackMethodSpec& spec, const TextResources& res,
                        std::uint64_t global_seed) {
  if (spec.search == SearchStrategy::kGenetic) {
    return GeneticAttack(model, example, spec, res,
                         AttackSeed(global_seed, spec, example.id, model.model_id));
  }
  return GreedyAttack(model, example, spec, res);
}

double MinPerturbation(const ClassifierModel& model, const LabeledExample& example,
                       const AttackMethodSpec& spec, const TextResources& res,
                       std::uint64_t global_seed) {
  return RunAttack(model, example, spec, res, global_seed).delta;
}

double BruteForceMin(const ClassifierModel& model, const LabeledExample& example,
                     const AttackMethodSpec& spec, const TextResources& res, int max_subs) {
  Scorer scorer(model, res.emb);
  if (!IsCorrect(example, scorer)) {
    throw Error(ErrorCode::kContractViolation, "brute force needs a correctly classified sample");
  }
  const TokenSeq& original = example.seq;
  const SubstitutionSpace space = BuildSpace(original, spec.pre, res);
  const std::size_t max_k = static_cast<std::size_t>(std::max(0, max_subs));

  // Elementary symmetric sums of the candidate counts give the number of
  // sequences with exactly k substitutions.
  std::vector<double> count(max_k + 1, 0.0);
  count[0] = 1.0;
  for (std::size_t p : space.open_positions) {
    const auto c = static_cast<double>(space.candidates[p].size());
    for (std::size_t k = max_k; k >= 1; --k) count[k] += count[k - 1] * c;
  }
  const double total = std::accumulate(count.begin(), count.end(), 0.0);
  if (total > static_cast<double>(kBruteForceBudget)) {
    throw Error(ErrorCode::kBudgetExceeded,
                "enumeration of " + std::to_string(total) + " sequences exceeds budget");
  }

  const DistanceMetric metric = spec.perturbation_metric().metric;
  double best = kInf;
  TokenSeq current = original;
  auto visit = [&](auto&& self, std::size_t from, std::size_t used) -> void {
    if (used > 0 && PassesFeasibility(original, current, spec, res.emb) &&
        ArgMax(scorer.Proba(current)) != example.label) {
      best = std::min(best, PerturbationDistance(original, current, metric, res.emb));
    }
    if (used == max_k) return;
    for (std::size_t i = from; i < space.open_positions.size(); ++i) {
      const std::size_t p = space.open_positions[i];
      for (TokenId c : space.candidates[p]) {
        current.ids[p] = c;
        self(self, i + 1, used + 1);
      }
      current.ids[p] = original.ids[p];
    }
  };
  visit(visit, 0, 0);
  return best;
}

std::vector<AttackOutcome> RunAttacks(const std::vector<const ClassifierModel*>& models,
                                      const Dataset& data, const AttackMethodSpec& spec,
                                      const TextResources& res, std::uint64_t global_seed,
                                      int threads) {
  spec.Validate();
  const std::size_t per_model = data.size();
  const std::size_t total = models.size() * per_model;
  std::vector<AttackOutcome> out(total);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= total) return;
      try {
        out[i] = RunAttack(*models[i / per_model], data.examples[i % per_model], spec, res,
                           global_seed);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(total);
        return;
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::size_t>(total, 1))));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

double FoolingRate(const std::vector<PerturbationRecord>& records, const AttackMethodSpec& spec) {
  const double threshold = spec.perturbation_metric().threshold;
  std::size_t attacked = 0;
  std::size_t fooled = 0;
  for (const auto& r : records) {
    if (r.skipped()) continue;
    ++attacked;
    if (r.success() && r.delta <= threshold) ++fooled;
  }
  if (attacked == 0) throw Error(ErrorCode::kUndefinedRate, "no correctly classified samples");
  return static_cast<double>(fooled) / static_cast<double>(attacked);
}

double FoolingRate(const std::vector<AttackOutcome>& outcomes, const AttackMethodSpec& spec) {
  std::vector<PerturbationRecord> records;
  records.reserve(outcomes.size());
  for (const auto& o : outcomes) records.push_back(ToRecord(o));
  return FoolingRate(records, spec);
}

double FoolingRate(const ClassifierModel& model, const Dataset& data, const AttackMethodSpec& spec,
                   const TextResources& res, std::uint64_t global_seed) {
  if (data.size() == 0) throw Error(ErrorCode::kUndefinedRate, "empty dataset");
  return FoolingRate(RunAttacks({&model}, data, spec, res, global_seed, 1), spec);
}

double UnionFoolingRate(const std::vector<std::vector<PerturbationRecord>>& records,
                        const std::vector<AttackMethodSpec>& specs) {
  if (records.size() != specs.size() || records.empty()) {
    throw Error(ErrorCode::kContractViolation, "one record list per spec");
  }
  using Key = std::pair<std::string, std::string>;
  std::set<Key> attacked;
  std::set<Key> fooled;
  for (std::size_t m = 0; m < records.size(); ++m) {
    const double threshold = specs[m].perturbation_metric().threshold;
    for (const auto& r : records[m]) {
      if (r.skipped()) continue;
      Key key{r.model_id, r.sample_id};
      attacked.insert(key);
      if (r.success() && r.delta <= threshold) fooled.insert(key);
    }
  }
  if (attacked.empty()) throw Error(ErrorCode::kUndefinedRate, "no correctly classified samples");
  return static_cast<double>(fooled.size()) / static_cast<double>(attacked.size());
}

double UnionFoolingRate(const std::vector<std::vector<AttackOutcome>>& outcomes,
                        const std::vector<AttackMethodSpec>& specs) {
  std::vector<std::vector<PerturbationRecord>> records;
  for (const auto& list : outcomes) {
    auto& out = records.emplace_back();
    for (const auto& o : list) out.push_back(ToRecord(o));
  }
  return UnionFoolingRate(records, specs);
}

double UnionFoolingRate(const ClassifierModel& model, const Dataset& data,
                        const std::vector<AttackMethodSpec>& specs, const TextResources& res,
                        std::uint64_t global_seed) {
  if (data.size() == 0) throw Error(ErrorCode::kUndefinedRate, "empty dataset");
  std::vector<std::vector<AttackOutcome>> all;
  for (const auto& spec : specs) all.push_back(RunAttacks({&model}, data, spec, res, global_seed, 1));
  return UnionFoolingRate(all, specs);
}

}  // namespace attackscope
