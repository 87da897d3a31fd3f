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

// File-based experiment pipeline. Each stage reads the outputs of earlier
// stages from the output directory and writes its own, so any stage can be
// deleted and rerun in isolation:
//
//   train-models     models/<id>.json, models/accuracy.csv
//   attack           attacks/<method>_<split>.csv (+ _adv.jsonl audit trail)
//   label            labels/<method>_<split>{,_universal,_sweep}.csv
//   train-detectors  detectors/<model>_<mode>.json
//   detect           scores/<split>/<detector>_<mode>.csv
//   evaluate         eval/<protocol>/report.json, eval/<protocol>/pr/*.csv
//   correlate        correlate/<a>__<b>_<split>.csv
//   fooling          fooling/<split>.csv
//
// The validation split is attacked with the seen models only (the target is
// unseen at training time); the test split with the seen models and the
// target.

#ifndef ATTACKSCOPE_PIPELINE_H_
#define ATTACKSCOPE_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "attackscope/attack_engine.h"
#include "attackscope/attackability.h"
#include "attackscope/classifier.h"
#include "attackscope/detector.h"
#include "attackscope/error.h"
#include "attackscope/evaluation.h"
#include "attackscope/text_core.h"

namespace attackscope {

struct DataPaths {
  std::string train;
  std::string validation;
  std::string test;
  std::string embeddings;
  std::string stopwords;
  std::string synonyms;
  std::string pos;
};

struct RunConfig {
  DataPaths data;
  std::string output_dir = "out";
  int num_classes = 2;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<ModelArch> seen;
  ModelArch target;
  TrainConfig classifier;  // seed is derived per model from `seed`
  std::map<std::string, AttackMethodSpec> attacks;
  ThresholdConfig thresholds;
  DetectorTrainConfig detector;  // seed is derived from `seed`
  AggregationConfig aggregation;
  std::string train_method = "tf_like";
  std::string unmatched_method = "bae_like";
  std::vector<Setting> settings = {Setting::kAll, Setting::kUni, Setting::kSpec, Setting::kVspec};
  std::vector<LabelMode> modes = {LabelMode::kAttackable, LabelMode::kRobust};
  std::vector<double> sweep_grid;
  std::vector<std::string> fooling_methods;

  // Throws kConfig: empty pool, target among the seen ids, duplicate ids,
  // unknown method names, missing thresholds, missing input files.
  void Validate() const;
};

// Relative data paths resolve against `base_dir`.
RunConfig RunConfigFromJson(std::string_view text, const std::filesystem::path& base_dir);
RunConfig LoadRunConfig(const std::string& path);

class Pipeline {
 public:
  explicit Pipeline(RunConfig config);
  ~Pipeline();

  const RunConfig& config() const { return config_; }
  std::filesystem::path out() const { return config_.output_dir; }

  void TrainModels();
  void Attack(const std::string& method, Split split);
  void Label(const std::string& method, Split split);
  void TrainDetectors(const std::string& method);
  void Detect(Split split);
  // protocol: "matched" (truth from the training method) or "unmatched"
  // (truth from the configured unmatched method).
  void Evaluate(const std::string& protocol, std::optional<Setting> setting,
                std::optional<LabelMode> mode);
  // Correlates method_a with method_b in this run, or method_a with the
  // same method in another run's output tree when `other_run` is set.
  std::vector<SpearmanEntry> Correlate(const std::string& method_a, const std::string& method_b,
                                       Split split,
                                       const std::optional<std::filesystem::path>& other_run);
  // Per-model fooling rates of the configured methods plus a "union" row.
  std::vector<FoolingEntry> Fooling(Split split);
  // Every stage in order, for both protocols.
  void RunAll();

  // Paths of stage outputs.
  std::filesystem::path ModelPath(const std::string& id) const;
  std::filesystem::path RecordsPath(const std::string& method, Split split) const;
  std::filesystem::path AdversarialPath(const std::string& method, Split split) const;
  std::filesystem::path LabelsPath(const std::string& method, Split split) const;
  std::filesystem::path DetectorPath(const std::string& model, LabelMode mode) const;
  std::filesystem::path ScoresPath(Split split, const std::string& detector, LabelMode mode) const;
  std::filesystem::path ReportPath(const std::string& protocol) const;
  std::filesystem::path CorrelatePath(const std::string& a, const std::string& b, Split split) const;
  std::filesystem::path FoolingPath(Split split) const;

  // Loads records written by the attack stage; throws kMissingArtifact
  // naming the stage when absent.
  std::vector<PerturbationRecord> LoadRecords(const std::string& method, Split split) const;

 private:
  struct Resources;
  const Resources& resources();
  const Dataset& dataset(Split split);
  std::vector<ClassifierModel> LoadModels(bool with_target) const;
  const AttackMethodSpec& spec(const std::string& method) const;
  void AuditRecords(const std::string& method, Split split);

  RunConfig config_;
  std::unique_ptr<Resources> resources_;
};

// Exit status for an error escaping a CLI command: 2 config, 3 missing
// artifact, 4 invariant audit, 1 otherwise.
int ExitCodeFor(ErrorCode code);

}  // namespace attackscope

#endif  // ATTACKSCOPE_PIPELINE_H_
