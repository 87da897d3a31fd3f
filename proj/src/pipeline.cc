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

#include "attackscope/pipeline.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>
#include <unordered_map>
#include <utility>

#include "attackscope/csv.h"
#include "attackscope/error.h"
#include "attackscope/rng.h"
#include "json_util.h"

namespace attackscope {

namespace fs = std::filesystem;

namespace {

using internal::json;

constexpr const char* kDetectors[] = {"conf_s", "conf_u", "deep_mean", "deep_universal"};

std::string Str(const fs::path& p) { return p.string(); }

void EnsureParent(const fs::path& path) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + Str(path.parent_path()) + ": " + ec.message());
}

void Write(const fs::path& path, const std::string& contents) {
  EnsureParent(path);
  internal::WriteFile(Str(path), contents);
}

void RequireArtifact(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kMissingArtifact,
                Str(path) + " not found; run the '" + stage + "' stage first");
  }
}

std::string ResolvePath(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key)) throw Error(ErrorCode::kConfig, std::string("data.") + key + " is required");
  const fs::path p = j.at(key).get<std::string>();
  return Str(p.is_absolute() ? p : base / p);
}

ModelArch ArchFromJson(const json& j, int num_classes) {
  ModelArch arch;
  arch.model_id = j.at("id").get<std::string>();
  arch.hidden_dim = j.value("hidden_dim", 32);
  arch.nonlinearity = ParseNonlinearity(j.value("nonlinearity", std::string("tanh")));
  arch.num_classes = num_classes;
  return arch;
}

}  // namespace

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kUnknownMethod:
    case ErrorCode::kUnknownSetting:
      return 2;
    case ErrorCode::kMissingArtifact:
      return 3;
    case ErrorCode::kInvariantAudit:
      return 4;
    default:
      return 1;
  }
}

void RunConfig::Validate() const {
  if (seen.empty()) throw Error(ErrorCode::kConfig, "the seen model pool is empty");
  std::set<std::string> ids;
  for (const auto& m : seen) {
    if (!ids.insert(m.model_id).second) throw Error(ErrorCode::kConfig, "duplicate model id '" + m.model_id + "'");
  }
  if (ids.count(target.model_id) > 0) {
    throw Error(ErrorCode::kConfig, "target '" + target.model_id + "' is also a seen model");
  }
  if (num_classes < 2) throw Error(ErrorCode::kConfig, "num_classes must be >= 2");
  if (threads < 1) throw Error(ErrorCode::kConfig, "threads must be >= 1");
  for (const auto& [name, spec] : attacks) {
    if (name != spec.name) throw Error(ErrorCode::kConfig, "attack key '" + name + "' differs from its name");
    spec.Validate();
  }
  std::vector<std::string> methods = fooling_methods;
  methods.push_back(train_method);
  methods.push_back(unmatched_method);
  for (const auto& m : methods) {
    if (attacks.count(m) == 0) throw Error(ErrorCode::kUnknownMethod, "unknown attack method '" + m + "'");
  }
  for (const auto& [name, t] : thresholds) t.Validate();
  for (const auto& m : {train_method, unmatched_method}) {
    if (thresholds.count(m) == 0) throw Error(ErrorCode::kConfig, "no thresholds for '" + m + "'");
  }
  for (std::size_t i = 1; i < sweep_grid.size(); ++i) {
    if (!(sweep_grid[i] > sweep_grid[i - 1])) throw Error(ErrorCode::kConfig, "sweep grid must increase");
  }
  if (sweep_grid.empty()) throw Error(ErrorCode::kConfig, "sweep grid is empty");
  aggregation.Alpha(seen.size());
  for (const auto& path : {data.train, data.validation, data.test, data.embeddings, data.stopwords,
                           data.synonyms, data.pos}) {
    if (!fs::exists(path)) throw Error(ErrorCode::kConfig, "input file " + path + " does not exist");
  }
}

RunConfig RunConfigFromJson(std::string_view text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  try {
    const json& data = j.at("data");
    cfg.data.train = ResolvePath(data, "train", base_dir);
    cfg.data.validation = ResolvePath(data, "validation", base_dir);
    cfg.data.test = ResolvePath(data, "test", base_dir);
    cfg.data.embeddings = ResolvePath(data, "embeddings", base_dir);
    cfg.data.stopwords = ResolvePath(data, "stopwords", base_dir);
    cfg.data.synonyms = ResolvePath(data, "synonyms", base_dir);
    cfg.data.pos = ResolvePath(data, "pos", base_dir);
    cfg.num_classes = data.value("num_classes", 2);

    cfg.output_dir = j.value("output_dir", std::string("out"));
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.threads = j.value("threads", 1);

    const json& models = j.at("models");
    for (const auto& m : models.at("seen")) cfg.seen.push_back(ArchFromJson(m, cfg.num_classes));
    cfg.target = ArchFromJson(models.at("target"), cfg.num_classes);

    if (j.contains("classifier_training")) {
      const json& t = j["classifier_training"];
      cfg.classifier.epochs = t.value("epochs", cfg.classifier.epochs);
      cfg.classifier.learning_rate = t.value("learning_rate", cfg.classifier.learning_rate);
      cfg.classifier.batch_size = t.value("batch_size", cfg.classifier.batch_size);
      cfg.classifier.weight_decay = t.value("weight_decay", cfg.classifier.weight_decay);
    }

    cfg.attacks = j.contains("attacks") ? AttackSpecsFromJson(j["attacks"].dump()) : DefaultAttackPresets();

    cfg.thresholds = DefaultThresholds();
    if (j.contains("thresholds")) {
      for (const auto& [name, t] : j["thresholds"].items()) {
        cfg.thresholds[name] = {t.at("attackable").get<double>(), t.at("robust").get<double>()};
      }
    }

    if (j.contains("detector")) {
      const json& d = j["detector"];
      cfg.detector.epochs = d.value("epochs", cfg.detector.epochs);
      cfg.detector.learning_rate = d.value("learning_rate", cfg.detector.learning_rate);
      cfg.detector.batch_size = d.value("batch_size", cfg.detector.batch_size);
      cfg.detector.hidden_dim = d.value("hidden_dim", cfg.detector.hidden_dim);
    }
    if (j.contains("aggregation")) {
      const json& a = j["aggregation"];
      const std::string rule = a.value("alpha_rule", std::string("pool_size"));
      if (rule == "pool_size") {
        cfg.aggregation.rule = AlphaRule::kPoolSize;
      } else if (rule == "fixed") {
        cfg.aggregation.rule = AlphaRule::kFixed;
        cfg.aggregation.value = a.at("alpha").get<double>();
      } else {
        throw Error(ErrorCode::kConfig, "unknown alpha rule '" + rule + "'");
      }
    }

    if (j.contains("evaluation")) {
      const json& e = j["evaluation"];
      cfg.train_method = e.value("train_method", cfg.train_method);
      cfg.unmatched_method = e.value("unmatched_method", cfg.unmatched_method);
      if (e.contains("settings")) {
        cfg.settings.clear();
        for (const auto& s : e["settings"]) cfg.settings.push_back(ParseSetting(s.get<std::string>()));
      }
      if (e.contains("modes")) {
        cfg.modes.clear();
        for (const auto& m : e["modes"]) cfg.modes.push_back(ParseLabelMode(m.get<std::string>()));
      }
      if (e.contains("sweep_grid")) cfg.sweep_grid = e["sweep_grid"].get<std::vector<double>>();
      if (e.contains("fooling_methods")) {
        cfg.fooling_methods = e["fooling_methods"].get<std::vector<std::string>>();
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParse) throw Error(ErrorCode::kConfig, e.what());
    throw;
  }
  if (cfg.sweep_grid.empty()) {
    for (int i = 1; i <= 40; ++i) cfg.sweep_grid.push_back(0.01 * i);
  }
  if (cfg.fooling_methods.empty()) {
    for (const auto& [name, spec] : cfg.attacks) cfg.fooling_methods.push_back(name);
  }
  return cfg;
}

RunConfig LoadRunConfig(const std::string& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::kConfig, "config " + path + " does not exist");
  return RunConfigFromJson(internal::ReadFile(path), fs::path(path).parent_path());
}

struct Pipeline::Resources {
  EmbeddingBundle bundle;
  Lexicons lexicons;
  std::map<Split, Dataset> datasets;

  TextResources text() const { return {bundle.vocab, bundle.table, lexicons}; }
};

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)) { config_.Validate(); }

Pipeline::~Pipeline() = default;

const Pipeline::Resources& Pipeline::resources() {
  if (!resources_) {
    auto r = std::make_unique<Resources>();
    r->bundle = LoadEmbeddings(config_.data.embeddings);
    r->lexicons = LoadLexicons(config_.data.stopwords, config_.data.synonyms, config_.data.pos);
    const std::pair<Split, std::string> files[] = {{Split::kTrain, config_.data.train},
                                                   {Split::kValidation, config_.data.validation},
                                                   {Split::kTest, config_.data.test}};
    for (const auto& [split, path] : files) {
      r->datasets[split] = LoadDataset(path, r->bundle.vocab, fs::path(path).stem().string(), split,
                                       config_.num_classes);
    }
    CheckDisjoint(r->datasets[Split::kValidation], r->datasets[Split::kTest]);
    resources_ = std::move(r);
  }
  return *resources_;
}

const Dataset& Pipeline::dataset(Split split) { return resources().datasets.at(split); }

const AttackMethodSpec& Pipeline::spec(const std::string& method) const {
  const auto it = config_.attacks.find(method);
  if (it == config_.attacks.end()) {
    throw Error(ErrorCode::kUnknownMethod, "unknown attack method '" + method + "'");
  }
  return it->second;
}

fs::path Pipeline::ModelPath(const std::string& id) const { return out() / "models" / (id + ".json"); }

fs::path Pipeline::RecordsPath(const std::string& method, Split split) const {
  return out() / "attacks" / (method + "_" + std::string(SplitName(split)) + ".csv");
}

fs::path Pipeline::AdversarialPath(const std::string& method, Split split) const {
  return out() / "attacks" / (method + "_" + std::string(SplitName(split)) + "_adv.jsonl");
}

fs::path Pipeline::LabelsPath(const std::string& method, Split split) const {
  return out() / "labels" / (method + "_" + std::string(SplitName(split)) + ".csv");
}

fs::path Pipeline::DetectorPath(const std::string& model, LabelMode mode) const {
  return out() / "detectors" / (model + "_" + std::string(LabelModeName(mode)) + ".json");
}

fs::path Pipeline::ScoresPath(Split split, const std::string& detector, LabelMode mode) const {
  return out() / "scores" / std::string(SplitName(split)) /
         (detector + "_" + std::string(LabelModeName(mode)) + ".csv");
}

fs::path Pipeline::ReportPath(const std::string& protocol) const {
  return out() / "eval" / protocol / "report.json";
}

fs::path Pipeline::CorrelatePath(const std::string& a, const std::string& b, Split split) const {
  return out() / "correlate" / (a + "__" + b + "_" + std::string(SplitName(split)) + ".csv");
}

fs::path Pipeline::FoolingPath(Split split) const {
  return out() / "fooling" / (std::string(SplitName(split)) + ".csv");
}

std::vector<ClassifierModel> Pipeline::LoadModels(bool with_target) const {
  std::vector<ClassifierModel> models;
  std::vector<ModelArch> archs = config_.seen;
  if (with_target) archs.push_back(config_.target);
  for (const auto& arch : archs) {
    const fs::path path = ModelPath(arch.model_id);
    RequireArtifact(path, "train-models");
    models.push_back(LoadModel(Str(path)));
    if (models.back().model_id != arch.model_id) {
      throw Error(ErrorCode::kInvariantAudit, Str(path) + " holds model '" + models.back().model_id + "'");
    }
  }
  return models;
}

void Pipeline::TrainModels() {
  const Resources& res = resources();
  std::vector<ModelArch> archs = config_.seen;
  archs.push_back(config_.target);
  std::string table = "model_id,role,split,accuracy\n";
  for (const auto& arch : archs) {
    TrainConfig cfg = config_.classifier;
    cfg.seed = DeriveSeed(config_.seed, {"model", arch.model_id});
    TrainResult trained;
    try {
      trained = TrainClassifier(res.datasets.at(Split::kTrain), arch, cfg, res.bundle.table);
    } catch (const Error& e) {
      throw Error(e.code(), "model '" + arch.model_id + "': " + e.what());
    }
    const fs::path path = ModelPath(arch.model_id);
    EnsureParent(path);
    SaveModel(trained.model, Str(path));
    const std::string role = arch.model_id == config_.target.model_id ? "target" : "seen";
    for (Split split : {Split::kTrain, Split::kValidation, Split::kTest}) {
      table += JoinCsvRow({arch.model_id, role, std::string(SplitName(split)),
                           FormatDouble(Accuracy(trained.model, res.datasets.at(split), res.bundle.table))});
    }
  }
  Write(out() / "models" / "accuracy.csv", table);
}

std::vector<PerturbationRecord> Pipeline::LoadRecords(const std::string& method, Split split) const {
  const fs::path path = RecordsPath(method, split);
  RequireArtifact(path, "attack --method " + method + " --split " + std::string(SplitName(split)));
  return RecordsFromCsv(internal::ReadFile(Str(path)), Str(path));
}

void Pipeline::AuditRecords(const std::string& method, Split split) {
  const Resources& res = resources();
  const TextResources text = res.text();
  const AttackMethodSpec& s = spec(method);
  const auto records = LoadRecords(method, split);
  const Dataset& data = res.datasets.at(split);
  std::unordered_map<std::string, const LabeledExample*> examples;
  for (const auto& ex : data.examples) examples[ex.id] = &ex;

  std::map<std::pair<std::string, std::string>, std::vector<TokenId>> adversarial;
  const fs::path adv_path = AdversarialPath(method, split);
  RequireArtifact(adv_path, "attack --method " + method);
  const std::string adv_text = internal::ReadFile(Str(adv_path));
  std::size_t pos = 0;
  while (pos < adv_text.size()) {
    std::size_t end = adv_text.find('\n', pos);
    if (end == std::string::npos) end = adv_text.size();
    const std::string line = adv_text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const json j = internal::ParseJson(line, Str(adv_path));
    adversarial[{j.at("model_id").get<std::string>(), j.at("sample_id").get<std::string>()}] =
        j.at("ids").get<std::vector<TokenId>>();
  }

  std::map<std::string, ClassifierModel> models;
  for (auto& m : LoadModels(split == Split::kTest)) models.emplace(m.model_id, std::move(m));
  const DistanceMetric metric = s.perturbation_metric().metric;
  for (const auto& r : records) {
    const std::string where = method + " record (" + r.sample_id + ", " + r.model_id + ")";
    const auto ex_it = examples.find(r.sample_id);
    const auto model_it = models.find(r.model_id);
    if (ex_it == examples.end() || model_it == models.end() || r.method != method) {
      throw Error(ErrorCode::kInvariantAudit, where + " does not belong to this run");
    }
    const LabeledExample& ex = *ex_it->second;
    const bool correct = Predict(model_it->second, ex.seq, text.emb) == ex.label;
    if (r.skipped() == correct) {
      throw Error(ErrorCode::kInvariantAudit, where + ": skip flag disagrees with the model");
    }
    if (!r.success()) continue;
    const auto adv_it = adversarial.find({r.model_id, r.sample_id});
    if (adv_it == adversarial.end() || adv_it->second.size() != ex.seq.size()) {
      throw Error(ErrorCode::kInvariantAudit, where + ": adversarial sequence missing");
    }
    TokenSeq adv = ex.seq;
    for (std::size_t i = 0; i < adv.size(); ++i) {
      const TokenId id = adv_it->second[i];
      if (id < 0 || static_cast<std::size_t>(id) >= text.vocab.size()) {
        throw Error(ErrorCode::kInvariantAudit, where + ": token id out of range");
      }
      if (id != ex.seq.ids[i]) adv = WithSubstitution(adv, i, id, text.vocab);
    }
    if (Predict(model_it->second, adv, text.emb) == ex.label) {
      throw Error(ErrorCode::kInvariantAudit, where + ": adversarial example does not flip the class");
    }
    if (!PassesPreTransform(ex.seq, adv, s, text) || !PassesFeasibility(ex.seq, adv, s, text.emb)) {
      throw Error(ErrorCode::kInvariantAudit, where + ": adversarial example violates a constraint");
    }
    if (std::abs(PerturbationDistance(ex.seq, adv, metric, text.emb) - r.delta) > 1e-9) {
      throw Error(ErrorCode::kInvariantAudit, where + ": recorded delta does not match");
    }
  }
}

void Pipeline::Attack(const std::string& method, Split split) {
  const AttackMethodSpec& s = spec(method);
  const Resources& res = resources();
  const TextResources text = res.text();
  const Dataset& data = res.datasets.at(split);
  const std::vector<ClassifierModel> models = LoadModels(split == Split::kTest);
  const fs::path records_path = RecordsPath(method, split);
  const fs::path adv_path = AdversarialPath(method, split);

  using Key = std::pair<std::string, std::string>;  // (model, sample)
  std::map<Key, PerturbationRecord> done;
  std::map<Key, std::vector<TokenId>> adversarial;
  if (fs::exists(records_path) && fs::exists(adv_path)) {
    AuditRecords(method, split);
    for (auto& r : LoadRecords(method, split)) done.emplace(Key{r.model_id, r.sample_id}, std::move(r));
    const std::string adv_text = internal::ReadFile(Str(adv_path));
    std::size_t pos = 0;
    while (pos < adv_text.size()) {
      std::size_t end = adv_text.find('\n', pos);
      if (end == std::string::npos) end = adv_text.size();
      if (end > pos) {
        const json j = internal::ParseJson(adv_text.substr(pos, end - pos), Str(adv_path));
        adversarial[{j.at("model_id").get<std::string>(), j.at("sample_id").get<std::string>()}] =
            j.at("ids").get<std::vector<TokenId>>();
      }
      pos = end + 1;
    }
  }

  // Writes everything finished so far in canonical (model, dataset) order,
  // so an interrupted run leaves a valid prefix to resume from.
  auto flush = [&]() {
    std::vector<PerturbationRecord> rows;
    std::string adv_lines;
    for (const auto& model : models) {
      for (const auto& ex : data.examples) {
        const auto it = done.find({model.model_id, ex.id});
        if (it == done.end()) continue;
        rows.push_back(it->second);
        if (it->second.success()) {
          json j;
          j["model_id"] = model.model_id;
          j["sample_id"] = ex.id;
          j["ids"] = adversarial.at(it->first);
          adv_lines += j.dump() + "\n";
        }
      }
    }
    Write(adv_path, adv_lines);
    Write(records_path, RecordsToCsv(rows));
  };

  for (const auto& model : models) {
    Dataset missing{data.name, data.split, {}};
    for (const auto& ex : data.examples) {
      if (done.count({model.model_id, ex.id}) == 0) missing.examples.push_back(ex);
    }
    if (missing.size() == 0) continue;
    const auto outcomes = RunAttacks({&model}, missing, s, text, config_.seed, config_.threads);
    for (const auto& o : outcomes) {
      const Key key{o.model_id, o.sample_id};
      done.emplace(key, ToRecord(o));
      if (o.success()) adversarial[key] = o.adversarial->ids;
    }
    flush();
  }
  flush();
  AuditRecords(method, split);
}

void Pipeline::Label(const std::string& method, Split split) {
  const auto thr = config_.thresholds.find(method);
  if (thr == config_.thresholds.end()) throw Error(ErrorCode::kConfig, "no thresholds for '" + method + "'");
  AuditRecords(method, split);
  const auto records = LoadRecords(method, split);
  const LabelMatrix m = attackscope::Label(records, thr->second);
  for (std::size_t n = 0; n < m.num_samples(); ++n) {
    for (std::size_t k = 0; k < m.num_models(); ++k) {
      if ((m.attackable[n][k] && m.robust[n][k]) || (m.universal_attackable[n] && !m.attackable[n][k]) ||
          (m.universal_robust[n] && !m.robust[n][k])) {
        throw Error(ErrorCode::kInvariantAudit, "inconsistent labels for sample " + m.sample_ids[n]);
      }
    }
  }
  const fs::path path = LabelsPath(method, split);
  Write(path, LabelMatrixToCsv(m));
  const std::string stem = method + "_" + std::string(SplitName(split));
  Write(path.parent_path() / (stem + "_universal.csv"), UniversalLabelsToCsv(m));

  std::string sweep_csv = "model_id,method,epsilon,fraction\n";
  for (const auto& model_id : m.model_ids) {
    const auto sweep = FractionAttackableSweep(records, model_id, config_.sweep_grid);
    for (std::size_t i = 1; i < sweep.size(); ++i) {
      if (sweep[i].second < sweep[i - 1].second) {
        throw Error(ErrorCode::kInvariantAudit, "fraction-attackable sweep decreases for " + model_id);
      }
    }
    for (const auto& [eps, f] : sweep) {
      sweep_csv += JoinCsvRow({model_id, method, FormatDouble(eps), FormatDouble(f)});
    }
  }
  Write(path.parent_path() / (stem + "_sweep.csv"), sweep_csv);
}

void Pipeline::TrainDetectors(const std::string& method) {
  const auto thr = config_.thresholds.find(method);
  if (thr == config_.thresholds.end()) throw Error(ErrorCode::kConfig, "no thresholds for '" + method + "'");
  const Resources& res = resources();
  const LabelMatrix labels = attackscope::Label(LoadRecords(method, Split::kValidation), thr->second);
  DetectorTrainConfig cfg = config_.detector;
  cfg.seed = DeriveSeed(config_.seed, {"detector"});
  std::string summary = "model_id,mode,train_accuracy,final_loss\n";
  for (const auto& model : LoadModels(false)) {
    for (LabelMode mode : config_.modes) {
      const DetectorTrainResult trained =
          TrainDetector(model, res.datasets.at(Split::kValidation), labels, mode, res.bundle.table, cfg);
      const fs::path path = DetectorPath(model.model_id, mode);
      EnsureParent(path);
      SaveDetector(trained.params, Str(path));
      summary += JoinCsvRow({model.model_id, std::string(LabelModeName(mode)),
                             FormatDouble(trained.train_accuracy),
                             FormatDouble(trained.loss_history.back())});
    }
  }
  Write(out() / "detectors" / "training.csv", summary);
}

void Pipeline::Detect(Split split) {
  const Resources& res = resources();
  const Dataset& data = res.datasets.at(split);
  const EmbeddingTable& emb = res.bundle.table;
  const std::vector<ClassifierModel> seen = LoadModels(false);
  const fs::path target_path = ModelPath(config_.target.model_id);
  RequireArtifact(target_path, "train-models");
  const ClassifierModel target = LoadModel(Str(target_path));
  std::vector<const ClassifierModel*> seen_ptrs;
  for (const auto& m : seen) seen_ptrs.push_back(&m);
  const double alpha = config_.aggregation.Alpha(seen.size());

  std::vector<std::string> ids;
  for (const auto& ex : data.examples) ids.push_back(ex.id);

  for (LabelMode mode : config_.modes) {
    std::vector<std::vector<double>> per_model;
    for (const auto& model : seen) {
      const fs::path path = DetectorPath(model.model_id, mode);
      RequireArtifact(path, "train-detectors");
      const DetectorParams params = LoadDetector(Str(path));
      per_model.push_back(DetectorScores(params, model, data, emb));
      Write(ScoresPath(split, "det_" + model.model_id, mode), ScoresToCsv(ids, per_model.back()));
    }
    std::vector<double> mean(ids.size());
    std::vector<double> universal(ids.size());
    std::vector<double> conf_s(ids.size());
    std::vector<double> conf_u(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::vector<double> probs;
      for (const auto& column : per_model) probs.push_back(column[i]);
      mean[i] = AggregateMean(probs);
      universal[i] = AggregateUniversal(probs, alpha);
      const TokenSeq& seq = data.examples[i].seq;
      conf_s[i] = ConfBaseline(ConfVariant::kConfS, mode, &target, seen_ptrs, seq, emb);
      conf_u[i] = ConfBaseline(ConfVariant::kConfU, mode, &target, seen_ptrs, seq, emb);
    }
    Write(ScoresPath(split, "deep_mean", mode), ScoresToCsv(ids, mean));
    Write(ScoresPath(split, "deep_universal", mode), ScoresToCsv(ids, universal));
    Write(ScoresPath(split, "conf_s", mode), ScoresToCsv(ids, conf_s));
    Write(ScoresPath(split, "conf_u", mode), ScoresToCsv(ids, conf_u));
  }
}

void Pipeline::Evaluate(const std::string& protocol, std::optional<Setting> setting,
                        std::optional<LabelMode> mode) {
  std::string eval_method;
  if (protocol == "matched") {
    eval_method = config_.train_method;
  } else if (protocol == "unmatched") {
    eval_method = config_.unmatched_method;
  } else {
    throw Error(ErrorCode::kConfig, "protocol must be 'matched' or 'unmatched', got '" + protocol + "'");
  }
  const LabelMatrix m =
      attackscope::Label(LoadRecords(eval_method, Split::kTest), config_.thresholds.at(eval_method));
  const std::size_t t = m.ModelIndex(config_.target.model_id);

  std::vector<Setting> settings = config_.settings;
  std::vector<LabelMode> modes = config_.modes;
  if (setting) settings = {*setting};
  if (mode) modes = {*mode};

  // Population: test samples the target classifies correctly.
  ReportInputs in;
  in.protocol = protocol;
  in.train_method = config_.train_method;
  in.eval_method = eval_method;
  std::vector<std::size_t> keep;
  for (const auto& ex : dataset(Split::kTest).examples) {
    const std::size_t n = m.SampleIndex(ex.id);
    if (m.defined(n, t)) {
      keep.push_back(n);
      in.detection.sample_ids.push_back(ex.id);
    }
  }
  for (LabelMode md : modes) {
    for (Setting st : settings) {
      const std::vector<bool> all = SettingLabels(m, config_.target.model_id, st, md);
      std::vector<bool> truth;
      for (std::size_t n : keep) truth.push_back(all[n]);
      in.detection.truth[{std::string(SettingName(st)), std::string(LabelModeName(md))}] = truth;
    }
    for (const char* name : kDetectors) {
      const fs::path path = ScoresPath(Split::kTest, name, md);
      RequireArtifact(path, "detect");
      std::map<std::string, double> by_id;
      for (const auto& [id, score] : ScoresFromCsv(internal::ReadFile(Str(path)), Str(path))) by_id[id] = score;
      std::vector<double> scores;
      for (const auto& id : in.detection.sample_ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw Error(ErrorCode::kIdMismatch, Str(path) + " lacks sample " + id);
        scores.push_back(it->second);
      }
      in.detection.scores[{name, std::string(LabelModeName(md))}] = std::move(scores);
    }
  }

  // Rank correlation of the training method with every other method that
  // has test records in this run.
  for (const auto& [name, s] : config_.attacks) {
    if (name == config_.train_method || !fs::exists(RecordsPath(name, Split::kTest))) continue;
    for (const auto& e : Correlate(config_.train_method, name, Split::kTest, std::nullopt)) {
      in.spearman.push_back(e);
    }
  }
  if (fs::exists(FoolingPath(Split::kTest))) {
    const CsvTable table = ReadCsv(Str(FoolingPath(Split::kTest)));
    for (const auto& row : table.rows) {
      in.fooling.push_back({row[table.Column("model_id")], row[table.Column("method")],
                            ParseDouble(row[table.Column("rate")])});
    }
  }

  const std::string report = BuildReport(in);
  const fs::path report_path = ReportPath(protocol);
  Write(report_path, report);
  for (const auto& [truth_key, truth] : in.detection.truth) {
    if (std::count(truth.begin(), truth.end(), true) == 0) continue;
    for (const char* name : kDetectors) {
      const PrCurve curve = SweepPr(in.detection.scores.at({name, truth_key.second}), truth);
      Write(report_path.parent_path() / "pr" /
                (std::string(name) + "_" + truth_key.first + "_" + truth_key.second + ".csv"),
            PrCurveToCsv(curve));
    }
  }
}

std::vector<SpearmanEntry> Pipeline::Correlate(const std::string& method_a,
                                               const std::string& method_b, Split split,
                                               const std::optional<fs::path>& other_run) {
  spec(method_a);
  spec(method_b);
  const auto records_a = LoadRecords(method_a, split);
  std::vector<PerturbationRecord> records_b;
  std::string label_b = method_b;
  if (other_run) {
    RunConfig other = config_;
    other.output_dir = Str(*other_run);
    Pipeline peer(other);
    records_b = peer.LoadRecords(method_b, split);
    label_b = method_b + "@" + other_run->filename().string();
  } else {
    records_b = LoadRecords(method_b, split);
  }

  std::map<std::pair<std::string, std::string>, double> delta_b;
  for (const auto& r : records_b) {
    if (!r.skipped()) delta_b[{r.model_id, r.sample_id}] = r.delta;
  }
  std::vector<std::string> model_order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> pairs;
  for (const auto& r : records_a) {
    if (pairs.count(r.model_id) == 0) {
      model_order.push_back(r.model_id);
      pairs[r.model_id];
    }
    if (r.skipped()) continue;
    const auto it = delta_b.find({r.model_id, r.sample_id});
    if (it == delta_b.end()) continue;
    pairs[r.model_id].first.push_back(r.delta);
    pairs[r.model_id].second.push_back(it->second);
  }

  std::vector<SpearmanEntry> out;
  std::string csv = "model_id,method_a,method_b,samples,rho\n";
  for (const auto& model_id : model_order) {
    const auto& [a, b] = pairs[model_id];
    SpearmanEntry e{model_id, method_a, label_b, std::nullopt, a.size()};
    try {
      e.rho = SpearmanRank(a, b);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kUndefinedCorrelation && err.code() != ErrorCode::kContractViolation) throw;
    }
    csv += JoinCsvRow({model_id, method_a, label_b, std::to_string(e.samples),
                       FormatDouble(e.rho.value_or(std::nan("")))});
    out.push_back(std::move(e));
  }
  Write(CorrelatePath(method_a, other_run ? method_b + "@other" : method_b, split), csv);
  return out;
}

std::vector<FoolingEntry> Pipeline::Fooling(Split split) {
  std::vector<std::vector<PerturbationRecord>> all;
  std::vector<AttackMethodSpec> specs;
  for (const auto& method : config_.fooling_methods) {
    all.push_back(LoadRecords(method, split));
    specs.push_back(spec(method));
  }
  std::vector<std::string> model_order;
  for (const auto& r : all.front()) {
    if (std::find(model_order.begin(), model_order.end(), r.model_id) == model_order.end()) {
      model_order.push_back(r.model_id);
    }
  }
  std::vector<FoolingEntry> out;
  std::string csv = "model_id,method,rate\n";
  for (const auto& model_id : model_order) {
    std::vector<std::vector<PerturbationRecord>> per_method;
    double best = 0.0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      auto& rows = per_method.emplace_back();
      for (const auto& r : all[i]) {
        if (r.model_id == model_id) rows.push_back(r);
      }
      const double rate = FoolingRate(rows, specs[i]);
      best = std::max(best, rate);
      out.push_back({model_id, specs[i].name, rate});
    }
    const double union_rate = UnionFoolingRate(per_method, specs);
    if (union_rate < best) {
      throw Error(ErrorCode::kInvariantAudit, "union fooling rate below an individual rate for " + model_id);
    }
    out.push_back({model_id, "union", union_rate});
  }
  for (const auto& e : out) csv += JoinCsvRow({e.model_id, e.method, FormatDouble(e.rate)});
  Write(FoolingPath(split), csv);
  return out;
}

void Pipeline::RunAll() {
  TrainModels();
  std::set<std::string> test_methods(config_.fooling_methods.begin(), config_.fooling_methods.end());
  test_methods.insert(config_.train_method);
  test_methods.insert(config_.unmatched_method);
  Attack(config_.train_method, Split::kValidation);
  Label(config_.train_method, Split::kValidation);
  for (const auto& method : test_methods) {
    Attack(method, Split::kTest);
    if (config_.thresholds.count(method) > 0) Label(method, Split::kTest);
  }
  TrainDetectors(config_.train_method);
  Detect(Split::kTest);
  Correlate(config_.train_method, config_.unmatched_method, Split::kTest, std::nullopt);
  Fooling(Split::kTest);
  Evaluate("matched", std::nullopt, std::nullopt);
  Evaluate("unmatched", std::nullopt, std::nullopt);
}

}  // namespace attackscope
