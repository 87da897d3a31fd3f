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

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include "attackscope/csv.h"
#include "attackscope/error.h"
#include "json.hpp"
#include "test_util.h"

namespace attackscope {
namespace {

namespace fs = std::filesystem;

const fs::path kSource = ATTACKSCOPE_SOURCE_DIR;

// First `n` lines of a bundled split.
void CopyHead(const fs::path& from, const fs::path& to, int n) {
  std::ifstream in(from);
  std::ofstream out(to);
  std::string line;
  for (int i = 0; i < n && std::getline(in, line); ++i) out << line << "\n";
}

// A reduced copy of the bundled corpus with short classifier training.
class MiniPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(fs::path(::testing::TempDir()) / "attackscope_pipeline_test");
    fs::remove_all(*root_);
    fs::create_directories(*root_ / "data");
    CopyHead(kSource / "data/train.jsonl", *root_ / "data/train.jsonl", 200);
    CopyHead(kSource / "data/validation.jsonl", *root_ / "data/validation.jsonl", 40);
    CopyHead(kSource / "data/test.jsonl", *root_ / "data/test.jsonl", 40);

    nlohmann::json cfg = nlohmann::json::parse(testing::ReadFile(kSource / "configs/default.json"));
    for (const char* name : {"embeddings.txt", "stopwords.txt", "synonyms.json", "pos.json"}) {
      const std::string key = fs::path(name).stem().string();
      cfg["data"][key] = (kSource / "data" / name).string();
    }
    cfg["data"]["train"] = "data/train.jsonl";
    cfg["data"]["validation"] = "data/validation.jsonl";
    cfg["data"]["test"] = "data/test.jsonl";
    cfg["classifier_training"]["epochs"] = 40;
    cfg["threads"] = 2;
    std::ofstream(*root_ / "config.json") << cfg.dump(2);
  }

  static void TearDownTestSuite() {
    fs::remove_all(*root_);
    delete root_;
  }

  static RunConfig Config(const std::string& out) {
    RunConfig cfg = LoadRunConfig((*root_ / "config.json").string());
    cfg.output_dir = (*root_ / out).string();
    return cfg;
  }

  static fs::path* root_;
};

fs::path* MiniPipeline::root_ = nullptr;

TEST_F(MiniPipeline, ConfigResolvesRelativePathsAgainstItsDirectory) {
  const RunConfig cfg = Config("unused");
  EXPECT_EQ(fs::path(cfg.data.train), *root_ / "data/train.jsonl");
  EXPECT_EQ(cfg.seen.size(), 3u);
  EXPECT_EQ(cfg.target.model_id, "t_clip64");
  EXPECT_EQ(cfg.sweep_grid.size(), 40u);
  EXPECT_EQ(cfg.fooling_methods.size(), 4u);
}

TEST_F(MiniPipeline, ConfigErrors) {
  RunConfig cfg = Config("unused");
  cfg.target.model_id = cfg.seen[0].model_id;
  EXPECT_ERROR_CODE(Pipeline{cfg}, ErrorCode::kConfig);

  cfg = Config("unused");
  cfg.train_method = "deepwordbug";
  EXPECT_ERROR_CODE(Pipeline{cfg}, ErrorCode::kUnknownMethod);

  cfg = Config("unused");
  cfg.thresholds.erase("bae_like");
  EXPECT_ERROR_CODE(Pipeline{cfg}, ErrorCode::kConfig);

  cfg = Config("unused");
  cfg.data.pos = "/nonexistent/pos.json";
  EXPECT_ERROR_CODE(Pipeline{cfg}, ErrorCode::kConfig);

  EXPECT_ERROR_CODE(RunConfigFromJson("{\"data\": ", *root_), ErrorCode::kConfig);
  EXPECT_ERROR_CODE(LoadRunConfig("/nonexistent/config.json"), ErrorCode::kConfig);
}

TEST_F(MiniPipeline, StagesReportMissingUpstreamArtifacts) {
  Pipeline p(Config("empty_out"));
  EXPECT_ERROR_CODE(p.Attack("tf_like", Split::kTest), ErrorCode::kMissingArtifact);
  EXPECT_ERROR_CODE(p.Label("tf_like", Split::kTest), ErrorCode::kMissingArtifact);
  EXPECT_ERROR_CODE(p.Detect(Split::kTest), ErrorCode::kMissingArtifact);
  EXPECT_ERROR_CODE(p.Evaluate("matched", std::nullopt, std::nullopt), ErrorCode::kMissingArtifact);
}

TEST_F(MiniPipeline, AttackLabelCorrelateAndFooling) {
  Pipeline p(Config("run"));
  p.TrainModels();
  for (const char* id : {"m_tanh32", "m_clip48", "m_tanh64", "t_clip64"}) {
    EXPECT_TRUE(fs::exists(p.ModelPath(id))) << id;
  }
  const CsvTable accuracy = ReadCsv((p.out() / "models/accuracy.csv").string());
  EXPECT_EQ(accuracy.header, (std::vector<std::string>{"model_id", "role", "split", "accuracy"}));

  p.Attack("tf_like", Split::kTest);
  const auto records = p.LoadRecords("tf_like", Split::kTest);
  EXPECT_EQ(records.size(), 4u * 40u);  // seen models and the target
  const std::string first = testing::ReadFile(p.RecordsPath("tf_like", Split::kTest));
  p.Attack("tf_like", Split::kTest);  // complete output: nothing to redo
  EXPECT_EQ(testing::ReadFile(p.RecordsPath("tf_like", Split::kTest)), first);

  p.Attack("tf_like", Split::kValidation);
  EXPECT_EQ(p.LoadRecords("tf_like", Split::kValidation).size(), 3u * 40u);  // seen models only

  p.Label("tf_like", Split::kTest);
  const fs::path sweep_path =
      p.LabelsPath("tf_like", Split::kTest).parent_path() / "tf_like_test_sweep.csv";
  const CsvTable sweep = ReadCsv(sweep_path.string());
  double previous = -1.0;
  std::string model;
  for (const auto& row : sweep.rows) {
    if (row[0] != model) {
      model = row[0];
      previous = -1.0;
    }
    const double f = ParseDouble(row[sweep.Column("fraction")]);
    EXPECT_GE(f, previous);
    previous = f;
  }

  for (const auto& e : p.Correlate("tf_like", "tf_like", Split::kTest, p.out())) {
    if (e.rho) {
      EXPECT_NEAR(*e.rho, 1.0, 1e-12) << e.model_id;
    }
  }

  p.Attack("bae_like", Split::kTest);
  p.Attack("pwws_like", Split::kTest);
  p.Attack("iga_like", Split::kTest);
  const auto rates = p.Fooling(Split::kTest);
  std::map<std::string, double> best;
  std::map<std::string, double> unions;
  for (const auto& e : rates) {
    if (e.method == "union") {
      unions[e.model_id] = e.rate;
    } else {
      best[e.model_id] = std::max(best[e.model_id], e.rate);
    }
  }
  ASSERT_EQ(unions.size(), 4u);
  for (const auto& [id, rate] : unions) EXPECT_GE(rate, best[id]) << id;
}

TEST_F(MiniPipeline, TamperedRecordsFailTheAudit) {
  Pipeline p(Config("tamper"));
  p.TrainModels();
  p.Attack("tf_like", Split::kTest);
  const fs::path path = p.RecordsPath("tf_like", Split::kTest);
  std::string csv = testing::ReadFile(path);
  // Claim a perturbation size that the stored adversarial example does not have.
  const auto pos = csv.find(",1,");
  ASSERT_NE(pos, std::string::npos) << "no successful attack to tamper with";
  const auto end = csv.find(',', pos + 3);
  csv.replace(pos + 3, end - pos - 3, "0.000123");
  std::ofstream(path) << csv;
  EXPECT_ERROR_CODE(p.Attack("tf_like", Split::kTest), ErrorCode::kInvariantAudit);
}

int RunCli(const std::string& args) {
  const int status = std::system((std::string(ATTACKSCOPE_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(MiniPipeline, CliExitCodes) {
  const std::string config = (*root_ / "config.json").string();
  const std::string out = (*root_ / "cli_out").string();
  EXPECT_EQ(RunCli("train-models --config /nonexistent.json"), 2);
  EXPECT_EQ(RunCli("frobnicate --config " + config), 2);
  EXPECT_EQ(RunCli("evaluate --config " + config + " --out " + out), 3);
  EXPECT_EQ(RunCli("attack --method nosuch --config " + config + " --out " + out), 2);
  EXPECT_EQ(RunCli("train-models --config " + config + " --out " + out), 0);
  EXPECT_EQ(RunCli("evaluate --setting some --config " + config + " --out " + out), 2);
}

TEST(ExitCodeTest, Mapping) {
  EXPECT_EQ(ExitCodeFor(ErrorCode::kConfig), 2);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kUnknownSetting), 2);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kMissingArtifact), 3);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kInvariantAudit), 4);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kParse), 1);
}

}  // namespace
}  // namespace attackscope
