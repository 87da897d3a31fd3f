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

// Command-line driver for the attackability pipeline.
//
//   attackscope <command> --config PATH [--seed N] [--out DIR] ...
//
// Exit codes: 0 success, 2 configuration error, 3 missing upstream
// artifact, 4 invariant-audit failure, 1 anything else.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "attackscope/attackability.h"
#include "attackscope/csv.h"
#include "attackscope/error.h"
#include "attackscope/pipeline.h"

namespace {

using attackscope::Pipeline;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::string method;
  std::string against;
  std::string split = "test";
  std::optional<std::string> setting;
  std::optional<std::string> mode;
  std::string protocol = "matched";
  std::optional<std::string> other_run;
};

Pipeline MakePipeline(const Flags& flags) {
  attackscope::RunConfig cfg = attackscope::LoadRunConfig(flags.config);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.out) cfg.output_dir = *flags.out;
  if (flags.threads) cfg.threads = *flags.threads;
  return Pipeline(std::move(cfg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-sample attackability of text classifiers"};
  app.require_subcommand(1);
  Flags flags;

  auto add_common = [&flags](CLI::App* cmd) {
    cmd->add_option("--config", flags.config, "Run configuration (JSON)")->required();
    cmd->add_option("--seed", flags.seed, "Overrides the configured seed");
    cmd->add_option("--out", flags.out, "Overrides the output directory");
    cmd->add_option("--threads", flags.threads, "Attack worker threads");
  };
  auto add_split = [&flags](CLI::App* cmd, const std::string& fallback) {
    flags.split = fallback;
    cmd->add_option("--split", flags.split, "train, validation or test")
        ->check(CLI::IsMember({"train", "validation", "test"}));
  };

  CLI::App* train_models = app.add_subcommand("train-models", "Train the seen pool and the target");
  add_common(train_models);

  CLI::App* attack = app.add_subcommand("attack", "Estimate minimum perturbations");
  add_common(attack);
  attack->add_option("--method", flags.method, "Attack method name")->required();
  add_split(attack, "validation");

  CLI::App* label = app.add_subcommand("label", "Attackable/robust labels and sweeps");
  add_common(label);
  label->add_option("--method", flags.method, "Attack method name")->required();
  add_split(label, "validation");

  CLI::App* train_detectors = app.add_subcommand("train-detectors", "Train per-model detectors");
  add_common(train_detectors);
  train_detectors->add_option("--method", flags.method, "Labels of this method (default: configured)");

  CLI::App* detect = app.add_subcommand("detect", "Score samples with detectors and baselines");
  add_common(detect);
  add_split(detect, "test");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Best-F1 report");
  add_common(evaluate);
  evaluate->add_option("--protocol", flags.protocol, "matched or unmatched")
      ->check(CLI::IsMember({"matched", "unmatched"}));
  evaluate->add_option("--setting", flags.setting, "all, uni, spec or vspec");
  evaluate->add_option("--mode", flags.mode, "attackable or robust");

  CLI::App* correlate = app.add_subcommand("correlate", "Spearman rank correlation of deltas");
  add_common(correlate);
  correlate->add_option("--method", flags.method, "First method")->required();
  correlate->add_option("--against", flags.against, "Second method (default: --method)");
  correlate->add_option("--other-run", flags.other_run, "Compare with this output tree instead");
  add_split(correlate, "test");

  CLI::App* fooling = app.add_subcommand("fooling", "Fooling rates and their union");
  add_common(fooling);
  add_split(fooling, "test");

  CLI::App* all = app.add_subcommand("all", "Run every stage in order");
  add_common(all);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Pipeline pipeline = MakePipeline(flags);
    const attackscope::Split split = attackscope::ParseSplit(flags.split);
    if (train_models->parsed()) {
      pipeline.TrainModels();
    } else if (attack->parsed()) {
      pipeline.Attack(flags.method, split);
    } else if (label->parsed()) {
      pipeline.Label(flags.method, split);
    } else if (train_detectors->parsed()) {
      pipeline.TrainDetectors(flags.method.empty() ? pipeline.config().train_method : flags.method);
    } else if (detect->parsed()) {
      pipeline.Detect(split);
    } else if (evaluate->parsed()) {
      std::optional<attackscope::Setting> setting;
      std::optional<attackscope::LabelMode> mode;
      if (flags.setting) setting = attackscope::ParseSetting(*flags.setting);
      if (flags.mode) mode = attackscope::ParseLabelMode(*flags.mode);
      pipeline.Evaluate(flags.protocol, setting, mode);
      std::cout << pipeline.ReportPath(flags.protocol).string() << "\n";
    } else if (correlate->parsed()) {
      std::optional<std::filesystem::path> other;
      if (flags.other_run) other = *flags.other_run;
      const std::string against = flags.against.empty() ? flags.method : flags.against;
      for (const auto& e : pipeline.Correlate(flags.method, against, split, other)) {
        std::cout << e.model_id << " " << e.method_a << " vs " << e.method_b << ": rho="
                  << attackscope::FormatDouble(e.rho.value_or(std::nan(""))) << " (n=" << e.samples
                  << ")\n";
      }
    } else if (fooling->parsed()) {
      for (const auto& e : pipeline.Fooling(split)) {
        std::cout << e.model_id << " " << e.method << " " << attackscope::FormatDouble(e.rate) << "\n";
      }
    } else if (all->parsed()) {
      pipeline.RunAll();
    }
  } catch (const attackscope::Error& e) {
    std::cerr << "attackscope: " << e.what() << "\n";
    return attackscope::ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "attackscope: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
