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

// From perturbation records to labels. A sample is attackable for a model
// when its estimated minimum perturbation falls strictly below the
// attackable threshold, and robust when it exceeds the robust threshold
// (never-attackable samples, with infinite perturbation, are robust).
// Universal labels intersect the per-model labels over a model pool, and the
// all/uni/spec/vspec settings combine a target model's labels with the
// universal labels of the seen pool.

#ifndef ATTACKSCOPE_ATTACKABILITY_H_
#define ATTACKSCOPE_ATTACKABILITY_H_

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "attackscope/attack_engine.h"

namespace attackscope {

struct Thresholds {
  double attackable = 0.15;
  double robust = 0.35;

  // Throws kConfig unless 0 < attackable < robust.
  void Validate() const;
};

// Per attack method.
using ThresholdConfig = std::map<std::string, Thresholds>;

ThresholdConfig DefaultThresholds();

enum class LabelMode { kAttackable, kRobust };
enum class Setting { kAll, kUni, kSpec, kVspec };

std::string_view LabelModeName(LabelMode mode);
std::string_view SettingName(Setting setting);
// Throw kUnknownSetting.
LabelMode ParseLabelMode(std::string_view name);
Setting ParseSetting(std::string_view name);

// Labels over a samples x models grid for one attack method. Sample order is
// first appearance in the records; model order likewise.
struct LabelMatrix {
  std::string method;
  Thresholds thresholds;
  std::vector<std::string> sample_ids;
  std::vector<std::string> model_ids;
  // [sample][model]; NaN where the model misclassifies the sample.
  std::vector<std::vector<double>> delta;
  std::vector<std::vector<bool>> attackable;
  std::vector<std::vector<bool>> robust;
  // Intersections over every model in the matrix.
  std::vector<bool> universal_attackable;
  std::vector<bool> universal_robust;

  std::size_t num_samples() const { return sample_ids.size(); }
  std::size_t num_models() const { return model_ids.size(); }
  bool defined(std::size_t n, std::size_t k) const;
  // Throw kIdMismatch for unknown ids.
  std::size_t SampleIndex(std::string_view id) const;
  std::size_t ModelIndex(std::string_view id) const;

  const std::vector<std::vector<bool>>& labels(LabelMode mode) const {
    return mode == LabelMode::kAttackable ? attackable : robust;
  }
  // Labels of one model across samples.
  std::vector<bool> Column(std::size_t k, LabelMode mode) const;
};

// Throws kIncompleteGrid listing the missing (sample, model) cells, and
// kContractViolation for duplicate cells or mixed methods.
LabelMatrix Label(const std::vector<PerturbationRecord>& records, const Thresholds& thresholds);

// Set algebra of the four settings for one sample population:
//   all   = T
//   uni   = T and (every seen model)
//   spec  = T and not (every seen model)
//   vspec = T and (no seen model)
// `seen` holds one label vector per seen model.
std::vector<bool> SettingLabels(const std::vector<bool>& target,
                                const std::vector<std::vector<bool>>& seen, Setting setting);

// Convenience over a matrix holding the target and the seen models; every
// other model in the matrix counts as seen.
std::vector<bool> SettingLabels(const LabelMatrix& matrix, std::string_view target_model,
                                Setting setting, LabelMode mode);

// Fraction of attacked (correctly classified) samples with delta < epsilon
// for one model, at each grid value. Samples never fooled stay in the
// denominator. Throws kEmptyInput on an empty grid, kContractViolation on a
// grid that is not strictly increasing, kUndefinedRate without attacked
// samples.
std::vector<std::pair<double, double>> FractionAttackableSweep(
    const std::vector<PerturbationRecord>& records, std::string_view model_id,
    const std::vector<double>& epsilon_grid);

// sample_id,model_id,method,delta,attackable,robust
std::string LabelMatrixToCsv(const LabelMatrix& matrix);
// sample_id,method,universal_attackable,universal_robust
std::string UniversalLabelsToCsv(const LabelMatrix& matrix);
// model_id,method,epsilon,fraction
std::string SweepToCsv(std::string_view model_id, std::string_view method,
                       const std::vector<std::pair<double, double>>& sweep);

}  // namespace attackscope

#endif  // ATTACKSCOPE_ATTACKABILITY_H_
