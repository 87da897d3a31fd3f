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

#include "attackscope/attackability.h"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "attackscope/csv.h"
#include "attackscope/error.h"

namespace attackscope {

namespace {

std::size_t IndexOf(const std::vector<std::string>& ids, std::string_view id,
                    const char* what) {
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) {
    throw Error(ErrorCode::kIdMismatch, std::string("unknown ") + what + " '" + std::string(id) + "'");
  }
  return static_cast<std::size_t>(it - ids.begin());
}

std::string Bool01(bool b) { return b ? "1" : "0"; }

}  // namespace

void Thresholds::Validate() const {
  if (!(attackable > 0.0 && attackable < robust)) {
    throw Error(ErrorCode::kConfig, "thresholds need 0 < attackable < robust, got " +
                                        FormatDouble(attackable) + " and " + FormatDouble(robust));
  }
}

ThresholdConfig DefaultThresholds() {
  return {{"tf_like", {0.15, 0.35}},
          {"bae_like", {0.03, 0.35}},
          {"pwws_like", {0.15, 0.35}},
          {"iga_like", {0.15, 0.35}}};
}

std::string_view LabelModeName(LabelMode mode) {
  return mode == LabelMode::kAttackable ? "attackable" : "robust";
}

std::string_view SettingName(Setting setting) {
  switch (setting) {
    case Setting::kAll: return "all";
    case Setting::kUni: return "uni";
    case Setting::kSpec: return "spec";
    case Setting::kVspec: return "vspec";
  }
  return "?";
}

LabelMode ParseLabelMode(std::string_view name) {
  if (name == "attackable") return LabelMode::kAttackable;
  if (name == "robust") return LabelMode::kRobust;
  throw Error(ErrorCode::kUnknownSetting, "unknown mode '" + std::string(name) + "'");
}

Setting ParseSetting(std::string_view name) {
  for (Setting s : {Setting::kAll, Setting::kUni, Setting::kSpec, Setting::kVspec}) {
    if (SettingName(s) == name) return s;
  }
  throw Error(ErrorCode::kUnknownSetting, "unknown setting '" + std::string(name) + "'");
}

bool LabelMatrix::defined(std::size_t n, std::size_t k) const { return !std::isnan(delta[n][k]); }

std::size_t LabelMatrix::SampleIndex(std::string_view id) const {
  return IndexOf(sample_ids, id, "sample");
}

std::size_t LabelMatrix::ModelIndex(std::string_view id) const {
  return IndexOf(model_ids, id, "model");
}

std::vector<bool> LabelMatrix::Column(std::size_t k, LabelMode mode) const {
  const auto& grid = labels(mode);
  std::vector<bool> out(num_samples());
  for (std::size_t n = 0; n < num_samples(); ++n) out[n] = grid[n][k];
  return out;
}

LabelMatrix Label(const std::vector<PerturbationRecord>& records, const Thresholds& thresholds) {
  thresholds.Validate();
  LabelMatrix m;
  m.thresholds = thresholds;
  std::unordered_map<std::string, std::size_t> sample_index;
  std::unordered_map<std::string, std::size_t> model_index;
  for (const auto& r : records) {
    if (m.method.empty()) m.method = r.method;
    if (r.method != m.method) {
      throw Error(ErrorCode::kContractViolation,
                  "records mix methods '" + m.method + "' and '" + r.method + "'");
    }
    if (sample_index.emplace(r.sample_id, m.sample_ids.size()).second) {
      m.sample_ids.push_back(r.sample_id);
    }
    if (model_index.emplace(r.model_id, m.model_ids.size()).second) {
      m.model_ids.push_back(r.model_id);
    }
  }

  const std::size_t n_samples = m.sample_ids.size();
  const std::size_t n_models = m.model_ids.size();
  std::vector<std::vector<bool>> seen(n_samples, std::vector<bool>(n_models, false));
  m.delta.assign(n_samples, std::vector<double>(n_models, std::nan("")));
  for (const auto& r : records) {
    const std::size_t n = sample_index.at(r.sample_id);
    const std::size_t k = model_index.at(r.model_id);
    if (seen[n][k]) {
      throw Error(ErrorCode::kContractViolation,
                  "duplicate record for (" + r.sample_id + ", " + r.model_id + ")");
    }
    seen[n][k] = true;
    m.delta[n][k] = r.skipped() ? std::nan("") : r.delta;
  }

  std::string missing;
  std::size_t n_missing = 0;
  for (std::size_t n = 0; n < n_samples; ++n) {
    for (std::size_t k = 0; k < n_models; ++k) {
      if (seen[n][k]) continue;
      if (n_missing++ < 20) missing += " (" + m.sample_ids[n] + ", " + m.model_ids[k] + ")";
    }
  }
  if (n_missing > 0) {
    throw Error(ErrorCode::kIncompleteGrid,
                std::to_string(n_missing) + " missing cells:" + missing + (n_missing > 20 ? " ..." : ""));
  }

  m.attackable.assign(n_samples, std::vector<bool>(n_models, false));
  m.robust.assign(n_samples, std::vector<bool>(n_models, false));
  m.universal_attackable.assign(n_samples, n_models > 0);
  m.universal_robust.assign(n_samples, n_models > 0);
  for (std::size_t n = 0; n < n_samples; ++n) {
    for (std::size_t k = 0; k < n_models; ++k) {
      const double d = m.delta[n][k];
      // Comparisons with NaN are false, so undefined cells carry no label.
      m.attackable[n][k] = d < thresholds.attackable;
      m.robust[n][k] = d > thresholds.robust;
      if (!m.attackable[n][k]) m.universal_attackable[n] = false;
      if (!m.robust[n][k]) m.universal_robust[n] = false;
    }
  }
  return m;
}

std::vector<bool> SettingLabels(const std::vector<bool>& target,
                                const std::vector<std::vector<bool>>& seen, Setting setting) {
  for (const auto& column : seen) {
    if (column.size() != target.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "seen labels must cover the target's samples");
    }
  }
  std::vector<bool> out(target.size(), false);
  for (std::size_t n = 0; n < target.size(); ++n) {
    if (!target[n]) continue;
    bool every = true;
    bool any = false;
    for (const auto& column : seen) {
      every = every && column[n];
      any = any || column[n];
    }
    switch (setting) {
      case Setting::kAll: out[n] = true; break;
      case Setting::kUni: out[n] = every; break;
      case Setting::kSpec: out[n] = !every; break;
      case Setting::kVspec: out[n] = !any; break;
    }
  }
  return out;
}

std::vector<bool> SettingLabels(const LabelMatrix& matrix, std::string_view target_model,
                                Setting setting, LabelMode mode) {
  const std::size_t t = matrix.ModelIndex(target_model);
  std::vector<std::vector<bool>> seen;
  for (std::size_t k = 0; k < matrix.num_models(); ++k) {
    if (k != t) seen.push_back(matrix.Column(k, mode));
  }
  return SettingLabels(matrix.Column(t, mode), seen, setting);
}

std::vector<std::pair<double, double>> FractionAttackableSweep(
    const std::vector<PerturbationRecord>& records, std::string_view model_id,
    const std::vector<double>& epsilon_grid) {
  if (epsilon_grid.empty()) throw Error(ErrorCode::kEmptyInput, "empty epsilon grid");
  for (std::size_t i = 1; i < epsilon_grid.size(); ++i) {
    if (!(epsilon_grid[i] > epsilon_grid[i - 1])) {
      throw Error(ErrorCode::kContractViolation, "epsilon grid must be strictly increasing");
    }
  }
  std::vector<double> deltas;
  for (const auto& r : records) {
    if (r.model_id == model_id && !r.skipped()) deltas.push_back(r.delta);
  }
  if (deltas.empty()) {
    throw Error(ErrorCode::kUndefinedRate, "no attacked samples for model '" + std::string(model_id) + "'");
  }
  std::sort(deltas.begin(), deltas.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(epsilon_grid.size());
  for (double eps : epsilon_grid) {
    const auto below = std::lower_bound(deltas.begin(), deltas.end(), eps) - deltas.begin();
    out.emplace_back(eps, static_cast<double>(below) / static_cast<double>(deltas.size()));
  }
  return out;
}

std::string LabelMatrixToCsv(const LabelMatrix& matrix) {
  std::string out = "sample_id,model_id,method,delta,attackable,robust\n";
  for (std::size_t n = 0; n < matrix.num_samples(); ++n) {
    for (std::size_t k = 0; k < matrix.num_models(); ++k) {
      out += JoinCsvRow({matrix.sample_ids[n], matrix.model_ids[k], matrix.method,
                         FormatDouble(matrix.delta[n][k]), Bool01(matrix.attackable[n][k]),
                         Bool01(matrix.robust[n][k])});
    }
  }
  return out;
}

std::string UniversalLabelsToCsv(const LabelMatrix& matrix) {
  std::string out = "sample_id,method,universal_attackable,universal_robust\n";
  for (std::size_t n = 0; n < matrix.num_samples(); ++n) {
    out += JoinCsvRow({matrix.sample_ids[n], matrix.method,
                       Bool01(matrix.universal_attackable[n]), Bool01(matrix.universal_robust[n])});
  }
  return out;
}

std::string SweepToCsv(std::string_view model_id, std::string_view method,
                       const std::vector<std::pair<double, double>>& sweep) {
  std::string out = "model_id,method,epsilon,fraction\n";
  for (const auto& [eps, f] : sweep) {
    out += JoinCsvRow({std::string(model_id), std::string(method), FormatDouble(eps), FormatDouble(f)});
  }
  return out;
}

}  // namespace attackscope
