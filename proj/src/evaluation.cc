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

#include "attackscope/evaluation.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "attackscope/csv.h"
#include "attackscope/error.h"
#include "json_util.h"

namespace attackscope {

namespace {

using internal::json;

double Ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// Sentinel strictly outside [lo, hi] even for large magnitudes.
double Below(double lo) { return lo - std::max(1.0, std::abs(lo)); }
double Above(double hi) { return hi + std::max(1.0, std::abs(hi)); }

}  // namespace

Prf PrfFromCounts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  Prf out;
  out.tp = tp;
  out.fp = fp;
  out.fn = fn;
  out.precision = Ratio(tp, tp + fp);
  out.recall = Ratio(tp, tp + fn);
  const double sum = out.precision + out.recall;
  out.f1 = sum == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / sum;
  return out;
}

Prf PrfAtThreshold(const std::vector<double>& scores, const std::vector<bool>& truth, double beta) {
  if (scores.size() != truth.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "scores and truth differ in length");
  }
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > beta;
    if (predicted && truth[i]) ++tp;
    if (predicted && !truth[i]) ++fp;
    if (!predicted && truth[i]) ++fn;
  }
  return PrfFromCounts(tp, fp, fn);
}

Prf PrfAtThreshold(const std::vector<std::pair<std::string, double>>& scores,
                   const std::map<std::string, bool>& truth, double beta) {
  if (scores.size() != truth.size()) {
    throw Error(ErrorCode::kIdMismatch, std::to_string(scores.size()) + " scores but " +
                                            std::to_string(truth.size()) + " truth labels");
  }
  std::vector<double> s;
  std::vector<bool> t;
  std::set<std::string> used;
  for (const auto& [id, score] : scores) {
    const auto it = truth.find(id);
    if (it == truth.end() || !used.insert(id).second) {
      throw Error(ErrorCode::kIdMismatch, "score id '" + id + "' has no unique truth label");
    }
    s.push_back(score);
    t.push_back(it->second);
  }
  return PrfAtThreshold(s, t, beta);
}

PrCurve SweepPr(const std::vector<double>& scores, const std::vector<bool>& truth) {
  if (scores.size() != truth.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "scores and truth differ in length");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error(ErrorCode::kContractViolation, "scores must be finite");
  }
  const auto total_pos = std::count(truth.begin(), truth.end(), true);
  if (total_pos == 0) throw Error(ErrorCode::kUndefinedRecall, "truth has no positives");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Distinct values ascending with the label counts at each.
  std::vector<double> values;
  std::vector<std::int64_t> pos;
  std::vector<std::int64_t> neg;
  for (std::size_t i : order) {
    if (values.empty() || scores[i] != values.back()) {
      values.push_back(scores[i]);
      pos.push_back(0);
      neg.push_back(0);
    }
    (truth[i] ? pos : neg).back() += 1;
  }

  const std::size_t m = values.size();
  // Grid point i predicts positive exactly the groups i..m-1.
  std::vector<double> betas(m + 1);
  betas[0] = Below(values.front());
  for (std::size_t i = 1; i < m; ++i) {
    double mid = values[i - 1] + (values[i] - values[i - 1]) / 2.0;
    if (!(mid < values[i])) mid = values[i - 1];
    betas[i] = mid;
  }
  betas[m] = Above(values.back());

  PrCurve curve;
  curve.points.resize(m + 1);
  std::int64_t tp = total_pos;
  std::int64_t fp = static_cast<std::int64_t>(scores.size()) - total_pos;
  for (std::size_t i = 0; i <= m; ++i) {
    if (i > 0) {
      tp -= pos[i - 1];
      fp -= neg[i - 1];
    }
    const Prf prf = PrfFromCounts(tp, fp, total_pos - tp);
    curve.points[i] = {betas[i], prf.precision, prf.recall, prf.f1};
    const PrPoint& best = curve.points[curve.best];
    if (prf.f1 > best.f1 || (prf.f1 == best.f1 && prf.precision > best.precision)) curve.best = i;
  }
  return curve;
}

std::string PrCurveToCsv(const PrCurve& curve) {
  std::string out = "beta,precision,recall,f1\n";
  for (const auto& p : curve.points) {
    out += JoinCsvRow({FormatDouble(p.beta), FormatDouble(p.precision), FormatDouble(p.recall),
                       FormatDouble(p.f1)});
  }
  return out;
}

std::vector<double> AverageRanks(const std::vector<double>& values) {
  for (double v : values) {
    if (std::isnan(v)) throw Error(ErrorCode::kContractViolation, "cannot rank NaN");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start + 1;
    while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
    // Ranks start..end-1 (0-based) average to (start + end + 1) / 2 in 1-based terms.
    const double rank = static_cast<double>(start + end + 1) / 2.0;
    for (std::size_t i = start; i < end; ++i) ranks[order[i]] = rank;
    start = end;
  }
  return ranks;
}

double SpearmanRank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "rank lists differ in length");
  }
  if (a.size() < 3) throw Error(ErrorCode::kContractViolation, "need at least 3 pairs");
  const std::vector<double> ra = AverageRanks(a);
  const std::vector<double> rb = AverageRanks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw Error(ErrorCode::kUndefinedCorrelation, "a rank list has zero variance");
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::string BuildReport(const ReportInputs& inputs) {
  const DetectionInputs& det = inputs.detection;
  const std::size_t n = det.sample_ids.size();

  std::set<std::string> detectors;
  for (const auto& [key, scores] : det.scores) {
    detectors.insert(key.first);
    if (scores.size() != n) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "scores of " + key.first + "/" + key.second + " do not cover the samples");
    }
  }

  json detection = json::object();
  for (const auto& [key, truth] : det.truth) {
    const auto& [setting, mode] = key;
    if (truth.size() != n) {
      throw Error(ErrorCode::kDimensionMismatch, "truth of " + setting + "/" + mode + " does not cover the samples");
    }
    const auto positives = std::count(truth.begin(), truth.end(), true);
    json row = json::object();
    for (const std::string& name : detectors) {
      const auto it = det.scores.find({name, mode});
      if (it == det.scores.end()) {
        throw Error(ErrorCode::kMissingArtifact, "no " + mode + " scores for detector " + name);
      }
      json cell;
      cell["positives"] = positives;
      cell["samples"] = n;
      if (positives == 0) {
        cell["best_f1"] = nullptr;
      } else {
        const PrCurve curve = SweepPr(it->second, truth);
        const PrPoint& best = curve.best_point();
        cell["best_f1"] = best.f1;
        cell["precision"] = best.precision;
        cell["recall"] = best.recall;
        cell["beta"] = best.beta;
      }
      row[name] = std::move(cell);
    }
    detection[setting][mode] = std::move(row);
  }

  json spearman = json::array();
  for (const auto& e : inputs.spearman) {
    json entry;
    entry["model_id"] = e.model_id;
    entry["method_a"] = e.method_a;
    entry["method_b"] = e.method_b;
    entry["samples"] = e.samples;
    entry["rho"] = e.rho ? json(*e.rho) : json(nullptr);
    spearman.push_back(std::move(entry));
  }

  json fooling = json::object();
  for (const auto& e : inputs.fooling) fooling[e.model_id][e.method] = e.rate;
  for (const auto& [model, row] : fooling.items()) {
    if (!row.contains("union")) continue;
    const double u = row["union"].get<double>();
    for (const auto& [method, rate] : row.items()) {
      if (rate.get<double>() > u) {
        throw Error(ErrorCode::kInvariantAudit,
                    "union fooling rate of " + model + " is below " + method + "'s");
      }
    }
  }

  json report;
  report["protocol"] = inputs.protocol;
  report["train_method"] = inputs.train_method;
  report["eval_method"] = inputs.eval_method;
  report["samples"] = n;
  report["detection"] = std::move(detection);
  report["spearman"] = std::move(spearman);
  report["fooling"] = std::move(fooling);
  return report.dump(2) + "\n";
}

}  // namespace attackscope
