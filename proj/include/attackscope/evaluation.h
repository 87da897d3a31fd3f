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

// Detection metrics and cross-method comparisons.
//
// Scores are turned into decisions by "score > beta". Sweeping beta over
// the midpoints between consecutive distinct scores (plus one sentinel below
// and one above every score) visits each achievable operating point exactly
// once, so the best F1 on the curve is the best F1 of any threshold.

#ifndef ATTACKSCOPE_EVALUATION_H_
#define ATTACKSCOPE_EVALUATION_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace attackscope {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

// precision = 0 when nothing is predicted positive, recall = 0 when there
// are no positives, F1 = 0 when precision + recall = 0.
Prf PrfFromCounts(std::int64_t tp, std::int64_t fp, std::int64_t fn);

// Scores and truth aligned by position. Throws kDimensionMismatch.
Prf PrfAtThreshold(const std::vector<double>& scores, const std::vector<bool>& truth, double beta);

// Scores and truth keyed by sample id; throws kIdMismatch unless both cover
// exactly the same ids.
Prf PrfAtThreshold(const std::vector<std::pair<std::string, double>>& scores,
                   const std::map<std::string, bool>& truth, double beta);

struct PrPoint {
  double beta = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // beta strictly increasing
  std::size_t best = 0;         // highest F1, ties toward higher precision

  const PrPoint& best_point() const { return points[best]; }
};

// Throws kUndefinedRecall when truth has no positives, kDimensionMismatch
// on misaligned inputs and kContractViolation on non-finite scores.
PrCurve SweepPr(const std::vector<double>& scores, const std::vector<bool>& truth);

// beta,precision,recall,f1
std::string PrCurveToCsv(const PrCurve& curve);

// Positions of each value in sorted order, starting at 1, with tied values
// (including several +inf) sharing their average rank. NaN is rejected.
std::vector<double> AverageRanks(const std::vector<double>& values);

// Pearson correlation of average ranks. Throws kDimensionMismatch on
// unequal lengths, kContractViolation below 3 values and
// kUndefinedCorrelation when either side has a single distinct value.
double SpearmanRank(const std::vector<double>& a, const std::vector<double>& b);

// Inputs of a detection report. Detector scores and ground truth are over
// one shared, ordered sample population.
struct DetectionInputs {
  std::vector<std::string> sample_ids;
  // (setting, mode) -> truth, e.g. ("uni", "attackable").
  std::map<std::pair<std::string, std::string>, std::vector<bool>> truth;
  // (detector, mode) -> scores, e.g. ("deep_universal", "robust").
  std::map<std::pair<std::string, std::string>, std::vector<double>> scores;
};

struct SpearmanEntry {
  std::string model_id;
  std::string method_a;
  std::string method_b;
  std::optional<double> rho;  // empty when undefined
  std::size_t samples = 0;
};

struct FoolingEntry {
  std::string model_id;
  std::string method;  // "union" for the union row
  double rate = 0.0;
};

struct ReportInputs {
  std::string protocol;      // "matched" or "unmatched"
  std::string train_method;  // method whose labels trained the detectors
  std::string eval_method;   // method whose labels define the truth
  DetectionInputs detection;
  std::vector<SpearmanEntry> spearman;
  std::vector<FoolingEntry> fooling;
};

// JSON with a "detection" table (setting -> mode -> detector -> best F1 and
// its operating point), a "spearman" list and a "fooling" table.
// Settings without positives report a null F1. Deterministic: identical
// inputs give identical bytes.
std::string BuildReport(const ReportInputs& inputs);

}  // namespace attackscope

#endif  // ATTACKSCOPE_EVALUATION_H_
