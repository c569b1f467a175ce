/*
 * Copyright 2026 The mosr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef MOSR_METRICS_HPP_
#define MOSR_METRICS_HPP_

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mosr/scoring.hpp"

namespace mosr {

// P(known score > unknown score) with ties counted 1/2.
double Auroc(const std::vector<double>& known_scores, const std::vector<double>& unknown_scores);

struct KnownScore {
  double confidence = 0.0;
  bool correct = false;
};

// Area under CCR versus FPR with thresholds at every observed score,
// accumulated as sum of (FPR step) x (CCR at the step's lower threshold).
double Oscr(const std::vector<KnownScore>& known, const std::vector<double>& unknown_scores);

// Per attribute m: known = records whose true value at m is known.
std::vector<double> KnownScores(const PredictionDump& dump, int attribute);
std::vector<KnownScore> KnownRecords(const PredictionDump& dump, int attribute);
std::vector<double> UnknownScores(const PredictionDump& dump, int attribute);

// values[i][j]: mean confidence of head i over column j, columns
// (Known, OOD_1, ..., OOD_M).
struct ConfidenceMatrix {
  std::vector<std::vector<double>> values;
  std::vector<size_t> counts;
};

ConfidenceMatrix ComputeConfidenceMatrix(const PredictionDump& dump, bool include_unseen_known = true);

enum class MicroFMode {
  // TP/FP/FN summed over known classes; unknown decisions only cost recall
  // or avoid false positives.
  kKnownClasses,
  // Every class including "unknown" contributes (equals accuracy).
  kAllClasses,
};

// F1 of the decisions "unknown if conf < threshold else predicted label" for
// one attribute.
double MicroF1(const PredictionDump& dump, int attribute, double threshold,
               MicroFMode mode = MicroFMode::kKnownClasses);

struct ThresholdSelection {
  std::vector<double> thresholds;
  std::vector<double> micro_f1;
  // Attributes without unknown samples: threshold sits below every score.
  std::vector<bool> flagged;
};

// Per attribute, the candidate maximizing micro-F1 among midpoints of
// consecutive distinct confidences plus one candidate below the minimum and
// one above the maximum; ties go to the larger threshold.
ThresholdSelection SelectThresholds(const PredictionDump& dump, MicroFMode mode = MicroFMode::kKnownClasses);

// Rows: true group (Known, OOD_1..OOD_M, OOD-all); columns: predicted group.
// Rows sum to 100.
struct ExplainabilityMatrix {
  std::vector<std::vector<double>> values;
  std::vector<size_t> row_counts;
  std::vector<double> thresholds;
};

ExplainabilityMatrix ComputeExplainabilityMatrix(const PredictionDump& dump,
                                                 const std::vector<double>& thresholds);

struct EvalOptions {
  bool include_unseen_known = true;
  MicroFMode micro_f = MicroFMode::kKnownClasses;
  // Thresholds chosen on another dump (e.g. validation); default: this one.
  const PredictionDump* threshold_dump = nullptr;
};

struct EvalReport {
  std::string fingerprint;
  std::string scorer;
  std::vector<std::string> attribute_names;
  std::vector<double> auroc, oscr;
  double avg_auroc = 0.0, avg_oscr = 0.0;
  ConfidenceMatrix confidence;
  std::optional<ExplainabilityMatrix> explainability;
  std::vector<double> thresholds;
  std::vector<bool> threshold_flagged;
  std::vector<int64_t> seeds;
  // Per-seed snapshots (each a serialized EvalReport without per_seed).
  std::vector<nlohmann::json> per_seed;
  // Free-form labels (dataset, configuration, baseline); not aggregated.
  nlohmann::json meta = nlohmann::json::object();
};

EvalReport Evaluate(const PredictionDump& dump, const std::string& fingerprint,
                    const EvalOptions& options = {});

// Element-wise mean of every numeric field; snapshots of the inputs are kept.
EvalReport AggregateSeeds(const std::vector<EvalReport>& reports);

nlohmann::json ToJson(const EvalReport& report);
EvalReport EvalReportFromJson(const nlohmann::json& j);

}  // namespace mosr

#endif  // MOSR_METRICS_HPP_
