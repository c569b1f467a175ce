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


#ifndef MOSR_SCORING_HPP_
#define MOSR_SCORING_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mosr/splits.hpp"
#include "mosr/weibull.hpp"

namespace mosr {

using Logits = std::vector<double>;

double MspScore(const Logits& logits);
double MlsScore(const Logits& logits);
// Index of the largest logit; the first one wins ties.
int ArgMax(const Logits& logits);

struct OpenMaxParams {
  int tail_size = 20;
  // Clamped to the class count when fitting.
  int alpha = 3;
  bool correct_only = true;
};

struct OpenMaxClass {
  std::vector<double> mean;
  WeibullTail weibull;
};

// One fitted attribute; immutable after OpenMaxFit.
struct OpenMaxModel {
  std::vector<OpenMaxClass> classes;
  int tail_size = 20;
  int alpha = 3;
};

// `activations` holds one logit vector per training sample with its class in
// `labels`. With correct_only, samples whose argmax differs from the label
// are skipped.
OpenMaxModel OpenMaxFit(const std::vector<Logits>& activations, const std::vector<int>& labels,
                        int num_classes, const OpenMaxParams& params = {});

struct OpenMaxOutput {
  // Known classes first, the unknown pseudo-class last; sums to 1.
  std::vector<double> probabilities;
  int predicted = 0;
  double confidence = 0.0;
};

OpenMaxOutput OpenMaxScore(const OpenMaxModel& model, const Logits& logits);

nlohmann::json ToJson(const OpenMaxModel& model);
OpenMaxModel OpenMaxModelFromJson(const nlohmann::json& j);

enum class Baseline { kMsp, kMls, kOpenMax };
std::string ToString(Baseline b);
Baseline ParseBaseline(const std::string& s);

struct AttributePrediction {
  std::string true_label;
  std::string predicted_label;
  Logits logits;
  double confidence = 0.0;
};

struct PredictionRecord {
  std::string sample_id;
  GroupTag group = GroupTag::KnownSeen();
  std::vector<AttributePrediction> attributes;
};

// The contract between scoring and metrics. Externally produced scores can
// enter through the same CSV + sidecar pair.
struct PredictionDump {
  std::string scorer;
  nlohmann::json hyperparams = nlohmann::json::object();
  std::vector<AttributeDomain> domains;
  std::vector<PredictionRecord> records;

  int num_attributes() const { return static_cast<int>(domains.size()); }
};

// Writes <path> (CSV) and <path minus .csv>.json (sidecar).
void WriteDump(const std::filesystem::path& csv_path, const PredictionDump& dump);
PredictionDump ReadDump(const std::filesystem::path& csv_path);

}  // namespace mosr

#endif  // MOSR_SCORING_HPP_
