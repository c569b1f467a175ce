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


#ifndef MOSR_HARNESS_HPP_
#define MOSR_HARNESS_HPP_

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mosr/metrics.hpp"
#include "mosr/model.hpp"
#include "mosr/report.hpp"
#include "mosr/scoring.hpp"
#include "mosr/splits.hpp"

namespace mosr {

struct AssetPaths {
  // UT-Zappos style index (path,label_1,label_2) and its label mapping.
  std::optional<std::filesystem::path> index, mapping;
  // Composite presets: object crops and backgrounds (one label column each).
  std::optional<std::filesystem::path> objects, object_mapping, backgrounds, background_mapping;
};

struct ExperimentConfig {
  std::string dataset = "color-mnist";
  std::optional<CorrelationKind> kind;
  std::vector<Baseline> baselines{Baseline::kMsp};
  Variant variant = Variant::kShared;
  std::vector<int64_t> seeds{0, 1, 2};
  // Default: LeNet-like for color-mnist, ResNet-like otherwise.
  std::optional<BackboneKind> backbone;
  int feature_dim = 128;
  int resnet_width = 64;
  int epochs = 400;
  int batch_size = 128;
  double learning_rate = 0.0;
  std::optional<int> samples_per_combination;
  std::optional<int> test_samples_per_tuple;
  uint64_t dataset_seed = 0;
  int64_t rotation_seed = 0;
  OpenMaxParams openmax;
  bool include_unseen_known = true;
  AssetPaths assets;
  std::filesystem::path out = "runs";

  // At least one baseline; seeds non-empty and distinct; epochs >= 1.
  void Validate() const;
};

nlohmann::json ToJson(const ExperimentConfig& config);
// Missing keys keep their defaults.
ExperimentConfig ExperimentConfigFromJson(const nlohmann::json& j);

enum class RunStatus { kPending, kTrained, kScored, kEvaluated };
std::string ToString(RunStatus s);
RunStatus ParseRunStatus(const std::string& s);

struct RunRecord {
  std::string run_id;
  int64_t seed = 0;
  std::string fingerprint;
  // Stage completed for every requested baseline; never moves backwards.
  RunStatus status = RunStatus::kPending;
  std::map<std::string, RunStatus> baselines;
  std::map<std::string, std::string> artifacts;
  std::string failed_stage;
  std::string error;

  void Advance(RunStatus to);
};

nlohmann::json ToJson(const RunRecord& record);
RunRecord RunRecordFromJson(const nlohmann::json& j);

using LogSink = std::function<void(const std::string&)>;

// Resolved, path-free identity of the data and the training job.
std::string DatasetId(const ExperimentConfig& config);
std::string RunId(const ExperimentConfig& config, int64_t seed);
// Shared by all seeds of one (config, baseline); used to check aggregation.
std::string Fingerprint(const ExperimentConfig& config, Baseline baseline);

// Stage entry points; each is idempotent and skips completed work.
std::filesystem::path EnsureDataset(const ExperimentConfig& config, const LogSink& log = {});
std::filesystem::path EnsureTrained(const ExperimentConfig& config, int64_t seed, const LogSink& log = {});
std::filesystem::path EnsureScored(const ExperimentConfig& config, int64_t seed, Baseline baseline,
                                   const LogSink& log = {});
EvalReport EnsureEvaluated(const ExperimentConfig& config, int64_t seed, Baseline baseline,
                           const LogSink& log = {});

struct ExperimentResult {
  std::filesystem::path experiment_dir;
  std::vector<std::filesystem::path> run_dirs;
  std::map<std::string, EvalReport> reports;  // by baseline name
};

// Per seed: dataset (shared), training, scoring, evaluation; then the
// seed-aggregated report per baseline under <out>/experiments/<id>/.
ExperimentResult RunExperiment(const ExperimentConfig& config, const LogSink& log = {});

// Known metrics: avg_oscr, avg_auroc, oscr_<m>, auroc_<m> (1-based),
// oscr_complex / auroc_complex (attribute 1), oscr_simple / auroc_simple
// (attribute 2). Values are percentages.
double MetricValue(const EvalReport& report, const std::string& metric);

// Rows: baselines (suffix "-D" for the duplicated variant); columns:
// dataset and configuration. Each path is a report JSON file, an experiment
// directory or a run directory.
Table CompareRuns(const std::vector<std::filesystem::path>& reports, const std::string& metric);

struct FigureOutput {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;
};

// <prefix>confidence.png and <prefix>explainability.png plus matching CSVs.
FigureOutput EmitFigures(const EvalReport& report, const std::filesystem::path& out_dir,
                         const std::string& prefix = "");

}  // namespace mosr

#endif  // MOSR_HARNESS_HPP_
