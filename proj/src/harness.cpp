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


#include "mosr/harness.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <set>

#include "mosr/datagen.hpp"
#include "mosr/digits.hpp"
#include "mosr/error.hpp"
#include "mosr/ingest.hpp"
#include "mosr/util.hpp"

namespace mosr {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Exclusive advisory lock held for the object's lifetime; released by the
// kernel if the process dies.
class FileLock {
 public:
  explicit FileLock(const fs::path& path) {
    fs::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0 || ::flock(fd_, LOCK_EX) != 0) throw Error(ErrorKind::kIo, "cannot lock " + path.string());
  }
  ~FileLock() {
    if (fd_ >= 0) ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

void Log(const LogSink& log, const std::string& msg) {
  if (log) log(msg);
}

std::string ShortHash(const json& j) { return HexDigest(Fnv1a64(j.dump())).substr(0, 12); }

struct Resolved {
  Preset preset;
  SplitPlan plan;
  BackboneKind backbone;
};

Resolved Resolve(const ExperimentConfig& c) {
  Resolved r;
  r.preset = LoadPreset(c.dataset);
  if (c.samples_per_combination) r.preset.samples_per_combination = *c.samples_per_combination;
  if (c.test_samples_per_tuple) r.preset.test_samples_per_tuple = *c.test_samples_per_tuple;
  r.preset.Validate();
  r.plan = MakeSplitPlan(r.preset, c.kind, c.rotation_seed);
  r.backbone = c.backbone.value_or(r.preset.generator == "color-mnist" ? BackboneKind::kLeNet
                                                                       : BackboneKind::kResNet18);
  return r;
}

json AssetsJson(const AssetPaths& a) {
  json j = json::object();
  const auto put = [&](const char* key, const std::optional<fs::path>& p) {
    if (p) j[key] = fs::absolute(*p).lexically_normal().string();
  };
  put("index", a.index);
  put("mapping", a.mapping);
  put("objects", a.objects);
  put("object_mapping", a.object_mapping);
  put("backgrounds", a.backgrounds);
  put("background_mapping", a.background_mapping);
  return j;
}

json ModelJson(const ExperimentConfig& c, const Resolved& r) {
  BackboneSpec b{r.backbone, c.feature_dim, c.resnet_width};
  return ToJson(ModelSpec::ForPlan(r.plan, b, c.variant, r.preset.image_size));
}

json TrainingJson(const ExperimentConfig& c) {
  return {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate}};
}

fs::path RunDir(const ExperimentConfig& c, int64_t seed) { return c.out / "runs" / RunId(c, seed); }

RunRecord LoadRecord(const fs::path& dir) {
  if (!fs::exists(dir / "run.json")) return {};
  try {
    return RunRecordFromJson(json::parse(ReadFile(dir / "run.json")));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIo, (dir / "run.json").string() + ": " + e.what());
  }
}

void SaveRecord(const fs::path& dir, const RunRecord& r) {
  WriteFileAtomic(dir / "run.json", ToJson(r).dump(2) + "\n");
}

// Runs `body`; on failure records the stage in run.json and rethrows with
// the stage name in the message.
template <typename F>
auto Stage(const fs::path& dir, const std::string& stage, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    RunRecord r = LoadRecord(dir);
    r.failed_stage = stage;
    r.error = e.what();
    if (fs::exists(dir)) SaveRecord(dir, r);
    const auto* err = dynamic_cast<const Error*>(&e);
    throw Error(err ? err->kind() : ErrorKind::kIo, "stage " + stage + " failed: " + e.what());
  }
}

Logits RowOf(const Matrix& m, size_t row) {
  Logits out(static_cast<size_t>(m.cols()));
  for (Eigen::Index k = 0; k < m.cols(); ++k) out[static_cast<size_t>(k)] = m(static_cast<Eigen::Index>(row), k);
  return out;
}

std::string PredictionsName(Baseline b) { return "predictions_" + ToString(b) + ".csv"; }
std::string ReportName(Baseline b) { return "report_" + ToString(b) + ".json"; }

void UpdateOverallStatus(RunRecord& r, const ExperimentConfig& c) {
  RunStatus lowest = RunStatus::kEvaluated;
  for (Baseline b : c.baselines) {
    const auto it = r.baselines.find(ToString(b));
    const RunStatus s = it == r.baselines.end() ? RunStatus::kTrained : it->second;
    lowest = std::min(lowest, s);
  }
  r.Advance(lowest);
  r.failed_stage.clear();
  r.error.clear();
}

std::string Upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::toupper(ch); });
  return s;
}

}  // namespace

// ---------------------------------------------------------------- config

void ExperimentConfig::Validate() const {
  if (baselines.empty()) throw Error(ErrorKind::kConfiguration, "at least one baseline is required");
  if (seeds.empty()) throw Error(ErrorKind::kConfiguration, "at least one seed is required");
  if (std::set<int64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw Error(ErrorKind::kConfiguration, "seeds must be distinct");
  }
  if (epochs < 1) throw Error(ErrorKind::kConfiguration, "epochs must be at least 1");
  if (batch_size < 2) throw Error(ErrorKind::kConfiguration, "batch_size must be at least 2");
  if (learning_rate < 0.0) throw Error(ErrorKind::kConfiguration, "learning_rate must be positive");
}

json ToJson(const ExperimentConfig& c) {
  json j;
  j["dataset"] = c.dataset;
  if (c.kind) j["config"] = ShortName(*c.kind);
  j["baselines"] = json::array();
  for (Baseline b : c.baselines) j["baselines"].push_back(ToString(b));
  j["variant"] = ToString(c.variant);
  j["seeds"] = c.seeds;
  if (c.backbone) j["backbone"] = ToString(*c.backbone);
  j["feature_dim"] = c.feature_dim;
  j["resnet_width"] = c.resnet_width;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  if (c.samples_per_combination) j["samples_per_combination"] = *c.samples_per_combination;
  if (c.test_samples_per_tuple) j["test_samples_per_tuple"] = *c.test_samples_per_tuple;
  j["dataset_seed"] = c.dataset_seed;
  j["rotation_seed"] = c.rotation_seed;
  j["openmax"] = {{"tail_size", c.openmax.tail_size},
                  {"alpha", c.openmax.alpha},
                  {"correct_only", c.openmax.correct_only}};
  j["include_unseen_known"] = c.include_unseen_known;
  j["assets"] = AssetsJson(c.assets);
  j["out"] = c.out.string();
  return j;
}

ExperimentConfig ExperimentConfigFromJson(const json& j) {
  try {
    ExperimentConfig c;
    c.dataset = j.value("dataset", c.dataset);
    if (j.contains("config")) c.kind = ParseCorrelationKind(j.at("config").get<std::string>());
    if (j.contains("baselines")) {
      c.baselines.clear();
      for (const auto& b : j.at("baselines")) c.baselines.push_back(ParseBaseline(b.get<std::string>()));
    }
    if (j.contains("variant")) c.variant = ParseVariant(j.at("variant").get<std::string>());
    c.seeds = j.value("seeds", c.seeds);
    if (j.contains("backbone")) c.backbone = ParseBackboneKind(j.at("backbone").get<std::string>());
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.resnet_width = j.value("resnet_width", c.resnet_width);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    if (j.contains("samples_per_combination")) c.samples_per_combination = j.at("samples_per_combination").get<int>();
    if (j.contains("test_samples_per_tuple")) c.test_samples_per_tuple = j.at("test_samples_per_tuple").get<int>();
    c.dataset_seed = j.value("dataset_seed", c.dataset_seed);
    c.rotation_seed = j.value("rotation_seed", c.rotation_seed);
    if (j.contains("openmax")) {
      const auto& o = j.at("openmax");
      c.openmax.tail_size = o.value("tail_size", c.openmax.tail_size);
      c.openmax.alpha = o.value("alpha", c.openmax.alpha);
      c.openmax.correct_only = o.value("correct_only", c.openmax.correct_only);
    }
    c.include_unseen_known = j.value("include_unseen_known", c.include_unseen_known);
    if (j.contains("assets")) {
      const auto& a = j.at("assets");
      const auto get = [&](const char* key, std::optional<fs::path>& dst) {
        if (a.contains(key)) dst = a.at(key).get<std::string>();
      };
      get("index", c.assets.index);
      get("mapping", c.assets.mapping);
      get("objects", c.assets.objects);
      get("object_mapping", c.assets.object_mapping);
      get("backgrounds", c.assets.backgrounds);
      get("background_mapping", c.assets.background_mapping);
    }
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfiguration, std::string("malformed experiment config: ") + e.what());
  }
}

std::string ToString(RunStatus s) {
  switch (s) {
    case RunStatus::kPending: return "pending";
    case RunStatus::kTrained: return "trained";
    case RunStatus::kScored: return "scored";
    case RunStatus::kEvaluated: return "evaluated";
  }
  return "?";
}

RunStatus ParseRunStatus(const std::string& s) {
  if (s == "pending") return RunStatus::kPending;
  if (s == "trained") return RunStatus::kTrained;
  if (s == "scored") return RunStatus::kScored;
  if (s == "evaluated") return RunStatus::kEvaluated;
  throw Error(ErrorKind::kIo, "unknown run status '" + s + "'");
}

void RunRecord::Advance(RunStatus to) { status = std::max(status, to); }

json ToJson(const RunRecord& r) {
  json baselines = json::object();
  for (const auto& [name, s] : r.baselines) baselines[name] = ToString(s);
  return {{"run_id", r.run_id},         {"seed", r.seed},
          {"fingerprint", r.fingerprint}, {"status", ToString(r.status)},
          {"baselines", baselines},     {"artifacts", r.artifacts},
          {"failed_stage", r.failed_stage}, {"error", r.error}};
}

RunRecord RunRecordFromJson(const json& j) {
  RunRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.seed = j.at("seed").get<int64_t>();
  r.fingerprint = j.value("fingerprint", std::string());
  r.status = ParseRunStatus(j.at("status").get<std::string>());
  const json baselines = j.value("baselines", json::object());
  for (const auto& [name, s] : baselines.items()) {
    r.baselines[name] = ParseRunStatus(s.get<std::string>());
  }
  r.artifacts = j.value("artifacts", std::map<std::string, std::string>{});
  r.failed_stage = j.value("failed_stage", std::string());
  r.error = j.value("error", std::string());
  return r;
}

// ---------------------------------------------------------------- identities

std::string DatasetId(const ExperimentConfig& c) {
  const Resolved r = Resolve(c);
  const json key = {{"preset", ToJson(r.preset)},
                    {"plan", ToJson(r.plan)},
                    {"dataset_seed", c.dataset_seed},
                    {"assets", AssetsJson(c.assets)}};
  return r.preset.name + "-" + ShortName(r.plan.config.kind) + "-" + ShortHash(key);
}

std::string RunId(const ExperimentConfig& c, int64_t seed) {
  const Resolved r = Resolve(c);
  const json key = {{"dataset", DatasetId(c)}, {"model", ModelJson(c, r)}, {"training", TrainingJson(c)},
                    {"seed", seed}};
  return r.preset.name + "-" + ShortName(r.plan.config.kind) + "-" + ToString(c.variant) + "-" +
         ToString(r.backbone) + "-s" + std::to_string(seed) + "-" + ShortHash(key);
}

std::string Fingerprint(const ExperimentConfig& c, Baseline baseline) {
  const Resolved r = Resolve(c);
  json key = {{"dataset", DatasetId(c)},
              {"model", ModelJson(c, r)},
              {"training", TrainingJson(c)},
              {"baseline", ToString(baseline)},
              {"include_unseen_known", c.include_unseen_known}};
  if (baseline == Baseline::kOpenMax) {
    key["openmax"] = {{"tail_size", c.openmax.tail_size},
                      {"alpha", c.openmax.alpha},
                      {"correct_only", c.openmax.correct_only}};
  }
  return ShortHash(key);
}

// ---------------------------------------------------------------- stages

fs::path EnsureDataset(const ExperimentConfig& c, const LogSink& log) {
  const std::string id = DatasetId(c);
  const fs::path dir = c.out / "datasets" / id;
  FileLock lock(c.out / "datasets" / (id + ".lock"));
  if (fs::exists(dir / "manifest.csv") && fs::exists(dir / "generator.json")) return dir;

  const Resolved r = Resolve(c);
  Log(log, "generating dataset " + id);
  DatasetManifest manifest;
  try {
    if (r.preset.generator == "color-mnist") {
      manifest = GenerateColorMnist(r.plan, LoadDigitPool(), r.preset.colors, c.dataset_seed,
                                    {false, r.preset.image_size});
    } else if (r.preset.generator == "composite") {
      if (!c.assets.objects) throw Error(ErrorKind::kConfiguration, "composite presets need assets.objects");
      IngestOptions opts;
      opts.image_size = r.preset.image_size;
      const auto objects = LoadAssetIndex(*c.assets.objects, c.assets.object_mapping, {r.plan.domains[0].name});
      ExternalAssetIndex backgrounds;
      if (c.assets.backgrounds) {
        backgrounds = LoadAssetIndex(*c.assets.backgrounds, c.assets.background_mapping, {r.plan.domains[1].name});
      } else if (!r.preset.colors.empty()) {
        backgrounds = FlatColorBackgrounds(r.preset.colors);
      } else {
        throw Error(ErrorKind::kConfiguration, "preset '" + r.preset.name + "' needs assets.backgrounds");
      }
      manifest = IngestComposite(objects, backgrounds, r.plan, c.dataset_seed, opts);
    } else if (r.preset.generator == "external") {
      if (!c.assets.index) throw Error(ErrorKind::kConfiguration, "external presets need assets.index");
      std::vector<std::string> names;
      for (const auto& d : r.plan.domains) names.push_back(d.name);
      IngestOptions opts;
      opts.image_size = r.preset.image_size;
      manifest = IngestUtZappos(LoadAssetIndex(*c.assets.index, c.assets.mapping, names), r.plan,
                                c.dataset_seed, opts);
    } else {
      throw Error(ErrorKind::kConfiguration, "unknown generator '" + r.preset.generator + "'");
    }
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage generate failed: ") + e.what());
  }
  manifest.generator["preset"] = r.preset.name;
  const auto violations = ValidateManifest(manifest);
  if (!violations.empty()) {
    throw Error(ErrorKind::kGeneration, "stage generate failed: " + std::to_string(violations.size()) +
                                            " manifest violations, first: " + violations.front());
  }
  const fs::path partial = c.out / "datasets" / (id + ".partial");
  fs::remove_all(partial);
  WriteDataset(manifest, partial);
  fs::rename(partial, dir);
  Log(log, "dataset written to " + dir.string());
  return dir;
}

fs::path EnsureTrained(const ExperimentConfig& c, int64_t seed, const LogSink& log) {
  c.Validate();
  const fs::path dataset_dir = EnsureDataset(c, log);
  const fs::path dir = RunDir(c, seed);
  fs::create_directories(dir);
  FileLock lock(dir / ".lock");
  RunRecord record = LoadRecord(dir);
  if (record.status >= RunStatus::kTrained && fs::exists(dir / "checkpoint.bin")) return dir;

  return Stage(dir, "train", [&] {
    const Resolved r = Resolve(c);
    record.run_id = RunId(c, seed);
    record.seed = seed;
    record.fingerprint = ShortHash({{"dataset", DatasetId(c)}, {"model", ModelJson(c, r)}, {"training", TrainingJson(c)}});
    record.failed_stage.clear();
    record.error.clear();
    json snapshot = ToJson(c);
    snapshot["seeds"] = {seed};
    WriteFileAtomic(dir / "config.json", snapshot.dump(2) + "\n");
    SaveRecord(dir, record);

    DatasetManifest manifest = ReadDataset(dataset_dir);
    LoadImages(manifest, Partition::kTrain);
    LoadImages(manifest, Partition::kVal);
    const LabeledSet train = MakeLabeledSet(manifest, Partition::kTrain);
    const LabeledSet val = MakeLabeledSet(manifest, Partition::kVal);
    const ModelSpec spec = ModelSpec::ForPlan(manifest.plan, {r.backbone, c.feature_dim, c.resnet_width},
                                              c.variant, manifest.image_size);
    TrainConfig tc;
    tc.learning_rate = c.learning_rate;
    tc.max_epochs = c.epochs;
    tc.batch_size = c.batch_size;
    tc.seed = static_cast<uint64_t>(seed);
    Log(log, "training " + record.run_id + " on " + std::to_string(train.size()) + " samples");
    TrainResult result = Train(spec, train, val, tc, [&](const EpochLog& e) {
      std::string accs;
      for (double a : e.val_acc) accs += " " + FormatDouble(std::round(a * 1e4) / 1e4);
      Log(log, "  epoch " + std::to_string(e.epoch) + "/" + std::to_string(c.epochs) + " train " +
                   FormatDouble(std::round(e.train_total * 1e4) / 1e4) + " val " +
                   FormatDouble(std::round(e.val_total * 1e4) / 1e4) + " val_acc" + accs);
    });
    SaveCheckpoint(dir / "checkpoint.bin", *result.model, tc, result.log.selected_epoch);
    WriteCsv(dir / "train_log.csv", result.log.ToCsv());
    record.artifacts["dataset"] = fs::relative(dataset_dir, dir).string();
    record.artifacts["checkpoint"] = "checkpoint.bin";
    record.artifacts["train_log"] = "train_log.csv";
    record.artifacts["config"] = "config.json";
    record.Advance(RunStatus::kTrained);
    SaveRecord(dir, record);
    Log(log, "selected epoch " + std::to_string(result.log.selected_epoch));
    return dir;
  });
}

fs::path EnsureScored(const ExperimentConfig& c, int64_t seed, Baseline baseline, const LogSink& log) {
  const fs::path dir = EnsureTrained(c, seed, log);
  const fs::path out = dir / PredictionsName(baseline);
  FileLock lock(dir / ".lock");
  RunRecord record = LoadRecord(dir);
  const auto it = record.baselines.find(ToString(baseline));
  if (it != record.baselines.end() && it->second >= RunStatus::kScored && fs::exists(out)) return out;

  return Stage(dir, "score", [&] {
    Log(log, "scoring " + record.run_id + " with " + ToString(baseline));
    Checkpoint ck = LoadCheckpoint(dir / "checkpoint.bin");
    DatasetManifest manifest = ReadDataset(EnsureDataset(c, log));
    LoadImages(manifest, Partition::kTest);
    const auto& domains = manifest.plan.domains;
    const int m = manifest.plan.num_attributes();
    const auto test_idx = manifest.Indices(Partition::kTest);
    std::vector<const Image*> images;
    for (size_t i : test_idx) images.push_back(&manifest.records[i].image);
    const auto logits = ExtractActivations(*ck.model, images);

    PredictionDump dump;
    dump.scorer = ToString(baseline);
    dump.domains = domains;
    std::vector<OpenMaxModel> openmax;
    if (baseline == Baseline::kOpenMax) {
      LoadImages(manifest, Partition::kTrain);
      const LabeledSet train = MakeLabeledSet(manifest, Partition::kTrain);
      const auto train_logits = ExtractActivations(*ck.model, train.images);
      json models = json::array();
      for (int a = 0; a < m; ++a) {
        std::vector<Logits> acts(train.size());
        std::vector<int> labels(train.size());
        for (size_t n = 0; n < train.size(); ++n) {
          acts[n] = RowOf(train_logits[a], n);
          labels[n] = train.labels[n][a];
        }
        openmax.push_back(OpenMaxFit(acts, labels, static_cast<int>(domains[a].known_values.size()), c.openmax));
        models.push_back(ToJson(openmax.back()));
      }
      WriteFileAtomic(dir / "openmax_model.json", models.dump(2) + "\n");
      dump.hyperparams = {{"tail_size", c.openmax.tail_size},
                          {"alpha", openmax.front().alpha},
                          {"correct_only", c.openmax.correct_only},
                          {"distance", "euclidean"}};
    }
    for (size_t n = 0; n < test_idx.size(); ++n) {
      const SampleRecord& s = manifest.records[test_idx[n]];
      PredictionRecord rec;
      rec.sample_id = s.sample_id;
      rec.group = s.group;
      for (int a = 0; a < m; ++a) {
        AttributePrediction p;
        p.true_label = s.labels[a];
        p.logits = RowOf(logits[a], n);
        p.predicted_label = domains[a].known_values[ArgMax(p.logits)];
        switch (baseline) {
          case Baseline::kMsp: p.confidence = MspScore(p.logits); break;
          case Baseline::kMls: p.confidence = MlsScore(p.logits); break;
          case Baseline::kOpenMax: p.confidence = OpenMaxScore(openmax[a], p.logits).confidence; break;
        }
        rec.attributes.push_back(std::move(p));
      }
      dump.records.push_back(std::move(rec));
    }
    WriteDump(out, dump);
    RunRecord fresh = LoadRecord(dir);
    auto& s = fresh.baselines[ToString(baseline)];
    s = std::max(s, RunStatus::kScored);
    fresh.artifacts["predictions_" + ToString(baseline)] = out.filename().string();
    UpdateOverallStatus(fresh, c);
    SaveRecord(dir, fresh);
    return out;
  });
}

EvalReport EnsureEvaluated(const ExperimentConfig& c, int64_t seed, Baseline baseline, const LogSink& log) {
  const fs::path dump_path = EnsureScored(c, seed, baseline, log);
  const fs::path dir = dump_path.parent_path();
  const fs::path out = dir / ReportName(baseline);
  FileLock lock(dir / ".lock");
  RunRecord record = LoadRecord(dir);
  const auto it = record.baselines.find(ToString(baseline));
  if (it != record.baselines.end() && it->second >= RunStatus::kEvaluated && fs::exists(out)) {
    return EvalReportFromJson(json::parse(ReadFile(out)));
  }
  return Stage(dir, "evaluate", [&] {
    const Resolved r = Resolve(c);
    const PredictionDump dump = ReadDump(dump_path);
    EvalOptions opts;
    opts.include_unseen_known = c.include_unseen_known;
    EvalReport report = Evaluate(dump, Fingerprint(c, baseline), opts);
    report.seeds = {seed};
    report.meta = {{"dataset", r.preset.name},
                   {"config", ShortName(r.plan.config.kind)},
                   {"baseline", ToString(baseline)},
                   {"variant", ToString(c.variant)},
                   {"backbone", ToString(r.backbone)},
                   {"epochs", c.epochs}};
    WriteFileAtomic(out, ToJson(report).dump(2) + "\n");
    record = LoadRecord(dir);
    auto& s = record.baselines[ToString(baseline)];
    s = std::max(s, RunStatus::kEvaluated);
    record.artifacts["report_" + ToString(baseline)] = out.filename().string();
    UpdateOverallStatus(record, c);
    SaveRecord(dir, record);
    Log(log, "evaluated " + record.run_id + " " + ToString(baseline) + ": avg OSCR " +
                 FormatDouble(std::round(report.avg_oscr * 1e4) / 1e2));
    return report;
  });
}

ExperimentResult RunExperiment(const ExperimentConfig& c, const LogSink& log) {
  c.Validate();
  const Resolved r = Resolve(c);
  json exp_key = {{"dataset", DatasetId(c)}, {"seeds", c.seeds}, {"fingerprints", json::array()}};
  for (Baseline b : c.baselines) exp_key["fingerprints"].push_back(Fingerprint(c, b));
  ExperimentResult result;
  result.experiment_dir = c.out / "experiments" /
                          (r.preset.name + "-" + ShortName(r.plan.config.kind) + "-" + ToString(c.variant) +
                           "-" + ShortHash(exp_key));
  fs::create_directories(result.experiment_dir);
  WriteFileAtomic(result.experiment_dir / "config.json", ToJson(c).dump(2) + "\n");

  std::map<std::string, std::vector<EvalReport>> per_baseline;
  for (int64_t seed : c.seeds) {
    result.run_dirs.push_back(EnsureTrained(c, seed, log));
    for (Baseline b : c.baselines) per_baseline[ToString(b)].push_back(EnsureEvaluated(c, seed, b, log));
  }
  for (auto& [name, reports] : per_baseline) {
    EvalReport agg = AggregateSeeds(reports);
    agg.meta = reports.front().meta;
    agg.meta["run_ids"] = json::array();
    for (int64_t seed : c.seeds) agg.meta["run_ids"].push_back(RunId(c, seed));
    WriteFileAtomic(result.experiment_dir / ("report_" + name + ".json"), ToJson(agg).dump(2) + "\n");
    EmitFigures(agg, result.experiment_dir / "figures", name + "_");
    result.reports[name] = std::move(agg);
  }
  return result;
}

// ---------------------------------------------------------------- reporting

double MetricValue(const EvalReport& report, const std::string& metric) {
  const auto per_attr = [&](const std::vector<double>& v, size_t m) {
    if (m >= v.size()) throw Error(ErrorKind::kConfiguration, "metric '" + metric + "' names a missing attribute");
    return 100.0 * v[m];
  };
  if (metric == "avg_oscr") return 100.0 * report.avg_oscr;
  if (metric == "avg_auroc") return 100.0 * report.avg_auroc;
  if (metric == "oscr_complex") return per_attr(report.oscr, 0);
  if (metric == "oscr_simple") return per_attr(report.oscr, 1);
  if (metric == "auroc_complex") return per_attr(report.auroc, 0);
  if (metric == "auroc_simple") return per_attr(report.auroc, 1);
  for (const std::string prefix : {"oscr_", "auroc_"}) {
    if (metric.rfind(prefix, 0) == 0) {
      size_t pos = 0;
      int m = 0;
      try {
        m = std::stoi(metric.substr(prefix.size()), &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos > 0 && m >= 1) return per_attr(prefix == "oscr_" ? report.oscr : report.auroc, static_cast<size_t>(m - 1));
    }
  }
  throw Error(ErrorKind::kConfiguration, "unknown metric '" + metric + "'");
}

Table CompareRuns(const std::vector<fs::path>& paths, const std::string& metric) {
  std::vector<std::string> missing;
  std::vector<fs::path> files;
  for (const auto& p : paths) {
    if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        const auto name = e.path().filename().string();
        if (name.rfind("report_", 0) == 0 && e.path().extension() == ".json") found.push_back(e.path());
      }
      if (found.empty()) missing.push_back(p.string() + " (no report_*.json)");
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      missing.push_back(p.string());
    }
  }
  if (!missing.empty()) throw Error(ErrorKind::kIo, "missing runs: " + Join(missing, ", "));

  const std::map<std::string, int> kind_rank = {{"uc", 0}, {"sc", 1}, {"c", 2}, {"explicit", 3}};
  std::vector<std::string> rows;
  std::vector<std::pair<std::string, std::string>> cols;  // (dataset, config)
  std::map<std::pair<std::string, std::pair<std::string, std::string>>, double> cells;
  for (const auto& f : files) {
    const EvalReport r = EvalReportFromJson(json::parse(ReadFile(f)));
    const std::string baseline = r.meta.value("baseline", r.scorer);
    const std::string row = Upper(baseline) + (r.meta.value("variant", "shared") == "duplicated" ? "-D" : "");
    const std::pair<std::string, std::string> col{r.meta.value("dataset", "?"), r.meta.value("config", "?")};
    if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
    if (std::find(cols.begin(), cols.end(), col) == cols.end()) cols.push_back(col);
    if (!cells.emplace(std::pair{row, col}, MetricValue(r, metric)).second) {
      throw Error(ErrorKind::kAggregation, "two reports fill cell " + row + " / " + col.first + " " + col.second +
                                               " (pass experiment reports or run reports, not both)");
    }
  }
  std::vector<std::string> dataset_order;
  for (const auto& c : cols) {
    if (std::find(dataset_order.begin(), dataset_order.end(), c.first) == dataset_order.end()) {
      dataset_order.push_back(c.first);
    }
  }
  std::stable_sort(cols.begin(), cols.end(), [&](const auto& a, const auto& b) {
    const auto da = std::find(dataset_order.begin(), dataset_order.end(), a.first) - dataset_order.begin();
    const auto db = std::find(dataset_order.begin(), dataset_order.end(), b.first) - dataset_order.begin();
    if (da != db) return da < db;
    const int ra = kind_rank.count(a.second) ? kind_rank.at(a.second) : 9;
    const int rb = kind_rank.count(b.second) ? kind_rank.at(b.second) : 9;
    return ra < rb;
  });

  Table t;
  t.corner = metric;
  t.row_labels = rows;
  for (const auto& c : cols) t.col_labels.push_back(c.first + " " + Upper(c.second));
  for (const auto& row : rows) {
    std::vector<std::optional<double>> cells_row;
    for (const auto& c : cols) {
      const auto it = cells.find({row, c});
      cells_row.push_back(it == cells.end() ? std::nullopt : std::optional<double>(it->second));
    }
    t.cells.push_back(std::move(cells_row));
  }
  return t;
}

FigureOutput EmitFigures(const EvalReport& report, const fs::path& out_dir, const std::string& prefix) {
  FigureOutput out;
  const int m = static_cast<int>(report.attribute_names.size());
  const auto write_matrix = [&](const std::string& stem, const std::vector<std::vector<double>>& values,
                                const std::vector<std::string>& rows, const std::vector<std::string>& cols,
                                const std::string& title, HeatmapStyle style) {
    Table t;
    t.corner = stem;
    t.row_labels = rows;
    t.col_labels = cols;
    for (const auto& r : values) t.cells.emplace_back(r.begin(), r.end());
    const fs::path csv = out_dir / (prefix + stem + ".csv");
    const fs::path png = out_dir / (prefix + stem + ".png");
    try {
      WriteCsv(csv, ToCsv(t, 4));
      WritePng(png.string(), RenderHeatmap(values, rows, cols, title, style));
    } catch (const std::exception& e) {
      throw Error(ErrorKind::kIo, "writing " + png.string() + ": " + e.what());
    }
    out.files.push_back(png);
    out.files.push_back(csv);
  };

  std::vector<std::string> heads, columns{"Known"};
  for (int i = 0; i < m; ++i) {
    heads.push_back("head " + report.attribute_names[i]);
    columns.push_back("OOD_" + std::to_string(i + 1));
  }
  HeatmapStyle conf_style;
  double lo = 0.0, hi = 1.0;
  for (const auto& row : report.confidence.values) {
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  conf_style.vmin = lo;
  conf_style.vmax = hi;
  write_matrix("confidence", report.confidence.values, heads, columns,
               "mean confidence (" + report.scorer + ")", conf_style);

  if (report.explainability) {
    std::vector<std::string> groups;
    for (int g = 0; g < OpenSetGroup::Count(m); ++g) groups.push_back(OpenSetGroup{g}.Label(m));
    HeatmapStyle ex_style;
    ex_style.vmax = 100.0;
    ex_style.decimals = 1;
    write_matrix("explainability", report.explainability->values, groups, groups,
                 "explainability, rows: true, cols: predicted", ex_style);
  } else {
    out.warnings.push_back("report has no explainability matrix; only the confidence heatmap was written");
  }
  return out;
}

}  // namespace mosr
