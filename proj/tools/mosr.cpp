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


// mosr: generate, train, score and evaluate multi-attribute open-set runs.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mosr/error.hpp"
#include "mosr/harness.hpp"
#include "mosr/util.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Overrides {
  std::string experiment;
  std::string dataset;
  std::string config;
  std::vector<std::string> baselines;
  std::string variant;
  std::vector<int64_t> seeds;
  std::optional<int> epochs;
  std::string out;
  bool quiet = false;
};

void AddExperimentOptions(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-e,--experiment", o.experiment, "experiment config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--dataset", o.dataset, "preset name or preset JSON path");
  cmd->add_option("--config", o.config, "correlation configuration")
      ->check(CLI::IsMember({"uc", "sc", "c", "explicit"}));
  cmd->add_option("--baseline", o.baselines, "msp, mls and/or openmax")->delimiter(',');
  cmd->add_option("--variant", o.variant, "shared or duplicated")
      ->check(CLI::IsMember({"shared", "duplicated"}));
  cmd->add_option("--seeds", o.seeds, "comma-separated seeds")->delimiter(',');
  cmd->add_option("--epochs", o.epochs, "training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output root");
  cmd->add_flag("-q,--quiet", o.quiet, "suppress progress lines");
}

mosr::ExperimentConfig ResolveConfig(const Overrides& o) {
  mosr::ExperimentConfig c;
  if (!o.experiment.empty()) {
    json j;
    try {
      j = json::parse(mosr::ReadFile(o.experiment));
    } catch (const json::exception& e) {
      throw mosr::Error(mosr::ErrorKind::kConfiguration, o.experiment + ": " + e.what());
    }
    // Relative asset paths are resolved against the config file.
    const fs::path base = fs::absolute(o.experiment).parent_path();
    if (j.contains("assets")) {
      for (auto& [key, value] : j["assets"].items()) {
        fs::path p = value.get<std::string>();
        if (p.is_relative()) value = (base / p).lexically_normal().string();
      }
    }
    c = mosr::ExperimentConfigFromJson(j);
  }
  if (!o.dataset.empty()) c.dataset = o.dataset;
  if (!o.config.empty()) c.kind = mosr::ParseCorrelationKind(o.config);
  if (!o.baselines.empty()) {
    c.baselines.clear();
    for (const auto& b : o.baselines) c.baselines.push_back(mosr::ParseBaseline(b));
  }
  if (!o.variant.empty()) c.variant = mosr::ParseVariant(o.variant);
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (o.epochs) c.epochs = *o.epochs;
  if (!o.out.empty()) c.out = o.out;
  c.Validate();
  return c;
}

mosr::LogSink Logger(const Overrides& o) {
  if (o.quiet) return {};
  return [](const std::string& line) { std::cerr << line << std::endl; };
}

void PrintReportSummary(const std::string& baseline, const mosr::EvalReport& r) {
  std::cout << baseline << ":";
  for (size_t m = 0; m < r.attribute_names.size(); ++m) {
    std::cout << " " << r.attribute_names[m] << " auroc=" << mosr::FormatDouble(std::round(r.auroc[m] * 1e5) / 1e3)
              << " oscr=" << mosr::FormatDouble(std::round(r.oscr[m] * 1e5) / 1e3);
  }
  std::cout << " | avg auroc=" << mosr::FormatDouble(std::round(r.avg_auroc * 1e5) / 1e3)
            << " avg oscr=" << mosr::FormatDouble(std::round(r.avg_oscr * 1e5) / 1e3) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-attribute open-set recognition benchmark"};
  app.require_subcommand(1);
  Overrides o;
  std::string stage = "cli";

  auto* generate = app.add_subcommand("generate", "synthesize or ingest the dataset");
  auto* train = app.add_subcommand("train", "train one model per seed");
  auto* score = app.add_subcommand("score", "write prediction dumps per seed and baseline");
  auto* evaluate = app.add_subcommand("evaluate", "write per-seed evaluation reports");
  auto* run = app.add_subcommand("run", "full pipeline plus seed aggregation");
  for (auto* cmd : {generate, train, score, evaluate, run}) AddExperimentOptions(cmd, o);

  auto* compare = app.add_subcommand("compare", "tabulate a metric across reports");
  std::vector<std::string> compare_paths;
  std::string metric = "avg_oscr", csv_path;
  int decimals = 1;
  compare->add_option("paths", compare_paths, "report files, experiment or run directories")->required();
  compare->add_option("--metric", metric, "avg_oscr, avg_auroc, oscr_<m>, auroc_<m>, oscr_complex, ...");
  compare->add_option("--csv", csv_path, "also write the table as CSV");
  compare->add_option("--decimals", decimals, "digits after the decimal point");

  auto* figures = app.add_subcommand("figures", "render heatmaps for a report");
  std::string report_path, figure_dir, prefix;
  figures->add_option("report", report_path, "report JSON")->required()->check(CLI::ExistingFile);
  figures->add_option("-o,--out", figure_dir, "output directory")->required();
  figures->add_option("--prefix", prefix, "file name prefix");

  auto* preset = app.add_subcommand("preset", "print a built-in or file preset as JSON");
  std::string preset_name;
  preset->add_option("name", preset_name, "preset name or path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      stage = "generate";
      std::cout << mosr::EnsureDataset(ResolveConfig(o), Logger(o)).string() << "\n";
    } else if (train->parsed()) {
      stage = "train";
      const auto c = ResolveConfig(o);
      for (int64_t seed : c.seeds) std::cout << mosr::EnsureTrained(c, seed, Logger(o)).string() << "\n";
    } else if (score->parsed()) {
      stage = "score";
      const auto c = ResolveConfig(o);
      for (int64_t seed : c.seeds) {
        for (auto b : c.baselines) std::cout << mosr::EnsureScored(c, seed, b, Logger(o)).string() << "\n";
      }
    } else if (evaluate->parsed()) {
      stage = "evaluate";
      const auto c = ResolveConfig(o);
      for (int64_t seed : c.seeds) {
        for (auto b : c.baselines) {
          PrintReportSummary(mosr::ToString(b) + " seed " + std::to_string(seed),
                             mosr::EnsureEvaluated(c, seed, b, Logger(o)));
        }
      }
    } else if (run->parsed()) {
      stage = "run";
      const auto result = mosr::RunExperiment(ResolveConfig(o), Logger(o));
      for (const auto& [name, report] : result.reports) PrintReportSummary(name, report);
      std::cout << result.experiment_dir.string() << "\n";
    } else if (compare->parsed()) {
      stage = "compare";
      std::vector<fs::path> paths(compare_paths.begin(), compare_paths.end());
      const mosr::Table t = mosr::CompareRuns(paths, metric);
      std::cout << mosr::ToAlignedText(t, decimals);
      if (!csv_path.empty()) mosr::WriteCsv(csv_path, mosr::ToCsv(t, decimals));
    } else if (figures->parsed()) {
      stage = "figures";
      const auto report = mosr::EvalReportFromJson(json::parse(mosr::ReadFile(report_path)));
      const auto out = mosr::EmitFigures(report, figure_dir, prefix);
      for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& f : out.files) std::cout << f.string() << "\n";
    } else if (preset->parsed()) {
      stage = "preset";
      std::cout << mosr::ToJson(mosr::LoadPreset(preset_name)).dump(2) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "mosr: " << stage << " failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
