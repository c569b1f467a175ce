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


#ifndef MOSR_DATAGEN_HPP_
#define MOSR_DATAGEN_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mosr/digits.hpp"
#include "mosr/image.hpp"
#include "mosr/splits.hpp"
#include "mosr/util.hpp"

namespace mosr {

enum class Partition { kTrain, kVal, kTest };

std::string ToString(Partition p);
Partition ParsePartition(const std::string& s);

struct SampleRecord {
  std::string sample_id;
  // Relative paths resolve against DatasetManifest::root.
  std::string path;
  Combination labels;
  GroupTag group = GroupTag::KnownSeen();
  Partition partition = Partition::kTrain;
  // RGB, CV_8UC3; empty until generated or loaded.
  Image image;
};

struct DatasetManifest {
  std::vector<SampleRecord> records;
  SplitPlan plan;
  uint64_t generator_seed = 0;
  int image_size = 32;
  // Synthetic generators balance every test tuple; ingested real data does
  // not, and validation then skips the test-balance rule.
  bool balanced_test = true;
  // Generator parameters and recorded counts, echoed to generator.json.
  nlohmann::json generator;
  std::filesystem::path root;

  std::vector<size_t> Indices(Partition p) const;
  std::filesystem::path Resolve(const SampleRecord& r) const;
};

struct ColorMnistOptions {
  bool allow_replacement = false;
  int image_size = 32;
};

// Attribute 0 holds digit names "0".."9"; attribute 1 holds color names
// looked up in `colors`. The digit pool is split 90/10 per digit before
// sampling so validation digits never appear in training.
DatasetManifest GenerateColorMnist(const SplitPlan& plan, const DigitPool& digits,
                                   const std::map<Value, Rgb>& colors, uint64_t seed,
                                   const ColorMnistOptions& options = {});

// round(intensity / 255 * color) per channel; gray is CV_8UC1.
Image TintDigit(const Image& gray, const Rgb& color, int image_size);

struct CompositeOptions {
  int canvas = 64;
  // Upper bound on the offset from the centered position, in pixels;
  // negative allows the whole slack.
  int max_jitter = -1;
};

// Alpha blend round(a * fg + (1 - a) * bg), a = alpha / 255. The background
// is scaled so its short side equals the canvas and center-cropped; objects
// larger than the canvas are scaled down to fit.
Image ComposeObjectOnBackground(const Image& object_rgba, const Image& background_rgb,
                                Rng& rng, const CompositeOptions& options = {});
Image ComposeObjectOnBackground(const Image& object_rgba, const Rgb& background,
                                Rng& rng, const CompositeOptions& options = {});

// Each message names the rule ("balance", "partition-purity",
// "group-assignment", "image-size") and the offending combination.
std::vector<std::string> ValidateManifest(const DatasetManifest& manifest);

// Writes in-memory images as PNG under <dir>/<partition>/<a1>_<a2>/, plus
// manifest.csv and generator.json.
void WriteDataset(DatasetManifest& manifest, const std::filesystem::path& dir);
// Records only; images stay empty until LoadImages.
DatasetManifest ReadDataset(const std::filesystem::path& dir);
// Reads every record of `partition` whose image is empty, resizing to the
// manifest image size.
void LoadImages(DatasetManifest& manifest, Partition partition);

nlohmann::json ManifestCounts(const DatasetManifest& manifest);

}  // namespace mosr

#endif  // MOSR_DATAGEN_HPP_
