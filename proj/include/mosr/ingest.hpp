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


#ifndef MOSR_INGEST_HPP_
#define MOSR_INGEST_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mosr/datagen.hpp"
#include "mosr/splits.hpp"

namespace mosr {

struct AssetRow {
  std::string path;
  std::vector<std::string> raw_labels;
};

struct ExternalAssetIndex {
  std::vector<AssetRow> rows;
  // Relative asset paths resolve against this directory.
  std::filesystem::path base_dir;
  // One table per label column; a column without a table passes raw labels
  // through unchanged.
  std::vector<std::optional<std::map<std::string, Value>>> label_mapping;
};

// CSV with header path,label_1[,label_2,...]. The mapping JSON is either a
// flat {raw: value} object applied to every column or an object keyed by
// attribute name ({"material": {...}, "type": {...}}), matched to columns in
// `attribute_names` order.
ExternalAssetIndex LoadAssetIndex(const std::filesystem::path& csv,
                                  const std::optional<std::filesystem::path>& mapping_json = {},
                                  const std::vector<std::string>& attribute_names = {});

// Background rows whose path is "color:R,G,B" render as flat colors.
ExternalAssetIndex FlatColorBackgrounds(const std::map<Value, Rgb>& colors);

struct ResolvedAssets {
  std::vector<std::pair<const AssetRow*, Combination>> rows;
  size_t unmapped = 0;
};

// Maps each row's labels onto the domains; label column i feeds domain
// first_attribute + i. Rows with an unmapped raw label, or a label outside
// its domain, are excluded and counted. A mapping table that targets a value
// outside the domain is a kIngestion error.
ResolvedAssets ResolveLabels(const ExternalAssetIndex& index,
                             const std::vector<AttributeDomain>& domains, size_t first_attribute = 0);

struct IngestOptions {
  // Share of the per-combination minimum held out as seen-combination test
  // samples.
  double test_fraction = 0.2;
  int image_size = 64;
  CompositeOptions composite;
};

// Train/val come only from plan.train_combinations, each downsampled to the
// scarcest one; every other feasible tuple goes to test in full.
DatasetManifest IngestUtZappos(const ExternalAssetIndex& index, const SplitPlan& plan,
                               uint64_t seed, const IngestOptions& options = {});

// One label column per index: the object index feeds attribute 0 and the
// background index attribute 1.
DatasetManifest IngestComposite(const ExternalAssetIndex& object_index,
                                const ExternalAssetIndex& background_index, const SplitPlan& plan,
                                uint64_t seed, const IngestOptions& options = {});

}  // namespace mosr

#endif  // MOSR_INGEST_HPP_
