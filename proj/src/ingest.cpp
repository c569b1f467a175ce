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


#include "mosr/ingest.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "mosr/error.hpp"
#include "mosr/util.hpp"

namespace mosr {
namespace {

using nlohmann::json;

std::string ComboKey(const Combination& c) { return Join(c, "_"); }

std::string SampleId(Partition p, const Combination& c, size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05zu", index);
  return ToString(p) + "-" + ComboKey(c) + "-" + buf;
}

std::filesystem::path AssetPath(const ExternalAssetIndex& index, const AssetRow& row) {
  const std::filesystem::path p(row.path);
  return std::filesystem::absolute(p.is_absolute() ? p : index.base_dir / p).lexically_normal();
}

std::optional<Rgb> ParseFlatColor(const std::string& path) {
  if (path.rfind("color:", 0) != 0) return std::nullopt;
  const auto parts = Split(path.substr(6), ',');
  if (parts.size() != 3) throw Error(ErrorKind::kIngestion, "bad flat color '" + path + "'");
  int c[3];
  for (int i = 0; i < 3; ++i) {
    c[i] = std::stoi(parts[i]);
    if (c[i] < 0 || c[i] > 255) throw Error(ErrorKind::kIngestion, "bad flat color '" + path + "'");
  }
  return Rgb{static_cast<uint8_t>(c[0]), static_cast<uint8_t>(c[1]), static_cast<uint8_t>(c[2])};
}

std::map<std::string, Value> ParseMappingTable(const json& j) {
  std::map<std::string, Value> out;
  for (const auto& [raw, value] : j.items()) {
    if (!value.is_string()) throw Error(ErrorKind::kIngestion, "mapping for '" + raw + "' is not a string");
    out[raw] = value.get<std::string>();
  }
  return out;
}

}  // namespace

ExternalAssetIndex LoadAssetIndex(const std::filesystem::path& csv,
                                  const std::optional<std::filesystem::path>& mapping_json,
                                  const std::vector<std::string>& attribute_names) {
  const CsvTable table = ReadCsv(csv);
  ExternalAssetIndex index;
  index.base_dir = csv.parent_path();
  const size_t path_col = table.Column("path");
  std::vector<size_t> label_cols;
  for (size_t i = 1;; ++i) {
    const auto it = std::find(table.header.begin(), table.header.end(), "label_" + std::to_string(i));
    if (it == table.header.end()) break;
    label_cols.push_back(static_cast<size_t>(it - table.header.begin()));
  }
  if (label_cols.empty()) throw Error(ErrorKind::kIngestion, csv.string() + " has no label_1 column");
  for (const auto& row : table.rows) {
    AssetRow r;
    r.path = row.at(path_col);
    for (size_t c : label_cols) r.raw_labels.push_back(row.at(c));
    index.rows.push_back(std::move(r));
  }
  index.label_mapping.assign(label_cols.size(), std::nullopt);
  if (mapping_json) {
    json j;
    try {
      j = json::parse(ReadFile(*mapping_json));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::kIngestion, mapping_json->string() + ": " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::kIngestion, "label mapping must be a JSON object");
    const bool keyed = !j.empty() && std::all_of(j.begin(), j.end(), [](const json& v) {
      return v.is_object();
    });
    if (keyed) {
      for (size_t c = 0; c < label_cols.size() && c < attribute_names.size(); ++c) {
        if (j.contains(attribute_names[c])) {
          index.label_mapping[c] = ParseMappingTable(j.at(attribute_names[c]));
        }
      }
    } else {
      const auto table_all = ParseMappingTable(j);
      for (auto& m : index.label_mapping) m = table_all;
    }
  }
  return index;
}

ExternalAssetIndex FlatColorBackgrounds(const std::map<Value, Rgb>& colors) {
  ExternalAssetIndex index;
  for (const auto& [name, c] : colors) {
    index.rows.push_back({"color:" + std::to_string(c.r) + "," + std::to_string(c.g) + "," +
                              std::to_string(c.b),
                          {name}});
  }
  index.label_mapping.assign(1, std::nullopt);
  return index;
}

ResolvedAssets ResolveLabels(const ExternalAssetIndex& index,
                             const std::vector<AttributeDomain>& domains, size_t first_attribute) {
  ResolvedAssets out;
  for (const auto& row : index.rows) {
    if (first_attribute + row.raw_labels.size() > domains.size()) {
      throw Error(ErrorKind::kIngestion, "asset '" + row.path + "' has more labels than attributes");
    }
    Combination labels;
    for (size_t c = 0; c < row.raw_labels.size(); ++c) {
      const auto& domain = domains[first_attribute + c];
      const std::optional<std::map<std::string, Value>>& table =
          c < index.label_mapping.size() ? index.label_mapping[c] : std::nullopt;
      if (table) {
        const auto it = table->find(row.raw_labels[c]);
        if (it == table->end()) break;
        if (!domain.IsKnown(it->second) && !domain.IsUnknown(it->second)) {
          throw Error(ErrorKind::kIngestion, "mapping sends '" + row.raw_labels[c] + "' to '" +
                                                 it->second + "', which is not a value of '" +
                                                 domain.name + "'");
        }
        labels.push_back(it->second);
      } else {
        if (!domain.IsKnown(row.raw_labels[c]) && !domain.IsUnknown(row.raw_labels[c])) break;
        labels.push_back(row.raw_labels[c]);
      }
    }
    if (labels.size() == row.raw_labels.size()) {
      out.rows.emplace_back(&row, std::move(labels));
    } else {
      ++out.unmapped;
    }
  }
  return out;
}

DatasetManifest IngestUtZappos(const ExternalAssetIndex& index, const SplitPlan& plan,
                               uint64_t seed, const IngestOptions& options) {
  if (plan.config.kind != CorrelationKind::kExplicit) {
    throw Error(ErrorKind::kConfiguration, "UT-Zappos ingestion expects an explicit combination list");
  }
  const auto resolved = ResolveLabels(index, plan.domains);
  std::map<Combination, std::vector<const AssetRow*>> by_combo;
  for (const auto& [row, labels] : resolved.rows) {
    if (labels.size() != plan.domains.size()) {
      throw Error(ErrorKind::kIngestion, "asset '" + row->path + "' lacks a label per attribute");
    }
    by_combo[labels].push_back(row);
  }

  std::vector<std::string> missing;
  size_t n_min = SIZE_MAX;
  for (const auto& c : plan.train_combinations) {
    const size_t n = by_combo.count(c) ? by_combo[c].size() : 0;
    if (n == 0) missing.push_back("(" + Join(c, ", ") + ")");
    n_min = std::min(n_min, n);
  }
  if (!missing.empty()) {
    throw Error(ErrorKind::kIngestion, "training combinations without assets: " + Join(missing, ", "));
  }
  const auto n_test = static_cast<size_t>(std::llround(n_min * options.test_fraction));
  const size_t rest = n_min - n_test;
  const auto n_val = static_cast<size_t>(std::llround(rest * plan.val_fraction));
  const size_t n_train = rest - n_val;
  if (n_train == 0 || n_val == 0) {
    throw Error(ErrorKind::kIngestion, "scarcest training combination has only " +
                                           std::to_string(n_min) + " assets; too few to split");
  }

  DatasetManifest manifest;
  manifest.plan = plan;
  manifest.generator_seed = seed;
  manifest.image_size = options.image_size;
  manifest.balanced_test = false;
  const auto train_set = plan.TrainSet();

  std::map<Partition, std::map<Combination, size_t>> next_index;
  const auto emit = [&](Partition part, const Combination& combo, const AssetRow& row) {
    SampleRecord r;
    r.sample_id = SampleId(part, combo, next_index[part][combo]++);
    r.path = AssetPath(index, row).string();
    r.labels = combo;
    r.group = AssignGroup(combo, plan.domains, train_set);
    r.partition = part;
    manifest.records.push_back(std::move(r));
  };

  size_t downsampled_out = 0;
  for (const auto& combo : plan.train_combinations) {
    auto rows = by_combo[combo];
    Rng rng = DeriveRng(seed, "ingest/" + ComboKey(combo));
    Shuffle(rows, rng);
    for (size_t i = 0; i < rows.size(); ++i) {
      if (i < n_train) {
        emit(Partition::kTrain, combo, *rows[i]);
      } else if (i < n_train + n_val) {
        emit(Partition::kVal, combo, *rows[i]);
      } else if (i < n_min) {
        emit(Partition::kTest, combo, *rows[i]);
      } else {
        ++downsampled_out;
      }
    }
  }
  json feasible = json::array();
  for (const auto& [combo, rows] : by_combo) {
    if (train_set.count(combo)) continue;
    feasible.push_back(combo);
    for (const auto* row : rows) emit(Partition::kTest, combo, *row);
  }

  manifest.generator = {{"generator", "ut-zappos-ingest"},
                        {"test_fraction", options.test_fraction},
                        {"per_combination_minimum", n_min},
                        {"train_per_combination", n_train},
                        {"val_per_combination", n_val},
                        {"seen_test_per_combination", n_test},
                        {"unmapped_rows", resolved.unmapped},
                        {"downsampled_out", downsampled_out},
                        {"feasible_test_tuples", feasible}};
  return manifest;
}

DatasetManifest IngestComposite(const ExternalAssetIndex& object_index,
                                const ExternalAssetIndex& background_index, const SplitPlan& plan,
                                uint64_t seed, const IngestOptions& options) {
  if (plan.num_attributes() != 2) {
    throw Error(ErrorKind::kIngestion, "composites need exactly two attributes (object, background)");
  }
  if (object_index.rows.empty()) throw Error(ErrorKind::kIngestion, "object index is empty");
  if (background_index.rows.empty()) throw Error(ErrorKind::kIngestion, "background index is empty");
  const auto objects = ResolveLabels(object_index, plan.domains, 0);
  const auto backgrounds = ResolveLabels(background_index, plan.domains, 1);

  // Known values: a held-out share of assets is reserved for test samples.
  struct Pools {
    std::vector<const AssetRow*> train, test;
  };
  const auto build_pools = [&](const ResolvedAssets& assets, const AttributeDomain& domain,
                               const std::string& what) {
    std::map<Value, std::vector<const AssetRow*>> by_value;
    for (const auto& [row, labels] : assets.rows) by_value[labels[0]].push_back(row);
    std::map<Value, Pools> pools;
    std::vector<std::string> missing;
    for (const auto& list : {domain.known_values, domain.unknown_values}) {
      for (const auto& v : list) {
        auto rows = by_value[v];
        if (rows.empty()) {
          missing.push_back(v);
          continue;
        }
        if (domain.IsUnknown(v) || rows.size() < 2) {
          pools[v] = {rows, rows};
          continue;
        }
        Rng rng = DeriveRng(seed, what + "/" + v);
        Shuffle(rows, rng);
        const size_t n_test = std::max<size_t>(1, std::llround(rows.size() * options.test_fraction));
        pools[v].test.assign(rows.end() - static_cast<std::ptrdiff_t>(n_test), rows.end());
        pools[v].train.assign(rows.begin(), rows.end() - static_cast<std::ptrdiff_t>(n_test));
      }
    }
    if (!missing.empty()) {
      throw Error(ErrorKind::kIngestion, what + " assets missing for: " + Join(missing, ", "));
    }
    return pools;
  };
  const auto object_pools = build_pools(objects, plan.domains[0], "objects");
  const auto background_pools = build_pools(backgrounds, plan.domains[1], "backgrounds");

  std::map<const AssetRow*, Image> cache;
  const auto object_image = [&](const AssetRow* row) -> const Image& {
    auto& img = cache[row];
    if (img.empty()) img = ReadRgba(AssetPath(object_index, *row).string());
    return img;
  };
  const auto background_image = [&](const AssetRow* row) -> const Image& {
    auto& img = cache[row];
    if (img.empty()) img = ReadRgb(AssetPath(background_index, *row).string());
    return img;
  };

  CompositeOptions composite = options.composite;
  composite.canvas = options.image_size;
  DatasetManifest manifest;
  manifest.plan = plan;
  manifest.generator_seed = seed;
  manifest.image_size = options.image_size;
  const auto train_set = plan.TrainSet();

  const auto generate = [&](Partition part, const Combination& combo, size_t count) {
    const bool test = part == Partition::kTest;
    const auto& obj_pool = test ? object_pools.at(combo[0]).test : object_pools.at(combo[0]).train;
    const auto& bg_pool =
        test ? background_pools.at(combo[1]).test : background_pools.at(combo[1]).train;
    Rng rng = DeriveRng(seed, ToString(part) + "/" + ComboKey(combo));
    for (size_t i = 0; i < count; ++i) {
      const AssetRow* obj = obj_pool[UniformIndex(rng, obj_pool.size())];
      const AssetRow* bg = bg_pool[UniformIndex(rng, bg_pool.size())];
      SampleRecord r;
      r.sample_id = SampleId(part, combo, i);
      r.path = ToString(part) + "/" + ComboKey(combo) + "/" + r.sample_id + ".png";
      r.labels = combo;
      r.group = AssignGroup(combo, plan.domains, train_set);
      r.partition = part;
      if (const auto flat = ParseFlatColor(bg->path)) {
        r.image = ComposeObjectOnBackground(object_image(obj), *flat, rng, composite);
      } else {
        r.image = ComposeObjectOnBackground(object_image(obj), background_image(bg), rng, composite);
      }
      manifest.records.push_back(std::move(r));
    }
  };

  const auto n_total = static_cast<size_t>(plan.samples_per_combination);
  const auto n_val = static_cast<size_t>(std::llround(n_total * plan.val_fraction));
  for (const auto& combo : plan.train_combinations) generate(Partition::kTrain, combo, n_total - n_val);
  for (const auto& combo : plan.train_combinations) generate(Partition::kVal, combo, n_val);
  for (const auto& [group, tuples] : plan.test_groups.tuples) {
    const auto count = static_cast<size_t>(plan.test_samples_per_tuple) *
                       static_cast<size_t>(plan.test_groups.multiplicity.at(group));
    for (const auto& combo : tuples) generate(Partition::kTest, combo, count);
  }
  manifest.generator = {{"generator", "composite-ingest"},
                        {"test_fraction", options.test_fraction},
                        {"max_jitter", composite.max_jitter},
                        {"unmapped_object_rows", objects.unmapped},
                        {"unmapped_background_rows", backgrounds.unmapped}};
  return manifest;
}

}  // namespace mosr
