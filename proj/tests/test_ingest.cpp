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


#include <gtest/gtest.h>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <set>

#include "json.hpp"
#include "mosr/datagen.hpp"
#include "mosr/error.hpp"
#include "mosr/image.hpp"
#include "mosr/ingest.hpp"
#include "test_support.hpp"

namespace mosr {
namespace {

namespace fs = std::filesystem;

// Shoe-style index: raw labels are lower-cased names, mapped back through a
// keyed mapping file. `per_combo(c)` assets are written for each tuple.
struct ShoeAssets {
  fs::path csv, mapping;
  std::map<Combination, size_t> written;
};

std::string Raw(const std::string& v) {
  std::string s = v;
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return "raw-" + s;
}

ShoeAssets WriteShoeAssets(const fs::path& dir, const SplitPlan& plan,
                           const std::function<size_t(const Combination&)>& per_combo) {
  ShoeAssets out;
  CsvTable t;
  t.header = {"path", "label_1", "label_2"};
  nlohmann::json mapping;
  fs::create_directories(dir / "img");
  int serial = 0;
  const auto& d0 = plan.domains[0];
  const auto& d1 = plan.domains[1];
  for (const auto& list0 : {d0.known_values, d0.unknown_values}) {
    for (const auto& a : list0) {
      mapping[d0.name][Raw(a)] = a;
      for (const auto& list1 : {d1.known_values, d1.unknown_values}) {
        for (const auto& b : list1) {
          mapping[d1.name][Raw(b)] = b;
          const size_t n = per_combo({a, b});
          for (size_t i = 0; i < n; ++i) {
            const std::string rel = "img/" + std::to_string(serial++) + ".png";
            WritePng((dir / rel).string(), Image(8, 8, CV_8UC3, cv::Scalar(serial % 256, 0, 0)));
            t.rows.push_back({rel, Raw(a), Raw(b)});
          }
          if (n) out.written[{a, b}] = n;
        }
      }
    }
  }
  t.rows.push_back({"img/0.png", "raw-unlisted-material", Raw(d1.known_values[0])});
  out.csv = dir / "index.csv";
  out.mapping = dir / "mapping.json";
  WriteCsv(out.csv, t);
  WriteFileAtomic(out.mapping, mapping.dump());
  return out;
}

std::vector<std::string> Names(const SplitPlan& p) { return {p.domains[0].name, p.domains[1].name}; }

TEST(AssetIndexTest, FlatAndKeyedMappings) {
  testing::TempDir dir("index");
  CsvTable t;
  t.header = {"path", "label_1", "label_2"};
  t.rows = {{"a.png", "x", "y"}};
  WriteCsv(dir.path() / "i.csv", t);
  WriteFileAtomic(dir.path() / "flat.json", R"({"x": "X", "y": "Y"})");
  WriteFileAtomic(dir.path() / "keyed.json", R"({"second": {"y": "Y2"}})");
  const auto flat = LoadAssetIndex(dir.path() / "i.csv", dir.path() / "flat.json");
  ASSERT_EQ(flat.label_mapping.size(), 2u);
  EXPECT_EQ(flat.label_mapping[0]->at("x"), "X");
  EXPECT_EQ(flat.label_mapping[1]->at("y"), "Y");
  const auto keyed = LoadAssetIndex(dir.path() / "i.csv", dir.path() / "keyed.json", {"first", "second"});
  EXPECT_FALSE(keyed.label_mapping[0].has_value());
  EXPECT_EQ(keyed.label_mapping[1]->at("y"), "Y2");

  const std::vector<AttributeDomain> domains = {{"first", {"x"}, {"z"}}, {"second", {"Y2"}, {"W"}}};
  const auto resolved = ResolveLabels(keyed, domains);
  ASSERT_EQ(resolved.rows.size(), 1u);
  EXPECT_EQ(resolved.rows[0].second, (Combination{"x", "Y2"}));

  WriteFileAtomic(dir.path() / "bad.json", R"({"second": {"y": "nowhere"}})");
  const auto bad = LoadAssetIndex(dir.path() / "i.csv", dir.path() / "bad.json", {"first", "second"});
  try {
    ResolveLabels(bad, domains);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIngestion);
  }
}

TEST(UtZapposTest, DownsamplesTrainingCombinations) {
  testing::TempDir dir("zappos");
  const SplitPlan plan = MakeSplitPlan(BuiltinPreset("ut-zappos"), std::nullopt);
  ASSERT_EQ(plan.train_combinations.size(), 13u);
  const auto train_set = plan.TrainSet();
  // Seen tuples hold 20..32 assets; a handful of other tuples hold 3.
  size_t k = 0;
  const auto assets = WriteShoeAssets(dir.path(), plan, [&](const Combination& c) -> size_t {
    if (train_set.count(c)) return 20 + (k++ % 13);
    return (c[0].size() + c[1].size()) % 4 == 0 ? 3 : 0;
  });
  const auto index = LoadAssetIndex(assets.csv, assets.mapping, Names(plan));
  IngestOptions opts;
  opts.image_size = 16;
  const DatasetManifest m = IngestUtZappos(index, plan, 4, opts);
  EXPECT_TRUE(ValidateManifest(m).empty());
  EXPECT_FALSE(m.balanced_test);

  // n_min = 20: 4 seen test, 16 left -> 2 val, 14 train.
  std::map<std::pair<Partition, Combination>, size_t> counts;
  for (const auto& r : m.records) {
    ++counts[{r.partition, r.labels}];
    EXPECT_TRUE(fs::path(r.path).is_absolute());
  }
  for (const auto& c : plan.train_combinations) {
    EXPECT_EQ((counts[{Partition::kTrain, c}]), 14u);
    EXPECT_EQ((counts[{Partition::kVal, c}]), 2u);
    EXPECT_EQ((counts[{Partition::kTest, c}]), 4u);
  }
  for (const auto& [combo, n] : assets.written) {
    if (!train_set.count(combo)) EXPECT_EQ((counts[{Partition::kTest, combo}]), n);
  }
  EXPECT_EQ(m.generator.at("unmapped_rows").get<size_t>(), 1u);
  EXPECT_EQ(m.generator.at("per_combination_minimum").get<size_t>(), 20u);

  DatasetManifest loaded = m;
  LoadImages(loaded, Partition::kVal);
  for (size_t i : loaded.Indices(Partition::kVal)) EXPECT_EQ(loaded.records[i].image.rows, 16);
}

TEST(UtZapposTest, MissingTrainingCombinationIsAnError) {
  testing::TempDir dir("zappos-missing");
  const SplitPlan plan = MakeSplitPlan(BuiltinPreset("ut-zappos"), std::nullopt);
  const Combination dropped = plan.train_combinations[3];
  const auto assets = WriteShoeAssets(dir.path(), plan, [&](const Combination& c) -> size_t {
    return plan.TrainSet().count(c) && c != dropped ? 10 : 0;
  });
  try {
    IngestUtZappos(LoadAssetIndex(assets.csv, assets.mapping, Names(plan)), plan, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIngestion);
    EXPECT_NE(std::string(e.what()).find(dropped[0]), std::string::npos);
  }
  EXPECT_THROW(IngestUtZappos(ExternalAssetIndex{}, MakeSplitPlan(BuiltinPreset("color-mnist"), std::nullopt), 0),
               Error);
}

// Object crops: a solid, per-asset color square on a transparent margin.
// The serial number is recoverable from the red channel.
fs::path WriteObjects(const fs::path& dir, const AttributeDomain& objects, int per_value) {
  CsvTable t;
  t.header = {"path", "label_1"};
  fs::create_directories(dir / "obj");
  int serial = 0;
  for (const auto& list : {objects.known_values, objects.unknown_values}) {
    for (const auto& v : list) {
      for (int i = 0; i < per_value; ++i, ++serial) {
        // BGRA on disk.
        cv::Mat bgra(20, 20, CV_8UC4, cv::Scalar(0, 0, 0, 0));
        bgra(cv::Rect(4, 4, 12, 12)).setTo(cv::Scalar(7, 255 - serial, serial, 255));
        const std::string rel = "obj/" + std::to_string(serial) + ".png";
        cv::imwrite((dir / rel).string(), bgra);
        t.rows.push_back({rel, v});
      }
    }
  }
  WriteCsv(dir / "objects.csv", t);
  return dir / "objects.csv";
}

TEST(CompositeTest, FlatColorBackgroundsAndPoolSeparation) {
  testing::TempDir dir("composite");
  Preset preset = BuiltinPreset("color-object");
  preset.samples_per_combination = 10;
  preset.test_samples_per_tuple = 2;
  const SplitPlan plan = MakeSplitPlan(preset, CorrelationKind::kCorrelated);
  const auto objects = LoadAssetIndex(WriteObjects(dir.path(), plan.domains[0], 5), std::nullopt);
  IngestOptions opts;
  opts.image_size = 32;
  opts.composite.max_jitter = 0;
  const DatasetManifest m = IngestComposite(objects, FlatColorBackgrounds(preset.colors), plan, 9, opts);
  EXPECT_TRUE(ValidateManifest(m).empty());
  EXPECT_EQ(m.Indices(Partition::kTrain).size(), 6u * 9u);
  EXPECT_EQ(m.Indices(Partition::kVal).size(), 6u * 1u);
  EXPECT_EQ(m.Indices(Partition::kTest).size(), 4u * 36u * 2u);

  // Known objects: train/val crops and test crops come from disjoint pools.
  std::map<Value, std::set<int>> fit_serials, test_serials;
  for (const auto& r : m.records) {
    ASSERT_EQ(r.image.rows, 32);
    const auto center = r.image.at<cv::Vec3b>(16, 16);
    const auto corner = r.image.at<cv::Vec3b>(0, 0);
    const Rgb bg = preset.colors.at(r.labels[1]);
    EXPECT_EQ(corner, cv::Vec3b(bg.r, bg.g, bg.b)) << r.sample_id;
    if (!plan.domains[0].IsKnown(r.labels[0])) continue;
    (r.partition == Partition::kTest ? test_serials : fit_serials)[r.labels[0]].insert(center[0]);
  }
  for (const auto& [value, serials] : fit_serials) {
    for (int s : serials) EXPECT_FALSE(test_serials[value].count(s)) << value;
  }
}

TEST(CompositeTest, MissingValueAndEmptyIndex) {
  testing::TempDir dir("composite-missing");
  const Preset preset = BuiltinPreset("color-object");
  const SplitPlan plan = MakeSplitPlan(preset, CorrelationKind::kCorrelated);
  auto objects = LoadAssetIndex(WriteObjects(dir.path(), plan.domains[0], 2), std::nullopt);
  std::erase_if(objects.rows, [](const AssetRow& r) { return r.raw_labels[0] == "zebra"; });
  try {
    IngestComposite(objects, FlatColorBackgrounds(preset.colors), plan, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIngestion);
    EXPECT_NE(std::string(e.what()).find("zebra"), std::string::npos);
  }
  EXPECT_THROW(IngestComposite(ExternalAssetIndex{}, FlatColorBackgrounds(preset.colors), plan, 0), Error);
}

}  // namespace
}  // namespace mosr
