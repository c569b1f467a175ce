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


#include "mosr/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <opencv2/imgproc.hpp>

#include "mosr/error.hpp"

namespace mosr {
namespace {

using nlohmann::json;

std::string ComboKey(const Combination& c) { return Join(c, "_"); }

std::string SampleId(Partition p, const Combination& c, size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05zu", index);
  return ToString(p) + "-" + ComboKey(c) + "-" + buf;
}

std::string RecordPath(Partition p, const Combination& c, const std::string& id) {
  return ToString(p) + "/" + ComboKey(c) + "/" + id + ".png";
}

// `count` positions in [0, pool): distinct unless replacement is allowed.
std::vector<size_t> Draw(size_t pool, size_t count, bool allow_replacement, Rng& rng,
                         const std::string& what) {
  std::vector<size_t> out;
  if (count <= pool) {
    std::vector<size_t> order(pool);
    for (size_t i = 0; i < pool; ++i) order[i] = i;
    Shuffle(order, rng);
    out.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    return out;
  }
  if (!allow_replacement || pool == 0) {
    throw Error(ErrorKind::kGeneration, what + ": requested " + std::to_string(count) +
                                            " samples from a pool of " + std::to_string(pool) +
                                            " (sampling with replacement is disabled)");
  }
  for (size_t i = 0; i < count; ++i) out.push_back(UniformIndex(rng, pool));
  return out;
}

int DigitOf(const Value& v) {
  if (v.size() != 1 || v[0] < '0' || v[0] > '9') {
    throw Error(ErrorKind::kGeneration, "'" + v + "' is not a digit value");
  }
  return v[0] - '0';
}

uint8_t Blend(int fg, int bg, int alpha) {
  // round((alpha * fg + (255 - alpha) * bg) / 255), half away from zero.
  return static_cast<uint8_t>((2 * (alpha * fg + (255 - alpha) * bg) + 255) / 510);
}

Image FitObject(const Image& rgba, int canvas) {
  if (rgba.empty() || rgba.channels() != 4) {
    throw Error(ErrorKind::kGeneration, "object crop has no alpha channel");
  }
  if (rgba.cols <= canvas && rgba.rows <= canvas) return rgba;
  const double scale = std::min(static_cast<double>(canvas) / rgba.cols,
                                static_cast<double>(canvas) / rgba.rows);
  const int w = std::clamp(static_cast<int>(std::floor(rgba.cols * scale)), 1, canvas);
  const int h = std::clamp(static_cast<int>(std::floor(rgba.rows * scale)), 1, canvas);
  return ResizeTo(rgba, w, h);
}

Image Composite(const Image& object_rgba, Image canvas_rgb, Rng& rng,
                const CompositeOptions& options) {
  const Image obj = FitObject(object_rgba, options.canvas);
  const auto offset = [&](int slack) {
    const int center = slack / 2;
    const int lo = options.max_jitter < 0 ? 0 : std::max(0, center - options.max_jitter);
    const int hi = options.max_jitter < 0 ? slack : std::min(slack, center + options.max_jitter);
    return lo + static_cast<int>(UniformIndex(rng, static_cast<uint64_t>(hi - lo + 1)));
  };
  const int x0 = offset(options.canvas - obj.cols);
  const int y0 = offset(options.canvas - obj.rows);
  for (int y = 0; y < obj.rows; ++y) {
    const auto* src = obj.ptr<cv::Vec4b>(y);
    auto* dst = canvas_rgb.ptr<cv::Vec3b>(y0 + y) + x0;
    for (int x = 0; x < obj.cols; ++x) {
      const int a = src[x][3];
      for (int c = 0; c < 3; ++c) dst[x][c] = Blend(src[x][c], dst[x][c], a);
    }
  }
  return canvas_rgb;
}

}  // namespace

std::string ToString(Partition p) {
  switch (p) {
    case Partition::kTrain: return "train";
    case Partition::kVal: return "val";
    case Partition::kTest: return "test";
  }
  return "?";
}

Partition ParsePartition(const std::string& s) {
  if (s == "train") return Partition::kTrain;
  if (s == "val") return Partition::kVal;
  if (s == "test") return Partition::kTest;
  throw Error(ErrorKind::kIo, "unknown partition '" + s + "'");
}

std::vector<size_t> DatasetManifest::Indices(Partition p) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].partition == p) out.push_back(i);
  }
  return out;
}

std::filesystem::path DatasetManifest::Resolve(const SampleRecord& r) const {
  const std::filesystem::path p(r.path);
  return p.is_absolute() ? p : root / p;
}

Image TintDigit(const Image& gray, const Rgb& color, int image_size) {
  if (gray.type() != CV_8UC1) throw Error(ErrorKind::kGeneration, "digit image is not 8-bit gray");
  Image src = gray;
  if (gray.cols > image_size || gray.rows > image_size) {
    src = ResizeTo(gray, image_size, image_size);
  }
  Image out(image_size, image_size, CV_8UC3, cv::Scalar::all(0));
  const int x0 = (image_size - src.cols) / 2;
  const int y0 = (image_size - src.rows) / 2;
  const int rgb[3] = {color.r, color.g, color.b};
  for (int y = 0; y < src.rows; ++y) {
    const uint8_t* s = src.ptr<uint8_t>(y);
    auto* d = out.ptr<cv::Vec3b>(y0 + y) + x0;
    for (int x = 0; x < src.cols; ++x) {
      for (int c = 0; c < 3; ++c) {
        d[x][c] = static_cast<uint8_t>((2 * s[x] * rgb[c] + 255) / 510);
      }
    }
  }
  return out;
}

DatasetManifest GenerateColorMnist(const SplitPlan& plan, const DigitPool& digits,
                                   const std::map<Value, Rgb>& colors, uint64_t seed,
                                   const ColorMnistOptions& options) {
  if (plan.num_attributes() != 2) {
    throw Error(ErrorKind::kGeneration, "color-mnist needs exactly two attributes (digit, color)");
  }
  for (const auto& list : {plan.domains[1].known_values, plan.domains[1].unknown_values}) {
    for (const auto& c : list) {
      if (!colors.count(c)) throw Error(ErrorKind::kGeneration, "no RGB value for color '" + c + "'");
    }
  }

  // Per digit: a fixed 90/10 split of the training pool into train/val pools.
  std::array<std::vector<size_t>, 10> train_pool, val_pool;
  for (int d = 0; d < 10; ++d) {
    std::vector<size_t> order(digits.TrainCount(d));
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = DeriveRng(seed, "digit-pool/" + std::to_string(d));
    Shuffle(order, rng);
    const auto n_val = static_cast<size_t>(std::llround(order.size() * plan.val_fraction));
    val_pool[d].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_pool[d].assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  }

  DatasetManifest manifest;
  manifest.plan = plan;
  manifest.generator_seed = seed;
  manifest.image_size = options.image_size;
  const auto train_set = plan.TrainSet();

  const auto emit = [&](Partition part, const Combination& combo, const Image& source,
                        size_t index) {
    SampleRecord r;
    r.sample_id = SampleId(part, combo, index);
    r.path = RecordPath(part, combo, r.sample_id);
    r.labels = combo;
    r.group = AssignGroup(combo, plan.domains, train_set);
    r.partition = part;
    r.image = TintDigit(source, colors.at(combo[1]), options.image_size);
    manifest.records.push_back(std::move(r));
  };

  const auto n_total = static_cast<size_t>(plan.samples_per_combination);
  const auto n_val = static_cast<size_t>(std::llround(n_total * plan.val_fraction));
  const size_t n_train = n_total - n_val;
  for (const auto& [part, count] : {std::pair{Partition::kTrain, n_train},
                                    std::pair{Partition::kVal, n_val}}) {
    for (const auto& combo : plan.train_combinations) {
      const int d = DigitOf(combo[0]);
      const auto& pool = part == Partition::kTrain ? train_pool[d] : val_pool[d];
      Rng rng = DeriveRng(seed, ToString(part) + "/" + ComboKey(combo));
      const auto picks = Draw(pool.size(), count, options.allow_replacement, rng,
                              ToString(part) + " " + ComboKey(combo));
      for (size_t i = 0; i < picks.size(); ++i) emit(part, combo, digits.train[d][pool[picks[i]]], i);
    }
  }
  for (const auto& [group, tuples] : plan.test_groups.tuples) {
    const auto count = static_cast<size_t>(plan.test_samples_per_tuple) *
                       static_cast<size_t>(plan.test_groups.multiplicity.at(group));
    for (const auto& combo : tuples) {
      const int d = DigitOf(combo[0]);
      Rng rng = DeriveRng(seed, "test/" + ComboKey(combo));
      const auto picks = Draw(digits.TestCount(d), count, options.allow_replacement, rng,
                              "test " + ComboKey(combo));
      for (size_t i = 0; i < picks.size(); ++i) emit(Partition::kTest, combo, digits.test[d][picks[i]], i);
    }
  }

  json colors_json = json::object();
  for (const auto& [name, c] : colors) colors_json[name] = {c.r, c.g, c.b};
  manifest.generator = {{"generator", "color-mnist"},
                        {"allow_replacement", options.allow_replacement},
                        {"colors", colors_json}};
  return manifest;
}

Image ComposeObjectOnBackground(const Image& object_rgba, const Image& background_rgb, Rng& rng,
                                const CompositeOptions& options) {
  if (background_rgb.empty() || background_rgb.type() != CV_8UC3) {
    throw Error(ErrorKind::kGeneration, "background must be an 8-bit RGB image");
  }
  const int short_side = std::min(background_rgb.cols, background_rgb.rows);
  if (short_side < options.canvas) {
    throw Error(ErrorKind::kGeneration, "background " + std::to_string(background_rgb.cols) + "x" +
                                            std::to_string(background_rgb.rows) +
                                            " is smaller than the canvas");
  }
  const double scale = static_cast<double>(options.canvas) / short_side;
  const int w = std::max(options.canvas, static_cast<int>(std::lround(background_rgb.cols * scale)));
  const int h = std::max(options.canvas, static_cast<int>(std::lround(background_rgb.rows * scale)));
  const Image scaled = ResizeTo(background_rgb, w, h);
  const cv::Rect crop((w - options.canvas) / 2, (h - options.canvas) / 2, options.canvas,
                      options.canvas);
  return Composite(object_rgba, scaled(crop).clone(), rng, options);
}

Image ComposeObjectOnBackground(const Image& object_rgba, const Rgb& background, Rng& rng,
                                const CompositeOptions& options) {
  Image canvas(options.canvas, options.canvas, CV_8UC3,
               cv::Scalar(background.r, background.g, background.b));
  return Composite(object_rgba, canvas, rng, options);
}

std::vector<std::string> ValidateManifest(const DatasetManifest& manifest) {
  std::vector<std::string> violations;
  const auto& plan = manifest.plan;
  const auto train_set = plan.TrainSet();
  std::map<Partition, std::map<Combination, size_t>> counts;

  for (const auto& r : manifest.records) {
    ++counts[r.partition][r.labels];
    try {
      const GroupTag expected = AssignGroup(r.labels, plan.domains, train_set);
      if (expected != r.group) {
        violations.push_back("group-assignment: " + r.sample_id + " " + ComboKey(r.labels) +
                             " is tagged " + r.group.ToString() + ", expected " +
                             expected.ToString());
      }
    } catch (const Error& e) {
      violations.push_back("group-assignment: " + r.sample_id + ": " + e.what());
    }
    if (r.partition != Partition::kTest &&
        (r.group != GroupTag::KnownSeen() || !train_set.count(r.labels))) {
      violations.push_back("partition-purity: " + r.sample_id + " " + ComboKey(r.labels) +
                           " (" + r.group.ToString() + ") in " + ToString(r.partition));
    }
    if (!r.image.empty() &&
        (r.image.cols != manifest.image_size || r.image.rows != manifest.image_size)) {
      violations.push_back("image-size: " + r.sample_id + " is " + std::to_string(r.image.cols) +
                           "x" + std::to_string(r.image.rows));
    }
  }

  for (const Partition part : {Partition::kTrain, Partition::kVal}) {
    size_t expected = 0;
    for (const auto& c : plan.train_combinations) expected = std::max(expected, counts[part][c]);
    for (const auto& c : plan.train_combinations) {
      if (counts[part][c] != expected) {
        violations.push_back("balance: " + ToString(part) + " " + ComboKey(c) + " has " +
                             std::to_string(counts[part][c]) + " records, expected " +
                             std::to_string(expected));
      }
    }
  }
  if (manifest.balanced_test) {
    size_t expected = 0;
    for (const auto& [group, tuples] : plan.test_groups.tuples) {
      for (const auto& c : tuples) {
        expected = std::max(expected,
                            counts[Partition::kTest][c] / plan.test_groups.multiplicity.at(group));
      }
    }
    for (const auto& [group, tuples] : plan.test_groups.tuples) {
      const size_t m = plan.test_groups.multiplicity.at(group);
      for (const auto& c : tuples) {
        if (counts[Partition::kTest][c] != expected * m) {
          violations.push_back("balance: test " + ComboKey(c) + " has " +
                               std::to_string(counts[Partition::kTest][c]) +
                               " records, expected " + std::to_string(expected * m));
        }
      }
    }
  }
  return violations;
}

json ManifestCounts(const DatasetManifest& manifest) {
  std::map<std::string, std::map<std::string, size_t>> by_group;
  for (const auto& r : manifest.records) ++by_group[ToString(r.partition)][r.group.ToString()];
  return by_group;
}

void WriteDataset(DatasetManifest& manifest, const std::filesystem::path& dir) {
  const int m = manifest.plan.num_attributes();
  CsvTable table;
  table.header = {"sample_id", "path"};
  for (int a = 1; a <= m; ++a) table.header.push_back("attr_" + std::to_string(a));
  table.header.push_back("group");
  table.header.push_back("partition");
  for (const auto& r : manifest.records) {
    if (!r.image.empty() && !std::filesystem::path(r.path).is_absolute()) {
      WritePng((dir / r.path).string(), r.image);
    }
    CsvRow row{r.sample_id, r.path};
    row.insert(row.end(), r.labels.begin(), r.labels.end());
    row.push_back(r.group.ToString());
    row.push_back(ToString(r.partition));
    table.rows.push_back(std::move(row));
  }
  json gen = manifest.generator;
  gen["seed"] = manifest.generator_seed;
  gen["image_size"] = manifest.image_size;
  gen["balanced_test"] = manifest.balanced_test;
  gen["plan"] = ToJson(manifest.plan);
  gen["counts"] = ManifestCounts(manifest);
  WriteFileAtomic(dir / "generator.json", gen.dump(2) + "\n");
  WriteCsv(dir / "manifest.csv", table);
  manifest.root = dir;
}

DatasetManifest ReadDataset(const std::filesystem::path& dir) {
  DatasetManifest manifest;
  manifest.root = dir;
  json gen;
  try {
    gen = json::parse(ReadFile(dir / "generator.json"));
    manifest.generator_seed = gen.at("seed").get<uint64_t>();
    manifest.image_size = gen.at("image_size").get<int>();
    manifest.balanced_test = gen.value("balanced_test", true);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIo, (dir / "generator.json").string() + ": " + e.what());
  }
  manifest.plan = SplitPlanFromJson(gen.at("plan"));
  gen.erase("plan");
  gen.erase("counts");
  manifest.generator = gen;

  const CsvTable table = ReadCsv(dir / "manifest.csv");
  const int m = manifest.plan.num_attributes();
  const size_t id = table.Column("sample_id"), path = table.Column("path"),
               group = table.Column("group"), part = table.Column("partition");
  std::vector<size_t> attrs;
  for (int a = 1; a <= m; ++a) attrs.push_back(table.Column("attr_" + std::to_string(a)));
  manifest.records.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    SampleRecord r;
    r.sample_id = row.at(id);
    r.path = row.at(path);
    for (size_t a : attrs) r.labels.push_back(row.at(a));
    r.group = GroupTag::Parse(row.at(group));
    r.partition = ParsePartition(row.at(part));
    manifest.records.push_back(std::move(r));
  }
  return manifest;
}

void LoadImages(DatasetManifest& manifest, Partition partition) {
  for (auto& r : manifest.records) {
    if (r.partition != partition || !r.image.empty()) continue;
    r.image = ResizeTo(ReadRgb(manifest.Resolve(r).string()), manifest.image_size,
                       manifest.image_size);
  }
}

}  // namespace mosr
