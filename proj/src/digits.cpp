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


#include "mosr/digits.hpp"

#include <zlib.h>

#include <cstdlib>
#include <cstring>

#include "mosr/error.hpp"
#include "mosr/util.hpp"

#ifndef MOSR_DEFAULT_ASSET_ROOT
#define MOSR_DEFAULT_ASSET_ROOT "data"
#endif

namespace mosr {
namespace {

std::string ReadMaybeGzip(const std::filesystem::path& path) {
  gzFile file = gzopen(path.string().c_str(), "rb");
  if (!file) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::string out;
  char buf[1 << 16];
  int n;
  while ((n = gzread(file, buf, sizeof(buf))) > 0) out.append(buf, static_cast<size_t>(n));
  const bool failed = n < 0;
  gzclose(file);
  if (failed) throw Error(ErrorKind::kIo, "corrupt gzip stream in " + path.string());
  return out;
}

uint32_t BigEndian32(const std::string& s, size_t offset) {
  const auto* p = reinterpret_cast<const unsigned char*>(s.data() + offset);
  return (uint32_t{p[0]} << 24) | (uint32_t{p[1]} << 16) | (uint32_t{p[2]} << 8) | p[3];
}

std::filesystem::path FindIdx(const std::filesystem::path& dir, const std::string& stem) {
  for (const auto& name : {stem + ".gz", stem}) {
    if (std::filesystem::exists(dir / name)) return dir / name;
  }
  throw Error(ErrorKind::kInput, "missing " + (dir / stem).string() + "[.gz]");
}

}  // namespace

std::vector<Image> ReadIdxImages(const std::filesystem::path& path) {
  const std::string raw = ReadMaybeGzip(path);
  if (raw.size() < 16 || BigEndian32(raw, 0) != 0x803) {
    throw Error(ErrorKind::kInput, path.string() + " is not an IDX image file");
  }
  const uint32_t count = BigEndian32(raw, 4);
  const int rows = static_cast<int>(BigEndian32(raw, 8));
  const int cols = static_cast<int>(BigEndian32(raw, 12));
  const size_t plane = static_cast<size_t>(rows) * cols;
  if (raw.size() != 16 + plane * count) {
    throw Error(ErrorKind::kInput, path.string() + " has a truncated payload");
  }
  std::vector<Image> images;
  images.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    Image img(rows, cols, CV_8UC1);
    std::memcpy(img.data, raw.data() + 16 + plane * i, plane);
    images.push_back(std::move(img));
  }
  return images;
}

std::vector<uint8_t> ReadIdxLabels(const std::filesystem::path& path) {
  const std::string raw = ReadMaybeGzip(path);
  if (raw.size() < 8 || BigEndian32(raw, 0) != 0x801) {
    throw Error(ErrorKind::kInput, path.string() + " is not an IDX label file");
  }
  const uint32_t count = BigEndian32(raw, 4);
  if (raw.size() != 8 + size_t{count}) {
    throw Error(ErrorKind::kInput, path.string() + " has a truncated payload");
  }
  return {raw.begin() + 8, raw.end()};
}

std::filesystem::path AssetRoot() {
  if (const char* env = std::getenv("MOSR_ASSET_ROOT"); env && *env) return env;
  return MOSR_DEFAULT_ASSET_ROOT;
}

DigitPool LoadDigitPool(const std::filesystem::path& dir) {
  const auto root = dir.empty() ? AssetRoot() / "mnist" : dir;
  DigitPool pool;
  for (const auto& [prefix, target] :
       {std::pair{std::string("train"), &pool.train}, std::pair{std::string("t10k"), &pool.test}}) {
    auto images = ReadIdxImages(FindIdx(root, prefix + "-images-idx3-ubyte"));
    const auto labels = ReadIdxLabels(FindIdx(root, prefix + "-labels-idx1-ubyte"));
    if (images.size() != labels.size()) {
      throw Error(ErrorKind::kInput, prefix + " image and label counts differ in " + root.string());
    }
    for (size_t i = 0; i < images.size(); ++i) {
      if (labels[i] > 9) throw Error(ErrorKind::kInput, "digit label out of range");
      (*target)[labels[i]].push_back(std::move(images[i]));
    }
  }
  for (int d = 0; d < 10; ++d) {
    if (pool.train[d].empty() || pool.test[d].empty()) {
      throw Error(ErrorKind::kInput, "digit pool lacks digit " + std::to_string(d));
    }
  }
  return pool;
}

}  // namespace mosr
