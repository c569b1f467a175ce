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


#ifndef MOSR_DIGITS_HPP_
#define MOSR_DIGITS_HPP_

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "mosr/image.hpp"

namespace mosr {

// Grayscale digit images grouped by class; pixels are CV_8UC1.
struct DigitPool {
  std::array<std::vector<Image>, 10> train;
  std::array<std::vector<Image>, 10> test;

  size_t TrainCount(int digit) const { return train.at(digit).size(); }
  size_t TestCount(int digit) const { return test.at(digit).size(); }
};

// IDX files, optionally gzip-compressed (detected from the magic bytes).
std::vector<Image> ReadIdxImages(const std::filesystem::path& path);
std::vector<uint8_t> ReadIdxLabels(const std::filesystem::path& path);

// $MOSR_ASSET_ROOT if set, otherwise the root compiled into the library.
std::filesystem::path AssetRoot();

// Reads {train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz] from `dir`
// (default <asset root>/mnist). Missing digits are a kInput error.
DigitPool LoadDigitPool(const std::filesystem::path& dir = {});

}  // namespace mosr

#endif  // MOSR_DIGITS_HPP_
