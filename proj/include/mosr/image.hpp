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


#ifndef MOSR_IMAGE_HPP_
#define MOSR_IMAGE_HPP_

#include <opencv2/core.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace mosr {

// All in-memory images are 8-bit, channel order RGB (or RGBA).
using Image = cv::Mat;

Image ReadRgb(const std::string& path);
// Keeps the alpha channel; an image without one is a kInput error.
Image ReadRgba(const std::string& path);
void WritePng(const std::string& path, const Image& rgb);
std::vector<uint8_t> EncodePng(const Image& rgb);

// Resizes with area interpolation when shrinking and linear otherwise.
Image ResizeTo(const Image& image, int width, int height);

}  // namespace mosr

#endif  // MOSR_IMAGE_HPP_
