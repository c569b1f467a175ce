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


#include "mosr/image.hpp"

#include <filesystem>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "mosr/error.hpp"
#include "mosr/util.hpp"

namespace mosr {
namespace {

cv::Mat ToBgr(const Image& rgb) {
  cv::Mat out;
  switch (rgb.channels()) {
    case 1: return rgb;
    case 3: cv::cvtColor(rgb, out, cv::COLOR_RGB2BGR); return out;
    case 4: cv::cvtColor(rgb, out, cv::COLOR_RGBA2BGRA); return out;
  }
  throw Error(ErrorKind::kIo, "unsupported channel count " + std::to_string(rgb.channels()));
}

}  // namespace

Image ReadRgb(const std::string& path) {
  cv::Mat raw = cv::imread(path, cv::IMREAD_COLOR);
  if (raw.empty()) throw Error(ErrorKind::kInput, "cannot read image " + path);
  Image rgb;
  cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

Image ReadRgba(const std::string& path) {
  cv::Mat raw = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw Error(ErrorKind::kInput, "cannot read image " + path);
  if (raw.depth() != CV_8U) throw Error(ErrorKind::kInput, path + " is not an 8-bit image");
  if (raw.channels() != 4) {
    throw Error(ErrorKind::kInput, path + " has no alpha channel (object crops need a mask)");
  }
  Image rgba;
  cv::cvtColor(raw, rgba, cv::COLOR_BGRA2RGBA);
  return rgba;
}

std::vector<uint8_t> EncodePng(const Image& rgb) {
  std::vector<uint8_t> bytes;
  if (!cv::imencode(".png", ToBgr(rgb), bytes)) {
    throw Error(ErrorKind::kIo, "PNG encoding failed");
  }
  return bytes;
}

void WritePng(const std::string& path, const Image& rgb) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const auto bytes = EncodePng(rgb);
  WriteFileAtomic(path, std::string(bytes.begin(), bytes.end()));
}

Image ResizeTo(const Image& image, int width, int height) {
  if (image.cols == width && image.rows == height) return image;
  const bool shrink = width < image.cols || height < image.rows;
  Image out;
  cv::resize(image, out, cv::Size(width, height), 0, 0,
             shrink ? cv::INTER_AREA : cv::INTER_LINEAR);
  return out;
}

}  // namespace mosr
