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


#include "mosr/report.hpp"

#include <algorithm>
#include <cstdio>
#include <opencv2/imgproc.hpp>

#include "mosr/error.hpp"

namespace mosr {
namespace {

std::string Cell(const std::optional<double>& v, int decimals) {
  if (!v) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, *v);
  return buf;
}

void CheckShape(const Table& t) {
  if (t.cells.size() != t.row_labels.size()) throw Error(ErrorKind::kIo, "table row count mismatch");
  for (const auto& row : t.cells) {
    if (row.size() != t.col_labels.size()) throw Error(ErrorKind::kIo, "table column count mismatch");
  }
}

constexpr int kFont = cv::FONT_HERSHEY_SIMPLEX;

void PutCentered(Image& img, const std::string& text, cv::Point center, double scale, cv::Scalar color) {
  int baseline = 0;
  const cv::Size size = cv::getTextSize(text, kFont, scale, 1, &baseline);
  cv::putText(img, text, {center.x - size.width / 2, center.y + size.height / 2}, kFont, scale, color, 1,
              cv::LINE_AA);
}

}  // namespace

CsvTable ToCsv(const Table& t, int decimals) {
  CheckShape(t);
  CsvTable csv;
  csv.header.push_back(t.corner);
  csv.header.insert(csv.header.end(), t.col_labels.begin(), t.col_labels.end());
  for (size_t i = 0; i < t.cells.size(); ++i) {
    CsvRow row{t.row_labels[i]};
    for (const auto& c : t.cells[i]) row.push_back(Cell(c, decimals));
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

std::string ToAlignedText(const Table& t, int decimals) {
  const CsvTable csv = ToCsv(t, decimals);
  std::vector<size_t> width(csv.header.size(), 0);
  const auto measure = [&](const CsvRow& row) {
    for (size_t j = 0; j < row.size(); ++j) width[j] = std::max(width[j], row[j].size());
  };
  measure(csv.header);
  for (const auto& row : csv.rows) measure(row);
  std::string out;
  const auto emit = [&](const CsvRow& row) {
    for (size_t j = 0; j < row.size(); ++j) {
      const std::string pad(width[j] - row[j].size(), ' ');
      out += j == 0 ? row[j] + pad : "  " + pad + row[j];
    }
    out += '\n';
  };
  emit(csv.header);
  size_t total = 0;
  for (size_t w : width) total += w + 2;
  out += std::string(total - 2, '-') + '\n';
  for (const auto& row : csv.rows) emit(row);
  return out;
}

Image RenderHeatmap(const std::vector<std::vector<double>>& values, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels, const std::string& title,
                    const HeatmapStyle& style) {
  const int rows = static_cast<int>(values.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(values.front().size());
  if (rows == 0 || cols == 0 || static_cast<int>(row_labels.size()) != rows ||
      static_cast<int>(col_labels.size()) != cols) {
    throw Error(ErrorKind::kIo, "heatmap labels do not match the matrix shape");
  }
  const int left = 110, top = 70;
  const int width = left + cols * style.cell_width + 20;
  const int height = top + rows * style.cell_height + 20;
  Image canvas(height, width, CV_8UC3, cv::Scalar::all(255));
  PutCentered(canvas, title, {width / 2, 18}, 0.5, cv::Scalar::all(0));

  const double span = style.vmax > style.vmin ? style.vmax - style.vmin : 1.0;
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(values[i].size()) != cols) throw Error(ErrorKind::kIo, "ragged heatmap matrix");
    PutCentered(canvas, row_labels[i], {left / 2, top + i * style.cell_height + style.cell_height / 2}, 0.45,
                cv::Scalar::all(0));
    for (int j = 0; j < cols; ++j) {
      const double t = std::clamp((values[i][j] - style.vmin) / span, 0.0, 1.0);
      cv::Mat level(1, 1, CV_8UC1, cv::Scalar(static_cast<int>(std::lround(t * 255.0))));
      cv::Mat bgr;
      cv::applyColorMap(level, bgr, cv::COLORMAP_VIRIDIS);
      const cv::Vec3b c = bgr.at<cv::Vec3b>(0, 0);
      const cv::Rect cell(left + j * style.cell_width, top + i * style.cell_height, style.cell_width,
                          style.cell_height);
      // Canvas is RGB; the colormap output is BGR.
      cv::rectangle(canvas, cell, cv::Scalar(c[2], c[1], c[0]), cv::FILLED);
      cv::rectangle(canvas, cell, cv::Scalar::all(255), 1);
      const cv::Scalar ink = t > 0.6 ? cv::Scalar::all(0) : cv::Scalar::all(255);
      PutCentered(canvas, Cell(values[i][j], style.decimals),
                  {cell.x + cell.width / 2, cell.y + cell.height / 2}, 0.5, ink);
    }
  }
  for (int j = 0; j < cols; ++j) {
    PutCentered(canvas, col_labels[j], {left + j * style.cell_width + style.cell_width / 2, top - 16}, 0.45,
                cv::Scalar::all(0));
  }
  return canvas;
}

}  // namespace mosr
