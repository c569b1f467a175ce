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


#ifndef MOSR_REPORT_HPP_
#define MOSR_REPORT_HPP_

#include <optional>
#include <string>
#include <vector>

#include "mosr/image.hpp"
#include "mosr/util.hpp"

namespace mosr {

struct Table {
  std::string corner;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  // Missing cells render as "-".
  std::vector<std::vector<std::optional<double>>> cells;
};

CsvTable ToCsv(const Table& table, int decimals = 1);
std::string ToAlignedText(const Table& table, int decimals = 1);

struct HeatmapStyle {
  double vmin = 0.0;
  double vmax = 1.0;
  int decimals = 2;
  int cell_width = 96;
  int cell_height = 56;
};

// Viridis-colored grid with the value printed in each cell.
Image RenderHeatmap(const std::vector<std::vector<double>>& values,
                    const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels, const std::string& title,
                    const HeatmapStyle& style = {});

}  // namespace mosr

#endif  // MOSR_REPORT_HPP_
