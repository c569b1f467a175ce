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

#ifndef MOSR_UTIL_HPP_
#define MOSR_UTIL_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace mosr {

using Rng = std::mt19937_64;

// FNV-1a. Stable across platforms, unlike std::hash.
uint64_t Fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ULL);
std::string HexDigest(uint64_t value);

// Independent stream for a (seed, key) pair, e.g. one per combination.
Rng DeriveRng(uint64_t seed, std::string_view key);

// Uniform integer in [0, n) and in-place shuffle with portable results
// (std:: distributions are implementation-defined).
uint64_t UniformIndex(Rng& rng, uint64_t n);
template <typename T>
void Shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(UniformIndex(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

std::string Join(const std::vector<std::string>& parts, std::string_view sep);
std::vector<std::string> Split(std::string_view s, char sep);

// Minimal RFC 4180 CSV: fields containing separators, quotes or newlines are
// quoted on write and unquoted on read.
using CsvRow = std::vector<std::string>;
struct CsvTable {
  CsvRow header;
  std::vector<CsvRow> rows;

  // Index of a header column; throws kIo if absent.
  size_t Column(std::string_view name) const;
};

CsvTable ReadCsv(const std::filesystem::path& path);
CsvTable ParseCsv(std::string_view text);
std::string FormatCsv(const CsvTable& table);
void WriteCsv(const std::filesystem::path& path, const CsvTable& table);

std::string ReadFile(const std::filesystem::path& path);
// Writes through a temporary file and renames, so readers never observe a
// half-written artifact.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view contents);

// Shortest round-trip decimal representation of a double.
std::string FormatDouble(double v);

}  // namespace mosr

#endif  // MOSR_UTIL_HPP_
