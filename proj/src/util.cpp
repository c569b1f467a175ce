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

#include "mosr/util.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/random/uniform_int_distribution.hpp>

#include "mosr/error.hpp"

namespace mosr {

const char* ToString(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfiguration: return "configuration";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kUnknownLabel: return "unknown-label";
    case ErrorKind::kGeneration: return "generation";
    case ErrorKind::kIngestion: return "ingestion";
    case ErrorKind::kInput: return "input";
    case ErrorKind::kTraining: return "training";
    case ErrorKind::kScoring: return "scoring";
    case ErrorKind::kFit: return "fit";
    case ErrorKind::kMetric: return "metric";
    case ErrorKind::kAggregation: return "aggregation";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

uint64_t Fnv1a64(std::string_view data, uint64_t seed) {
  uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string HexDigest(uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

Rng DeriveRng(uint64_t seed, std::string_view key) {
  const std::string seeded = std::to_string(seed) + "|" + std::string(key);
  std::seed_seq seq{Fnv1a64(seeded), Fnv1a64(seeded, 0x84222325cbf29ce4ULL)};
  return Rng(seq);
}

uint64_t UniformIndex(Rng& rng, uint64_t n) {
  boost::random::uniform_int_distribution<uint64_t> dist(0, n - 1);
  return dist(rng);
}

std::string Join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> Split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

size_t CsvTable::Column(std::string_view name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(ErrorKind::kIo, "csv column '" + std::string(name) + "' not found");
}

CsvTable ParseCsv(std::string_view text) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        row_has_content = false;
        break;
      default:
        field += c;
        row_has_content = true;
    }
  }
  if (in_quotes) throw Error(ErrorKind::kIo, "csv: unterminated quoted field");
  if (row_has_content || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  CsvTable table;
  if (rows.empty()) return table;
  table.header = std::move(rows.front());
  table.rows.assign(std::make_move_iterator(rows.begin() + 1),
                    std::make_move_iterator(rows.end()));
  for (size_t r = 0; r < table.rows.size(); ++r) {
    if (table.rows[r].size() != table.header.size()) {
      throw Error(ErrorKind::kIo, "csv: row " + std::to_string(r + 2) + " has " +
                                      std::to_string(table.rows[r].size()) +
                                      " fields, header has " +
                                      std::to_string(table.header.size()));
    }
  }
  return table;
}

CsvTable ReadCsv(const std::filesystem::path& path) { return ParseCsv(ReadFile(path)); }

namespace {

void AppendField(std::string& out, const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) {
    out += field;
    return;
  }
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

void AppendRow(std::string& out, const CsvRow& row) {
  for (size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    AppendField(out, row[i]);
  }
  out += '\n';
}

}  // namespace

std::string FormatCsv(const CsvTable& table) {
  std::string out;
  AppendRow(out, table.header);
  for (const auto& row : table.rows) AppendRow(out, row);
  return out;
}

void WriteCsv(const std::filesystem::path& path, const CsvTable& table) {
  WriteFileAtomic(path, FormatCsv(table));
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileAtomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorKind::kIo, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string FormatDouble(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return std::to_string(v);
  return std::string(buf, ptr);
}

}  // namespace mosr
