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

#include "mosr/splits.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "mosr/error.hpp"
#include "mosr/util.hpp"

namespace mosr {
namespace {

using nlohmann::json;

void CheckUnique(const std::vector<Value>& values, const std::string& where) {
  std::set<Value> seen;
  for (const auto& v : values) {
    if (!seen.insert(v).second) {
      throw Error(ErrorKind::kValidation, where + " lists '" + v + "' twice");
    }
  }
}

std::string FormatCombination(const Combination& c) { return "(" + Join(c, ", ") + ")"; }

// Cartesian product, first attribute outermost.
std::vector<Combination> Product(const std::vector<std::vector<Value>>& axes) {
  std::vector<Combination> out{{}};
  for (const auto& axis : axes) {
    std::vector<Combination> next;
    next.reserve(out.size() * axis.size());
    for (const auto& prefix : out) {
      for (const auto& v : axis) {
        Combination c = prefix;
        c.push_back(v);
        next.push_back(std::move(c));
      }
    }
    out = std::move(next);
  }
  return out;
}

size_t EqualKnownCount(const std::vector<AttributeDomain>& domains, CorrelationKind kind) {
  const size_t n = domains.front().known_values.size();
  for (const auto& d : domains) {
    if (d.known_values.size() != n) {
      throw Error(ErrorKind::kConfiguration,
                  ToString(kind) + " requires equal known-value counts; '" +
                      domains.front().name + "' has " + std::to_string(n) + ", '" +
                      d.name + "' has " + std::to_string(d.known_values.size()));
    }
  }
  return n;
}

void ValidateDomains(const std::vector<AttributeDomain>& domains) {
  if (domains.empty()) throw Error(ErrorKind::kValidation, "no attribute domains");
  std::set<std::string> names;
  for (const auto& d : domains) {
    d.Validate();
    if (!names.insert(d.name).second) {
      throw Error(ErrorKind::kValidation, "attribute '" + d.name + "' defined twice");
    }
  }
}

std::vector<Combination> ValidateExplicit(const std::vector<AttributeDomain>& domains,
                                          const std::vector<Combination>& combos) {
  std::set<Combination> seen;
  for (const auto& c : combos) {
    if (c.size() != domains.size()) {
      throw Error(ErrorKind::kValidation, "combination " + FormatCombination(c) + " has " +
                                              std::to_string(c.size()) +
                                              " values, expected " +
                                              std::to_string(domains.size()));
    }
    for (size_t m = 0; m < domains.size(); ++m) {
      if (!domains[m].IsKnown(c[m])) {
        throw Error(ErrorKind::kValidation,
                    "combination " + FormatCombination(c) + " uses '" + c[m] +
                        "', which is not a known value of '" + domains[m].name + "'");
      }
    }
    if (!seen.insert(c).second) {
      throw Error(ErrorKind::kValidation, "combination " + FormatCombination(c) +
                                              " listed twice");
    }
  }
  return combos;
}

}  // namespace

// ---------------------------------------------------------------- domains

void AttributeDomain::Validate() const {
  const std::string where = "attribute '" + name + "'";
  if (known_values.empty()) throw Error(ErrorKind::kValidation, where + " has no known values");
  if (unknown_values.empty()) {
    throw Error(ErrorKind::kValidation, where + " has no unknown values");
  }
  CheckUnique(known_values, where + " known values");
  CheckUnique(unknown_values, where + " unknown values");
  for (const auto& v : unknown_values) {
    if (IsKnown(v)) {
      throw Error(ErrorKind::kValidation,
                  where + ": '" + v + "' is both a known and an unknown value");
    }
  }
}

bool AttributeDomain::IsKnown(const Value& v) const { return KnownIndex(v) >= 0; }

bool AttributeDomain::IsUnknown(const Value& v) const {
  return std::find(unknown_values.begin(), unknown_values.end(), v) != unknown_values.end();
}

int AttributeDomain::KnownIndex(const Value& v) const {
  const auto it = std::find(known_values.begin(), known_values.end(), v);
  return it == known_values.end() ? -1 : static_cast<int>(it - known_values.begin());
}

std::string ToString(CorrelationKind kind) {
  switch (kind) {
    case CorrelationKind::kUncorrelated: return "uncorrelated";
    case CorrelationKind::kSemiCorrelated: return "semi_correlated";
    case CorrelationKind::kCorrelated: return "correlated";
    case CorrelationKind::kExplicit: return "explicit";
  }
  return "?";
}

std::string ShortName(CorrelationKind kind) {
  switch (kind) {
    case CorrelationKind::kUncorrelated: return "uc";
    case CorrelationKind::kSemiCorrelated: return "sc";
    case CorrelationKind::kCorrelated: return "c";
    case CorrelationKind::kExplicit: return "explicit";
  }
  return "?";
}

CorrelationKind ParseCorrelationKind(const std::string& s) {
  if (s == "uc" || s == "uncorrelated") return CorrelationKind::kUncorrelated;
  if (s == "sc" || s == "semi_correlated" || s == "semi-correlated") {
    return CorrelationKind::kSemiCorrelated;
  }
  if (s == "c" || s == "correlated") return CorrelationKind::kCorrelated;
  if (s == "explicit") return CorrelationKind::kExplicit;
  throw Error(ErrorKind::kConfiguration, "unknown correlation kind '" + s + "'");
}

// ---------------------------------------------------------------- groups

std::string GroupTag::ToString() const {
  switch (kind_) {
    case Kind::kKnownSeen: return "known_seen";
    case Kind::kKnownUnseenCombo: return "known_unseen";
    case Kind::kOodAttr: return "ood_attr_" + std::to_string(attribute_ + 1);
    case Kind::kOodAll: return "ood_all";
  }
  return "?";
}

GroupTag GroupTag::Parse(const std::string& s) {
  if (s == "known_seen") return KnownSeen();
  if (s == "known_unseen") return KnownUnseenCombo();
  if (s == "ood_all") return OodAll();
  const std::string prefix = "ood_attr_";
  if (s.rfind(prefix, 0) == 0) {
    const int m = std::stoi(s.substr(prefix.size()));
    if (m >= 1) return OodAttr(m - 1);
  }
  throw Error(ErrorKind::kIo, "unknown group tag '" + s + "'");
}

OpenSetGroup OpenSetGroup::From(const GroupTag& tag, int num_attributes) {
  switch (tag.kind()) {
    case GroupTag::Kind::kKnownSeen:
    case GroupTag::Kind::kKnownUnseenCombo:
      return Known();
    case GroupTag::Kind::kOodAttr:
      return OodAttr(tag.attribute());
    case GroupTag::Kind::kOodAll:
      return OodAll(num_attributes);
  }
  return Known();
}

OpenSetGroup OpenSetGroup::FromUnknownFlags(const std::vector<bool>& unknown) {
  int count = 0;
  int which = -1;
  for (size_t m = 0; m < unknown.size(); ++m) {
    if (unknown[m]) {
      ++count;
      which = static_cast<int>(m);
    }
  }
  if (count == 0) return Known();
  if (count == 1) return OodAttr(which);
  return OodAll(static_cast<int>(unknown.size()));
}

std::string OpenSetGroup::Label(int num_attributes) const {
  if (index == 0) return "Known";
  if (index == num_attributes + 1) return "OOD-all";
  return "OOD-" + std::to_string(index);
}

double TestGroups::UnknownRate(const std::vector<AttributeDomain>& domains,
                               int attribute) const {
  double unknown = 0.0, total = 0.0;
  for (const auto& [group, list] : tuples) {
    const auto it = multiplicity.find(group);
    const double w = it == multiplicity.end() ? 1.0 : it->second;
    for (const auto& c : list) {
      total += w;
      if (domains[attribute].IsUnknown(c[attribute])) unknown += w;
    }
  }
  return total == 0.0 ? 0.0 : unknown / total;
}

size_t TestGroups::TotalWeight() const {
  size_t total = 0;
  for (const auto& [group, list] : tuples) {
    const auto it = multiplicity.find(group);
    total += list.size() * static_cast<size_t>(it == multiplicity.end() ? 1 : it->second);
  }
  return total;
}

// ---------------------------------------------------------------- operations

std::vector<Combination> BuildCombinations(const std::vector<AttributeDomain>& domains,
                                           const CorrelationConfig& config,
                                           int64_t rotation_seed) {
  ValidateDomains(domains);
  const size_t num_attributes = domains.size();
  switch (config.kind) {
    case CorrelationKind::kExplicit: {
      if (!config.explicit_combinations || config.explicit_combinations->empty()) {
        throw Error(ErrorKind::kConfiguration, "explicit configuration without combinations");
      }
      return ValidateExplicit(domains, *config.explicit_combinations);
    }
    case CorrelationKind::kUncorrelated: {
      std::vector<std::vector<Value>> axes;
      for (const auto& d : domains) axes.push_back(d.known_values);
      return Product(axes);
    }
    case CorrelationKind::kCorrelated:
    case CorrelationKind::kSemiCorrelated: {
      const size_t n = EqualKnownCount(domains, config.kind);
      const bool semi = config.kind == CorrelationKind::kSemiCorrelated;
      if (semi && n < 2) {
        throw Error(ErrorKind::kConfiguration,
                    "semi_correlated needs at least 2 known values per attribute");
      }
      const int64_t nn = static_cast<int64_t>(n);
      const size_t offset = static_cast<size_t>(((rotation_seed % nn) + nn) % nn);
      std::vector<Combination> out;
      for (size_t i = 0; i < n; ++i) {
        for (size_t step = 0; step < (semi ? 2u : 1u); ++step) {
          Combination c{domains[0].known_values[i]};
          for (size_t m = 1; m < num_attributes; ++m) {
            c.push_back(domains[m].known_values[(i + offset + step) % n]);
          }
          out.push_back(std::move(c));
        }
      }
      return out;
    }
  }
  throw Error(ErrorKind::kConfiguration, "unhandled correlation kind");
}

std::vector<std::string> CheckCombinationInvariants(
    const std::vector<AttributeDomain>& domains, CorrelationKind kind,
    const std::vector<Combination>& combinations) {
  std::vector<std::string> violations;
  std::set<Combination> seen;
  for (const auto& c : combinations) {
    if (c.size() != domains.size()) {
      violations.push_back("arity: " + FormatCombination(c));
      continue;
    }
    for (size_t m = 0; m < domains.size(); ++m) {
      if (!domains[m].IsKnown(c[m])) {
        violations.push_back("known-only: " + FormatCombination(c) + " uses '" + c[m] + "'");
      }
    }
    if (!seen.insert(c).second) violations.push_back("duplicate: " + FormatCombination(c));
  }
  if (!violations.empty()) return violations;

  // occurrences[m][value] = number of combinations using value at m.
  std::vector<std::map<Value, int>> occurrences(domains.size());
  for (size_t m = 0; m < domains.size(); ++m) {
    for (const auto& v : domains[m].known_values) occurrences[m][v] = 0;
  }
  for (const auto& c : combinations) {
    for (size_t m = 0; m < domains.size(); ++m) ++occurrences[m][c[m]];
  }
  const size_t n = domains.front().known_values.size();

  switch (kind) {
    case CorrelationKind::kUncorrelated: {
      std::vector<std::vector<Value>> axes;
      for (const auto& d : domains) axes.push_back(d.known_values);
      const auto full = Product(axes);
      if (seen != std::set<Combination>(full.begin(), full.end())) {
        violations.push_back("uncorrelated: combinations are not the full product (" +
                             std::to_string(combinations.size()) + " of " +
                             std::to_string(full.size()) + ")");
      }
      break;
    }
    case CorrelationKind::kCorrelated: {
      if (combinations.size() != n) {
        violations.push_back("correlated: expected " + std::to_string(n) +
                             " combinations, got " + std::to_string(combinations.size()));
      }
      for (size_t m = 0; m < domains.size(); ++m) {
        for (const auto& [v, count] : occurrences[m]) {
          if (count != 1) {
            violations.push_back("correlated: '" + v + "' of '" + domains[m].name +
                                 "' appears " + std::to_string(count) +
                                 " times (mapping is not a bijection)");
          }
        }
      }
      break;
    }
    case CorrelationKind::kSemiCorrelated: {
      if (combinations.size() != 2 * n) {
        violations.push_back("semi_correlated: expected " + std::to_string(2 * n) +
                             " combinations, got " + std::to_string(combinations.size()));
      }
      for (const auto& [v, count] : occurrences[0]) {
        if (count != 2) {
          violations.push_back("semi_correlated: '" + v + "' of '" + domains[0].name +
                               "' appears " + std::to_string(count) + " times, expected 2");
        }
      }
      for (size_t m = 1; m < domains.size(); ++m) {
        for (const auto& [v, count] : occurrences[m]) {
          if (count < 1) {
            violations.push_back("semi_correlated: '" + v + "' of '" + domains[m].name +
                                 "' never appears");
          }
        }
      }
      break;
    }
    case CorrelationKind::kExplicit:
      break;
  }
  return violations;
}

TestGroups BuildTestGroups(const std::vector<AttributeDomain>& domains, TestBalance balance) {
  ValidateDomains(domains);
  const int num_attributes = static_cast<int>(domains.size());
  bool balanced = true;
  for (const auto& d : domains) {
    if (d.unknown_values.size() != d.known_values.size()) {
      if (balance == TestBalance::kStrict) {
        throw Error(ErrorKind::kValidation,
                    "attribute '" + d.name + "' has " + std::to_string(d.known_values.size()) +
                        " known but " + std::to_string(d.unknown_values.size()) +
                        " unknown values; the test split needs equal counts");
      }
      balanced = false;
    }
  }

  std::vector<std::vector<Value>> axes;
  for (const auto& d : domains) {
    std::vector<Value> all = d.known_values;
    all.insert(all.end(), d.unknown_values.begin(), d.unknown_values.end());
    axes.push_back(std::move(all));
  }
  TestGroups groups;
  for (int g = 0; g < OpenSetGroup::Count(num_attributes); ++g) {
    groups.tuples[OpenSetGroup{g}];
    groups.multiplicity[OpenSetGroup{g}] = 1;
  }
  for (auto& tuple : Product(axes)) {
    std::vector<bool> unknown(domains.size());
    for (size_t m = 0; m < domains.size(); ++m) unknown[m] = domains[m].IsUnknown(tuple[m]);
    groups.tuples[OpenSetGroup::FromUnknownFlags(unknown)].push_back(std::move(tuple));
  }

  if (!balanced) {
    if (num_attributes != 2) {
      throw Error(ErrorKind::kValidation,
                  "equal-group-total balancing is defined for two attributes only");
    }
    size_t lcm = 1;
    for (const auto& [group, list] : groups.tuples) lcm = std::lcm(lcm, list.size());
    for (const auto& [group, list] : groups.tuples) {
      groups.multiplicity[group] = static_cast<int>(lcm / list.size());
    }
  }
  return groups;
}

GroupTag AssignGroup(const Combination& labels, const std::vector<AttributeDomain>& domains,
                     const std::set<Combination>& train_combinations) {
  if (labels.size() != domains.size()) {
    throw Error(ErrorKind::kUnknownLabel, "label tuple " + FormatCombination(labels) +
                                              " has wrong arity");
  }
  std::vector<bool> unknown(domains.size());
  int count = 0;
  int which = -1;
  for (size_t m = 0; m < domains.size(); ++m) {
    if (domains[m].IsKnown(labels[m])) continue;
    if (!domains[m].IsUnknown(labels[m])) {
      throw Error(ErrorKind::kUnknownLabel, "'" + labels[m] + "' is not a value of '" +
                                                domains[m].name + "'");
    }
    ++count;
    which = static_cast<int>(m);
  }
  if (count == 0) {
    return train_combinations.count(labels) ? GroupTag::KnownSeen()
                                            : GroupTag::KnownUnseenCombo();
  }
  if (count == 1) return GroupTag::OodAttr(which);
  return GroupTag::OodAll();
}

// ---------------------------------------------------------------- presets

void Preset::Validate() const {
  ValidateDomains(domains);
  if (samples_per_combination <= 0 || test_samples_per_tuple <= 0) {
    throw Error(ErrorKind::kConfiguration, "preset '" + name + "': sample counts must be positive");
  }
  for (const auto& [kind, combos] : combinations_by_kind) {
    ValidateExplicit(domains, combos);
    if (kind != CorrelationKind::kExplicit) {
      const auto violations = CheckCombinationInvariants(domains, kind, combos);
      if (!violations.empty()) {
        throw Error(ErrorKind::kConfiguration,
                    "preset '" + name + "' " + ToString(kind) + " table: " + violations.front());
      }
    }
  }
}

json ToJson(const Preset& p) {
  json j;
  j["name"] = p.name;
  j["generator"] = p.generator;
  j["domains"] = json::array();
  for (const auto& d : p.domains) {
    j["domains"].push_back({{"name", d.name}, {"known", d.known_values}, {"unknown", d.unknown_values}});
  }
  j["config"] = {{"kind", ToString(p.config.kind)}};
  if (p.config.explicit_combinations) j["config"]["combinations"] = *p.config.explicit_combinations;
  if (!p.combinations_by_kind.empty()) {
    j["combinations_by_kind"] = json::object();
    for (const auto& [kind, combos] : p.combinations_by_kind) {
      j["combinations_by_kind"][ToString(kind)] = combos;
    }
  }
  j["samples_per_combination"] = p.samples_per_combination;
  j["test_samples_per_tuple"] = p.test_samples_per_tuple;
  j["image_size"] = p.image_size;
  j["test_balance"] = p.test_balance == TestBalance::kStrict ? "strict" : "equal_group_totals";
  if (!p.colors.empty()) {
    j["colors"] = json::object();
    for (const auto& [v, c] : p.colors) j["colors"][v] = {c.r, c.g, c.b};
  }
  return j;
}

Preset PresetFromJson(const json& j) {
  try {
    Preset p;
    p.name = j.value("name", std::string("custom"));
    p.generator = j.value("generator", std::string("color-mnist"));
    for (const auto& d : j.at("domains")) {
      p.domains.push_back({d.at("name").get<std::string>(),
                           d.at("known").get<std::vector<Value>>(),
                           d.at("unknown").get<std::vector<Value>>()});
    }
    if (j.contains("config")) {
      const auto& c = j.at("config");
      p.config.kind = ParseCorrelationKind(c.value("kind", std::string("uncorrelated")));
      if (c.contains("combinations")) {
        p.config.explicit_combinations = c.at("combinations").get<std::vector<Combination>>();
      }
    }
    if (j.contains("combinations_by_kind")) {
      for (const auto& [kind, combos] : j.at("combinations_by_kind").items()) {
        p.combinations_by_kind[ParseCorrelationKind(kind)] =
            combos.get<std::vector<Combination>>();
      }
    }
    p.samples_per_combination = j.value("samples_per_combination", 1000);
    p.test_samples_per_tuple = j.value("test_samples_per_tuple", 100);
    p.image_size = j.value("image_size", 32);
    const std::string balance = j.value("test_balance", std::string("strict"));
    if (balance == "strict") {
      p.test_balance = TestBalance::kStrict;
    } else if (balance == "equal_group_totals") {
      p.test_balance = TestBalance::kEqualGroupTotals;
    } else {
      throw Error(ErrorKind::kConfiguration, "unknown test_balance '" + balance + "'");
    }
    if (j.contains("colors")) {
      for (const auto& [v, rgb] : j.at("colors").items()) {
        const auto c = rgb.get<std::vector<int>>();
        if (c.size() != 3) throw Error(ErrorKind::kConfiguration, "color '" + v + "' needs 3 channels");
        for (int ch : c) {
          if (ch < 0 || ch > 255) {
            throw Error(ErrorKind::kConfiguration, "color '" + v + "' channel out of range");
          }
        }
        p.colors[v] = Rgb{static_cast<uint8_t>(c[0]), static_cast<uint8_t>(c[1]),
                          static_cast<uint8_t>(c[2])};
      }
    }
    p.Validate();
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfiguration, std::string("malformed preset JSON: ") + e.what());
  }
}

namespace {

constexpr const char* kColorMnist = R"json({
  "name": "color-mnist",
  "generator": "color-mnist",
  "domains": [
    {"name": "digit", "known": ["0", "1", "2", "3", "4"], "unknown": ["5", "6", "7", "8", "9"]},
    {"name": "color", "known": ["red", "yellow", "green", "cyan", "blue"],
     "unknown": ["magenta", "orange", "violet", "azure", "rose"]}
  ],
  "config": {"kind": "correlated"},
  "combinations_by_kind": {
    "semi_correlated": [["0", "red"], ["0", "yellow"], ["1", "yellow"], ["1", "green"],
                        ["2", "green"], ["2", "cyan"], ["3", "cyan"], ["3", "blue"],
                        ["4", "blue"], ["4", "yellow"]]
  },
  "samples_per_combination": 700,
  "test_samples_per_tuple": 100,
  "image_size": 32,
  "colors": {
    "red": [255, 0, 0], "yellow": [255, 255, 0], "green": [0, 255, 0], "cyan": [0, 255, 255],
    "blue": [0, 0, 255], "magenta": [255, 0, 255], "orange": [255, 128, 0],
    "violet": [128, 0, 255], "azure": [0, 128, 255], "rose": [255, 0, 128]
  }
})json";

constexpr const char* kColorObject = R"json({
  "name": "color-object",
  "generator": "composite",
  "domains": [
    {"name": "object", "known": ["boat", "airplane", "truck", "dog", "zebra", "horse"],
     "unknown": ["bird", "motorcycle", "elephant", "bear", "bed", "giraffe"]},
    {"name": "color", "known": ["C1", "C2", "C3", "C4", "C5", "C6"],
     "unknown": ["C7", "C8", "C9", "C10", "C11", "C12"]}
  ],
  "config": {"kind": "correlated"},
  "samples_per_combination": 1000,
  "test_samples_per_tuple": 100,
  "image_size": 64,
  "colors": {
    "C1": [0, 100, 0], "C2": [188, 143, 143], "C3": [255, 0, 0], "C4": [255, 215, 0],
    "C5": [0, 255, 0], "C6": [65, 105, 225], "C7": [255, 20, 147], "C8": [135, 188, 191],
    "C9": [27, 145, 68], "C10": [48, 101, 53], "C11": [20, 235, 154], "C12": [187, 33, 227]
  }
})json";

constexpr const char* kSceneObject = R"json({
  "name": "scene-object",
  "generator": "composite",
  "domains": [
    {"name": "object", "known": ["boat", "airplane", "truck", "dog", "zebra", "horse"],
     "unknown": ["bird", "motorcycle", "elephant", "bear", "bed", "giraffe"]},
    {"name": "scene", "known": ["beach", "canyon", "building", "stair", "desert", "crevasse"],
     "unknown": ["ball_pit", "oast_house", "kasbah", "lighthouse", "pagoda", "rock_arch"]}
  ],
  "config": {"kind": "correlated"},
  "samples_per_combination": 1000,
  "test_samples_per_tuple": 100,
  "image_size": 64
})json";

constexpr const char* kUtZappos = R"json({
  "name": "ut-zappos",
  "generator": "external",
  "domains": [
    {"name": "material",
     "known": ["Faux.Leather", "Full.grain.leather", "Leather", "Rubber", "Suede"],
     "unknown": ["Canvas", "Nubuck", "Patent.Leather", "Satin", "Synthetic"]},
    {"name": "type",
     "known": ["Boots.Knee.High", "Boots.Mid-Calf", "Shoes.Flats", "Shoes.Heels", "Shoes.Loafers"],
     "unknown": ["Boots.Ankle", "Sandals", "Shoes.Oxfords", "Shoes.Sneakers.and.Athletic.Shoes"]}
  ],
  "config": {"kind": "explicit", "combinations": [
    ["Faux.Leather", "Boots.Knee.High"], ["Faux.Leather", "Boots.Mid-Calf"],
    ["Faux.Leather", "Shoes.Flats"], ["Full.grain.leather", "Boots.Mid-Calf"],
    ["Full.grain.leather", "Shoes.Loafers"], ["Leather", "Shoes.Flats"],
    ["Leather", "Shoes.Heels"], ["Leather", "Shoes.Loafers"], ["Rubber", "Boots.Knee.High"],
    ["Rubber", "Boots.Mid-Calf"], ["Suede", "Boots.Knee.High"], ["Suede", "Shoes.Flats"],
    ["Suede", "Shoes.Heels"]]},
  "samples_per_combination": 1000,
  "test_samples_per_tuple": 100,
  "image_size": 64,
  "test_balance": "equal_group_totals"
})json";

}  // namespace

std::vector<std::string> BuiltinPresetNames() {
  return {"color-mnist", "color-object", "scene-object", "ut-zappos"};
}

Preset BuiltinPreset(const std::string& name) {
  const char* text = nullptr;
  if (name == "color-mnist") text = kColorMnist;
  if (name == "color-object") text = kColorObject;
  if (name == "scene-object") text = kSceneObject;
  if (name == "ut-zappos") text = kUtZappos;
  if (!text) throw Error(ErrorKind::kConfiguration, "no built-in preset '" + name + "'");
  return PresetFromJson(json::parse(text));
}

Preset LoadPreset(const std::string& name_or_path) {
  const auto names = BuiltinPresetNames();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
    return BuiltinPreset(name_or_path);
  }
  if (!std::filesystem::exists(name_or_path)) {
    throw Error(ErrorKind::kConfiguration,
                "'" + name_or_path + "' is neither a built-in preset nor a file");
  }
  try {
    return PresetFromJson(json::parse(ReadFile(name_or_path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kConfiguration, name_or_path + ": " + e.what());
  }
}

SplitPlan MakeSplitPlan(const Preset& preset, std::optional<CorrelationKind> kind,
                        int64_t rotation_seed) {
  SplitPlan plan;
  plan.domains = preset.domains;
  plan.rotation_seed = rotation_seed;
  plan.samples_per_combination = preset.samples_per_combination;
  plan.test_samples_per_tuple = preset.test_samples_per_tuple;
  plan.config.kind = kind.value_or(preset.config.kind);

  const auto table = preset.combinations_by_kind.find(plan.config.kind);
  if (plan.config.kind == CorrelationKind::kExplicit) {
    if (preset.config.explicit_combinations) {
      plan.config.explicit_combinations = preset.config.explicit_combinations;
    } else if (table != preset.combinations_by_kind.end()) {
      plan.config.explicit_combinations = table->second;
    }
    plan.train_combinations = BuildCombinations(plan.domains, plan.config, rotation_seed);
  } else if (table != preset.combinations_by_kind.end() && rotation_seed == 0) {
    plan.train_combinations =
        BuildCombinations(plan.domains, {CorrelationKind::kExplicit, table->second});
  } else {
    plan.train_combinations = BuildCombinations(plan.domains, plan.config, rotation_seed);
  }
  plan.test_balance = preset.test_balance;
  plan.test_groups = BuildTestGroups(plan.domains, preset.test_balance);
  return plan;
}

json ToJson(const SplitPlan& plan) {
  json j;
  j["domains"] = json::array();
  for (const auto& d : plan.domains) {
    j["domains"].push_back({{"name", d.name}, {"known", d.known_values}, {"unknown", d.unknown_values}});
  }
  j["kind"] = ToString(plan.config.kind);
  j["rotation_seed"] = plan.rotation_seed;
  j["train_combinations"] = plan.train_combinations;
  j["samples_per_combination"] = plan.samples_per_combination;
  j["test_samples_per_tuple"] = plan.test_samples_per_tuple;
  j["val_fraction"] = plan.val_fraction;
  j["test_balance"] = plan.test_balance == TestBalance::kStrict ? "strict" : "equal_group_totals";
  return j;
}

SplitPlan SplitPlanFromJson(const json& j) {
  try {
    SplitPlan plan;
    for (const auto& d : j.at("domains")) {
      plan.domains.push_back({d.at("name").get<std::string>(),
                              d.at("known").get<std::vector<Value>>(),
                              d.at("unknown").get<std::vector<Value>>()});
    }
    plan.config.kind = ParseCorrelationKind(j.at("kind").get<std::string>());
    plan.rotation_seed = j.value("rotation_seed", int64_t{0});
    plan.train_combinations = ValidateExplicit(
        plan.domains, j.at("train_combinations").get<std::vector<Combination>>());
    if (plan.config.kind == CorrelationKind::kExplicit) {
      plan.config.explicit_combinations = plan.train_combinations;
    }
    plan.samples_per_combination = j.at("samples_per_combination").get<int>();
    plan.test_samples_per_tuple = j.at("test_samples_per_tuple").get<int>();
    plan.val_fraction = j.value("val_fraction", 0.1);
    plan.test_balance = j.value("test_balance", std::string("strict")) == "strict"
                            ? TestBalance::kStrict
                            : TestBalance::kEqualGroupTotals;
    plan.test_groups = BuildTestGroups(plan.domains, plan.test_balance);
    return plan;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIo, std::string("malformed split plan: ") + e.what());
  }
}

}  // namespace mosr
