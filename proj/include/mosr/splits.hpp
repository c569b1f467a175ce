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

#ifndef MOSR_SPLITS_HPP_
#define MOSR_SPLITS_HPP_

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace mosr {

using Value = std::string;
// One value per attribute, in domain order.
using Combination = std::vector<Value>;

struct AttributeDomain {
  std::string name;
  std::vector<Value> known_values;
  std::vector<Value> unknown_values;

  // Throws kValidation naming the attribute on empty lists, duplicates or
  // overlap between the known and unknown sets.
  void Validate() const;

  bool IsKnown(const Value& v) const;
  bool IsUnknown(const Value& v) const;
  // Position in known_values, or -1.
  int KnownIndex(const Value& v) const;
};

enum class CorrelationKind { kUncorrelated, kSemiCorrelated, kCorrelated, kExplicit };

std::string ToString(CorrelationKind kind);
// Accepts the long names ("semi_correlated") and the short flags (uc/sc/c).
CorrelationKind ParseCorrelationKind(const std::string& s);
// "uc", "sc", "c", "explicit".
std::string ShortName(CorrelationKind kind);

struct CorrelationConfig {
  CorrelationKind kind = CorrelationKind::kUncorrelated;
  std::optional<std::vector<Combination>> explicit_combinations;
};

// Ground-truth category of a sample with respect to the training label set.
class GroupTag {
 public:
  enum class Kind { kKnownSeen, kKnownUnseenCombo, kOodAttr, kOodAll };

  static GroupTag KnownSeen() { return GroupTag(Kind::kKnownSeen, -1); }
  static GroupTag KnownUnseenCombo() { return GroupTag(Kind::kKnownUnseenCombo, -1); }
  // `attribute` is 0-based.
  static GroupTag OodAttr(int attribute) { return GroupTag(Kind::kOodAttr, attribute); }
  static GroupTag OodAll() { return GroupTag(Kind::kOodAll, -1); }

  Kind kind() const { return kind_; }
  int attribute() const { return attribute_; }
  bool is_known() const {
    return kind_ == Kind::kKnownSeen || kind_ == Kind::kKnownUnseenCombo;
  }

  // known_seen, known_unseen, ood_attr_<m> (1-based), ood_all.
  std::string ToString() const;
  static GroupTag Parse(const std::string& s);

  auto operator<=>(const GroupTag&) const = default;

 private:
  GroupTag(Kind kind, int attribute) : kind_(kind), attribute_(attribute) {}
  Kind kind_;
  int attribute_;
};

// GroupTag with seen and unseen known combinations pooled; this is the row
// and column index of the explainability matrix. Index order is
// Known, OodAttr(1..M), OodAll.
struct OpenSetGroup {
  int index = 0;

  static OpenSetGroup Known() { return {0}; }
  static OpenSetGroup OodAttr(int attribute) { return {attribute + 1}; }
  static OpenSetGroup OodAll(int num_attributes) { return {num_attributes + 1}; }
  static OpenSetGroup From(const GroupTag& tag, int num_attributes);
  // From per-attribute unknown flags: none -> Known, exactly one -> OodAttr,
  // two or more -> OodAll.
  static OpenSetGroup FromUnknownFlags(const std::vector<bool>& unknown);
  static int Count(int num_attributes) { return num_attributes + 2; }

  std::string Label(int num_attributes) const;
  auto operator<=>(const OpenSetGroup&) const = default;
};

struct TestGroups {
  std::map<OpenSetGroup, std::vector<Combination>> tuples;
  // Samples drawn per tuple are base_count * multiplicity[group].
  std::map<OpenSetGroup, int> multiplicity;

  // Fraction of pooled test samples whose value at `attribute` is unknown.
  double UnknownRate(const std::vector<AttributeDomain>& domains, int attribute) const;
  size_t TotalWeight() const;
};

enum class TestBalance {
  // Requires |unknown| == |known| for every attribute (errors otherwise);
  // one sample draw per tuple.
  kStrict,
  // Accepts unbalanced M = 2 domains and equalizes per-group totals through
  // per-tuple multiplicities, which keeps the 50% unknown rate.
  kEqualGroupTotals,
};

std::vector<Combination> BuildCombinations(const std::vector<AttributeDomain>& domains,
                                           const CorrelationConfig& config,
                                           int64_t rotation_seed = 0);

// Violations of the invariants of `kind` (empty when the set is valid).
std::vector<std::string> CheckCombinationInvariants(
    const std::vector<AttributeDomain>& domains, CorrelationKind kind,
    const std::vector<Combination>& combinations);

TestGroups BuildTestGroups(const std::vector<AttributeDomain>& domains,
                           TestBalance balance = TestBalance::kStrict);

GroupTag AssignGroup(const Combination& labels, const std::vector<AttributeDomain>& domains,
                     const std::set<Combination>& train_combinations);

struct Rgb {
  uint8_t r = 0, g = 0, b = 0;
  auto operator<=>(const Rgb&) const = default;
};

struct SplitPlan {
  std::vector<AttributeDomain> domains;
  CorrelationConfig config;
  int64_t rotation_seed = 0;
  std::vector<Combination> train_combinations;
  TestGroups test_groups;
  int samples_per_combination = 1000;
  int test_samples_per_tuple = 100;
  double val_fraction = 0.1;
  TestBalance test_balance = TestBalance::kStrict;

  std::set<Combination> TrainSet() const {
    return {train_combinations.begin(), train_combinations.end()};
  }
  int num_attributes() const { return static_cast<int>(domains.size()); }
};

// A named dataset definition: domains, the default configuration, verbatim
// combination tables for kinds the rules do not reproduce, and generator
// parameters.
struct Preset {
  std::string name;
  std::string generator;  // "color-mnist", "composite" or "external"
  std::vector<AttributeDomain> domains;
  CorrelationConfig config;
  std::map<CorrelationKind, std::vector<Combination>> combinations_by_kind;
  int samples_per_combination = 1000;
  int test_samples_per_tuple = 100;
  int image_size = 32;
  TestBalance test_balance = TestBalance::kStrict;
  std::map<Value, Rgb> colors;

  void Validate() const;
};

nlohmann::json ToJson(const SplitPlan& plan);
// Restores the stored combinations verbatim and rebuilds the test groups.
SplitPlan SplitPlanFromJson(const nlohmann::json& j);

nlohmann::json ToJson(const Preset& preset);
Preset PresetFromJson(const nlohmann::json& j);

// "color-mnist", "color-object", "scene-object", "ut-zappos".
std::vector<std::string> BuiltinPresetNames();
Preset BuiltinPreset(const std::string& name);
// A built-in name or a path to a preset JSON file.
Preset LoadPreset(const std::string& name_or_path);

// Resolves the combination set for `kind`: a verbatim table registered for
// that kind wins, otherwise the construction rule applies.
SplitPlan MakeSplitPlan(const Preset& preset, std::optional<CorrelationKind> kind,
                        int64_t rotation_seed = 0);

}  // namespace mosr

#endif  // MOSR_SPLITS_HPP_
