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


#include "mosr/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "mosr/error.hpp"
#include "mosr/util.hpp"

namespace mosr {
namespace {

using nlohmann::json;

void CheckLogits(const Logits& logits) {
  if (logits.empty()) throw Error(ErrorKind::kScoring, "empty logit vector");
  for (double v : logits) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kScoring, "non-finite logit");
  }
}

double Distance(const Logits& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::filesystem::path SidecarPath(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  return p.replace_extension(".json");
}

}  // namespace

int ArgMax(const Logits& logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double MspScore(const Logits& logits) {
  CheckLogits(logits);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  return 1.0 / sum;
}

double MlsScore(const Logits& logits) {
  CheckLogits(logits);
  return *std::max_element(logits.begin(), logits.end());
}

OpenMaxModel OpenMaxFit(const std::vector<Logits>& activations, const std::vector<int>& labels,
                        int num_classes, const OpenMaxParams& params) {
  if (activations.size() != labels.size()) {
    throw Error(ErrorKind::kFit, "activation and label counts differ");
  }
  if (num_classes < 1) throw Error(ErrorKind::kFit, "no classes to fit");
  if (params.tail_size < 2) throw Error(ErrorKind::kFit, "tail_size must be at least 2");
  if (params.alpha < 1) throw Error(ErrorKind::kFit, "alpha must be at least 1");

  std::vector<std::vector<const Logits*>> by_class(num_classes);
  for (size_t i = 0; i < activations.size(); ++i) {
    const Logits& a = activations[i];
    CheckLogits(a);
    if (static_cast<int>(a.size()) != num_classes) throw Error(ErrorKind::kFit, "activation length mismatch");
    if (labels[i] < 0 || labels[i] >= num_classes) throw Error(ErrorKind::kFit, "label out of range");
    if (params.correct_only && ArgMax(a) != labels[i]) continue;
    by_class[labels[i]].push_back(&a);
  }

  OpenMaxModel model;
  model.tail_size = params.tail_size;
  model.alpha = std::min(params.alpha, num_classes);
  for (int c = 0; c < num_classes; ++c) {
    const auto& members = by_class[c];
    if (members.size() < static_cast<size_t>(params.tail_size)) {
      throw Error(ErrorKind::kFit, "class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                                       (params.correct_only ? " correctly classified" : "") +
                                       " samples, fewer than tail_size " + std::to_string(params.tail_size));
    }
    OpenMaxClass cls;
    cls.mean.assign(num_classes, 0.0);
    for (const Logits* a : members) {
      for (int k = 0; k < num_classes; ++k) cls.mean[k] += (*a)[k];
    }
    for (double& v : cls.mean) v /= static_cast<double>(members.size());
    std::vector<double> distances;
    for (const Logits* a : members) distances.push_back(Distance(*a, cls.mean));
    try {
      cls.weibull = FitWeibullTail(distances, params.tail_size);
    } catch (const Error& e) {
      throw Error(ErrorKind::kFit, "class " + std::to_string(c) + ": " + e.what());
    }
    model.classes.push_back(std::move(cls));
  }
  return model;
}

OpenMaxOutput OpenMaxScore(const OpenMaxModel& model, const Logits& logits) {
  CheckLogits(logits);
  const int k = static_cast<int>(model.classes.size());
  if (k == 0) throw Error(ErrorKind::kScoring, "OpenMax model is not fitted");
  if (static_cast<int>(logits.size()) != k) throw Error(ErrorKind::kScoring, "logit length mismatch");

  std::vector<int> ranked(k);
  for (int i = 0; i < k; ++i) ranked[i] = i;
  std::stable_sort(ranked.begin(), ranked.end(), [&](int a, int b) { return logits[a] > logits[b]; });

  std::vector<double> revised = logits;
  double unknown = 0.0;
  for (int r = 0; r < model.alpha; ++r) {
    const int c = ranked[r];
    const double weight = static_cast<double>(model.alpha - r) / model.alpha;
    const double cdf = model.classes[c].weibull.Cdf(Distance(logits, model.classes[c].mean));
    const double keep = 1.0 - weight * cdf;
    unknown += logits[c] * (1.0 - keep);
    revised[c] = logits[c] * keep;
  }
  revised.push_back(unknown);

  const double mx = *std::max_element(revised.begin(), revised.end());
  double sum = 0.0;
  OpenMaxOutput out;
  out.probabilities.resize(revised.size());
  for (size_t i = 0; i < revised.size(); ++i) sum += (out.probabilities[i] = std::exp(revised[i] - mx));
  for (double& p : out.probabilities) p /= sum;
  out.predicted = ArgMax(logits);
  out.confidence = out.probabilities[out.predicted];
  return out;
}

json ToJson(const OpenMaxModel& model) {
  json classes = json::array();
  for (const auto& c : model.classes) {
    classes.push_back({{"mean", c.mean},
                       {"shape", c.weibull.shape},
                       {"scale", c.weibull.scale},
                       {"shift", c.weibull.shift}});
  }
  return {{"tail_size", model.tail_size}, {"alpha", model.alpha}, {"classes", classes}};
}

OpenMaxModel OpenMaxModelFromJson(const json& j) {
  OpenMaxModel m;
  m.tail_size = j.at("tail_size").get<int>();
  m.alpha = j.at("alpha").get<int>();
  for (const auto& c : j.at("classes")) {
    OpenMaxClass cls;
    cls.mean = c.at("mean").get<std::vector<double>>();
    cls.weibull = {c.at("shape").get<double>(), c.at("scale").get<double>(), c.at("shift").get<double>()};
    m.classes.push_back(std::move(cls));
  }
  return m;
}

std::string ToString(Baseline b) {
  switch (b) {
    case Baseline::kMsp: return "msp";
    case Baseline::kMls: return "mls";
    case Baseline::kOpenMax: return "openmax";
  }
  return "?";
}

Baseline ParseBaseline(const std::string& s) {
  if (s == "msp") return Baseline::kMsp;
  if (s == "mls") return Baseline::kMls;
  if (s == "openmax") return Baseline::kOpenMax;
  throw Error(ErrorKind::kConfiguration, "unknown baseline '" + s + "' (msp, mls, openmax)");
}

void WriteDump(const std::filesystem::path& csv_path, const PredictionDump& dump) {
  const int m = dump.num_attributes();
  CsvTable t;
  t.header = {"sample_id", "group"};
  for (int a = 1; a <= m; ++a) {
    const std::string p = "attr_" + std::to_string(a);
    t.header.insert(t.header.end(), {p + "_true", p + "_pred", p + "_conf"});
  }
  for (const auto& r : dump.records) {
    CsvRow row{r.sample_id, r.group.ToString()};
    for (const auto& a : r.attributes) {
      row.insert(row.end(), {a.true_label, a.predicted_label, FormatDouble(a.confidence)});
    }
    t.rows.push_back(std::move(row));
  }
  json domains = json::array();
  for (const auto& d : dump.domains) {
    domains.push_back({{"name", d.name}, {"known", d.known_values}, {"unknown", d.unknown_values}});
  }
  const json sidecar = {{"scorer", dump.scorer}, {"hyperparams", dump.hyperparams}, {"domains", domains}};
  WriteFileAtomic(SidecarPath(csv_path), sidecar.dump(2) + "\n");
  WriteCsv(csv_path, t);
}

PredictionDump ReadDump(const std::filesystem::path& csv_path) {
  PredictionDump dump;
  try {
    const json sidecar = json::parse(ReadFile(SidecarPath(csv_path)));
    dump.scorer = sidecar.at("scorer").get<std::string>();
    dump.hyperparams = sidecar.value("hyperparams", json::object());
    for (const auto& d : sidecar.at("domains")) {
      dump.domains.push_back({d.at("name").get<std::string>(), d.at("known").get<std::vector<Value>>(),
                              d.at("unknown").get<std::vector<Value>>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIo, SidecarPath(csv_path).string() + ": " + e.what());
  }
  const CsvTable t = ReadCsv(csv_path);
  const size_t id = t.Column("sample_id"), group = t.Column("group");
  const int m = dump.num_attributes();
  std::vector<std::array<size_t, 3>> cols;
  for (int a = 1; a <= m; ++a) {
    const std::string p = "attr_" + std::to_string(a);
    cols.push_back({t.Column(p + "_true"), t.Column(p + "_pred"), t.Column(p + "_conf")});
  }
  for (const auto& row : t.rows) {
    PredictionRecord r;
    r.sample_id = row.at(id);
    r.group = GroupTag::Parse(row.at(group));
    for (const auto& c : cols) {
      AttributePrediction a;
      a.true_label = row.at(c[0]);
      a.predicted_label = row.at(c[1]);
      try {
        a.confidence = std::stod(row.at(c[2]));
      } catch (const std::exception&) {
        throw Error(ErrorKind::kIo, csv_path.string() + ": bad confidence for " + r.sample_id);
      }
      r.attributes.push_back(std::move(a));
    }
    dump.records.push_back(std::move(r));
  }
  return dump;
}

}  // namespace mosr
