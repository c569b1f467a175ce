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


#include "mosr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mosr/error.hpp"

namespace mosr {
namespace {

using nlohmann::json;

void RequireAttribute(const PredictionDump& dump, int attribute) {
  if (attribute < 0 || attribute >= dump.num_attributes()) {
    throw Error(ErrorKind::kMetric, "attribute index " + std::to_string(attribute) + " out of range");
  }
}

bool KnownAt(const PredictionDump& dump, const PredictionRecord& r, int m) {
  const auto& label = r.attributes[m].true_label;
  if (dump.domains[m].IsKnown(label)) return true;
  if (dump.domains[m].IsUnknown(label)) return false;
  throw Error(ErrorKind::kUnknownLabel, r.sample_id + ": '" + label + "' is not a value of '" +
                                            dump.domains[m].name + "'");
}

// Contribution of one decision to (TP, FP, FN).
struct Counts {
  int64_t tp = 0, fp = 0, fn = 0;
  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  Counts& operator-=(const Counts& o) {
    tp -= o.tp;
    fp -= o.fp;
    fn -= o.fn;
    return *this;
  }
};

Counts Decide(bool truth_known, bool reject, bool pred_correct, MicroFMode mode) {
  Counts c;
  if (reject) {
    if (truth_known) {
      c.fn = 1;
      if (mode == MicroFMode::kAllClasses) c.fp = 1;
    } else if (mode == MicroFMode::kAllClasses) {
      c.tp = 1;
    }
  } else if (truth_known) {
    if (pred_correct) {
      c.tp = 1;
    } else {
      c.fp = 1;
      c.fn = 1;
    }
  } else {
    c.fp = 1;
    if (mode == MicroFMode::kAllClasses) c.fn = 1;
  }
  return c;
}

double F1(const Counts& c) {
  const int64_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

// F1(a) >= F1(b), compared as exact fractions 2tp / (2tp + fp + fn).
bool NotWorse(const Counts& a, const Counts& b) {
  const int64_t da = std::max<int64_t>(1, 2 * a.tp + a.fp + a.fn);
  const int64_t db = std::max<int64_t>(1, 2 * b.tp + b.fp + b.fn);
  return static_cast<__int128>(2 * a.tp) * db >= static_cast<__int128>(2 * b.tp) * da;
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

json MatrixJson(const std::vector<std::vector<double>>& m) { return m; }

}  // namespace

double Auroc(const std::vector<double>& known, const std::vector<double>& unknown) {
  if (known.empty() || unknown.empty()) throw Error(ErrorKind::kMetric, "AUROC needs known and unknown scores");
  std::vector<double> sorted = unknown;
  std::sort(sorted.begin(), sorted.end());
  double wins = 0.0;
  for (double k : known) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), k);
    const auto hi = std::upper_bound(lo, sorted.end(), k);
    wins += static_cast<double>(lo - sorted.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(known.size()) * static_cast<double>(unknown.size()));
}

double Oscr(const std::vector<KnownScore>& known, const std::vector<double>& unknown) {
  if (known.empty() || unknown.empty()) throw Error(ErrorKind::kMetric, "OSCR needs known and unknown scores");
  // (score, is_unknown, correct) swept from the highest threshold down.
  struct Item {
    double score;
    bool unknown;
    bool correct;
  };
  std::vector<Item> items;
  items.reserve(known.size() + unknown.size());
  for (const auto& k : known) items.push_back({k.confidence, false, k.correct});
  for (double u : unknown) items.push_back({u, true, false});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score > b.score; });

  const double nk = static_cast<double>(known.size()), nu = static_cast<double>(unknown.size());
  double area = 0.0;
  size_t ccr = 0, fp = 0;
  for (size_t i = 0; i < items.size();) {
    const size_t fp_before = fp;
    size_t j = i;
    for (; j < items.size() && items[j].score == items[i].score; ++j) {
      if (items[j].unknown) {
        ++fp;
      } else if (items[j].correct) {
        ++ccr;
      }
    }
    area += static_cast<double>(fp - fp_before) / nu * (static_cast<double>(ccr) / nk);
    i = j;
  }
  return area;
}

std::vector<double> KnownScores(const PredictionDump& dump, int m) {
  RequireAttribute(dump, m);
  std::vector<double> out;
  for (const auto& r : dump.records) {
    if (KnownAt(dump, r, m)) out.push_back(r.attributes[m].confidence);
  }
  return out;
}

std::vector<KnownScore> KnownRecords(const PredictionDump& dump, int m) {
  RequireAttribute(dump, m);
  std::vector<KnownScore> out;
  for (const auto& r : dump.records) {
    if (KnownAt(dump, r, m)) {
      const auto& a = r.attributes[m];
      out.push_back({a.confidence, a.predicted_label == a.true_label});
    }
  }
  return out;
}

std::vector<double> UnknownScores(const PredictionDump& dump, int m) {
  RequireAttribute(dump, m);
  std::vector<double> out;
  for (const auto& r : dump.records) {
    if (!KnownAt(dump, r, m)) out.push_back(r.attributes[m].confidence);
  }
  return out;
}

ConfidenceMatrix ComputeConfidenceMatrix(const PredictionDump& dump, bool include_unseen_known) {
  const int m = dump.num_attributes();
  ConfidenceMatrix cm;
  cm.values.assign(m, std::vector<double>(m + 1, 0.0));
  cm.counts.assign(m + 1, 0);
  for (const auto& r : dump.records) {
    int column;
    switch (r.group.kind()) {
      case GroupTag::Kind::kKnownSeen: column = 0; break;
      case GroupTag::Kind::kKnownUnseenCombo:
        if (!include_unseen_known) continue;
        column = 0;
        break;
      case GroupTag::Kind::kOodAttr: column = r.group.attribute() + 1; break;
      default: continue;
    }
    ++cm.counts[column];
    for (int i = 0; i < m; ++i) cm.values[i][column] += r.attributes[i].confidence;
  }
  for (int j = 0; j <= m; ++j) {
    if (cm.counts[j] == 0) {
      throw Error(ErrorKind::kMetric, "confidence matrix column " +
                                          std::string(j == 0 ? "Known" : "OOD_" + std::to_string(j)) +
                                          " has no samples");
    }
    for (int i = 0; i < m; ++i) cm.values[i][j] /= static_cast<double>(cm.counts[j]);
  }
  return cm;
}

double MicroF1(const PredictionDump& dump, int m, double threshold, MicroFMode mode) {
  RequireAttribute(dump, m);
  Counts total;
  for (const auto& r : dump.records) {
    const auto& a = r.attributes[m];
    total += Decide(KnownAt(dump, r, m), a.confidence < threshold, a.predicted_label == a.true_label, mode);
  }
  return F1(total);
}

ThresholdSelection SelectThresholds(const PredictionDump& dump, MicroFMode mode) {
  ThresholdSelection sel;
  if (dump.records.empty()) throw Error(ErrorKind::kMetric, "threshold selection on an empty dump");
  for (int m = 0; m < dump.num_attributes(); ++m) {
    struct Item {
      double conf;
      Counts keep, reject;
    };
    std::vector<Item> items;
    bool any_unknown = false;
    for (const auto& r : dump.records) {
      const auto& a = r.attributes[m];
      const bool known = KnownAt(dump, r, m);
      any_unknown |= !known;
      const bool correct = a.predicted_label == a.true_label;
      items.push_back({a.confidence, Decide(known, false, correct, mode), Decide(known, true, correct, mode)});
    }
    std::sort(items.begin(), items.end(), [](const Item& x, const Item& y) { return x.conf < y.conf; });
    const double lowest = items.front().conf - 1.0;
    if (!any_unknown) {
      Counts all;
      for (const auto& it : items) all += it.keep;
      sel.thresholds.push_back(lowest);
      sel.micro_f1.push_back(F1(all));
      sel.flagged.push_back(true);
      continue;
    }
    std::vector<double> candidates{lowest};
    for (size_t i = 1; i < items.size(); ++i) {
      if (items[i].conf != items[i - 1].conf) candidates.push_back(0.5 * (items[i - 1].conf + items[i].conf));
    }
    candidates.push_back(items.back().conf + 1.0);

    Counts current;
    for (const auto& it : items) current += it.keep;
    Counts best = current;
    double best_theta = candidates.front();
    size_t next = 0;
    for (double theta : candidates) {
      while (next < items.size() && items[next].conf < theta) {
        current -= items[next].keep;
        current += items[next].reject;
        ++next;
      }
      if (NotWorse(current, best)) {
        best = current;
        best_theta = theta;
      }
    }
    sel.thresholds.push_back(best_theta);
    sel.micro_f1.push_back(F1(best));
    sel.flagged.push_back(false);
  }
  return sel;
}

ExplainabilityMatrix ComputeExplainabilityMatrix(const PredictionDump& dump, const std::vector<double>& thresholds) {
  const int m = dump.num_attributes();
  if (static_cast<int>(thresholds.size()) != m) throw Error(ErrorKind::kMetric, "one threshold per attribute required");
  const int g = OpenSetGroup::Count(m);
  ExplainabilityMatrix em;
  em.thresholds = thresholds;
  em.values.assign(g, std::vector<double>(g, 0.0));
  em.row_counts.assign(g, 0);
  for (const auto& r : dump.records) {
    std::vector<bool> flags(m);
    for (int a = 0; a < m; ++a) flags[a] = r.attributes[a].confidence < thresholds[a];
    const int row = OpenSetGroup::From(r.group, m).index;
    const int col = OpenSetGroup::FromUnknownFlags(flags).index;
    ++em.row_counts[row];
    em.values[row][col] += 1.0;
  }
  for (int i = 0; i < g; ++i) {
    if (em.row_counts[i] == 0) {
      throw Error(ErrorKind::kMetric, "explainability row " + OpenSetGroup{i}.Label(m) + " has no samples");
    }
    for (double& v : em.values[i]) v *= 100.0 / static_cast<double>(em.row_counts[i]);
  }
  return em;
}

EvalReport Evaluate(const PredictionDump& dump, const std::string& fingerprint, const EvalOptions& options) {
  EvalReport report;
  report.fingerprint = fingerprint;
  report.scorer = dump.scorer;
  for (int m = 0; m < dump.num_attributes(); ++m) {
    report.attribute_names.push_back(dump.domains[m].name);
    report.auroc.push_back(Auroc(KnownScores(dump, m), UnknownScores(dump, m)));
    report.oscr.push_back(Oscr(KnownRecords(dump, m), UnknownScores(dump, m)));
  }
  report.avg_auroc = Mean(report.auroc);
  report.avg_oscr = Mean(report.oscr);
  report.confidence = ComputeConfidenceMatrix(dump, options.include_unseen_known);
  const auto sel = SelectThresholds(options.threshold_dump ? *options.threshold_dump : dump, options.micro_f);
  report.thresholds = sel.thresholds;
  report.threshold_flagged = sel.flagged;
  report.explainability = ComputeExplainabilityMatrix(dump, sel.thresholds);
  return report;
}

EvalReport AggregateSeeds(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw Error(ErrorKind::kAggregation, "no reports to aggregate");
  const EvalReport& first = reports.front();
  for (const auto& r : reports) {
    if (r.fingerprint != first.fingerprint) {
      throw Error(ErrorKind::kAggregation, "fingerprint mismatch: '" + r.fingerprint + "' vs '" +
                                               first.fingerprint + "'");
    }
    if (r.auroc.size() != first.auroc.size() || r.explainability.has_value() != first.explainability.has_value()) {
      throw Error(ErrorKind::kAggregation, "reports have different shapes");
    }
  }
  const double n = static_cast<double>(reports.size());
  EvalReport out = first;
  out.seeds.clear();
  out.per_seed.clear();
  const auto mean_vec = [&](auto field) {
    std::vector<double> acc((first.*field).size(), 0.0);
    for (const auto& r : reports) {
      for (size_t i = 0; i < acc.size(); ++i) acc[i] += (r.*field)[i];
    }
    for (double& v : acc) v /= n;
    return acc;
  };
  const auto mean_mat = [&](auto get) {
    auto acc = get(first);
    for (auto& row : acc) std::fill(row.begin(), row.end(), 0.0);
    for (const auto& r : reports) {
      const auto& mat = get(r);
      for (size_t i = 0; i < acc.size(); ++i) {
        for (size_t j = 0; j < acc[i].size(); ++j) acc[i][j] += mat[i][j];
      }
    }
    for (auto& row : acc) {
      for (double& v : row) v /= n;
    }
    return acc;
  };
  out.auroc = mean_vec(&EvalReport::auroc);
  out.oscr = mean_vec(&EvalReport::oscr);
  out.thresholds = mean_vec(&EvalReport::thresholds);
  out.avg_auroc = Mean(out.auroc);
  out.avg_oscr = Mean(out.oscr);
  out.confidence.values = mean_mat([](const EvalReport& r) { return r.confidence.values; });
  if (out.explainability) {
    out.explainability->values = mean_mat([](const EvalReport& r) { return r.explainability->values; });
    out.explainability->thresholds = out.thresholds;
  }
  for (const auto& r : reports) {
    out.seeds.insert(out.seeds.end(), r.seeds.begin(), r.seeds.end());
    json snapshot = ToJson(r);
    snapshot.erase("per_seed");
    out.per_seed.push_back(snapshot);
  }
  return out;
}

json ToJson(const EvalReport& r) {
  json j;
  j["fingerprint"] = r.fingerprint;
  j["scorer"] = r.scorer;
  j["attributes"] = r.attribute_names;
  j["auroc"] = r.auroc;
  j["oscr"] = r.oscr;
  j["avg_auroc"] = r.avg_auroc;
  j["avg_oscr"] = r.avg_oscr;
  j["confidence_matrix"] = {{"values", MatrixJson(r.confidence.values)}, {"counts", r.confidence.counts}};
  if (r.explainability) {
    j["explainability_matrix"] = {{"values", MatrixJson(r.explainability->values)},
                                  {"row_counts", r.explainability->row_counts},
                                  {"thresholds", r.explainability->thresholds}};
  }
  j["thresholds"] = r.thresholds;
  j["threshold_flagged"] = r.threshold_flagged;
  j["seeds"] = r.seeds;
  j["per_seed"] = r.per_seed;
  j["meta"] = r.meta;
  return j;
}

EvalReport EvalReportFromJson(const json& j) {
  try {
    EvalReport r;
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.scorer = j.at("scorer").get<std::string>();
    r.attribute_names = j.at("attributes").get<std::vector<std::string>>();
    r.auroc = j.at("auroc").get<std::vector<double>>();
    r.oscr = j.at("oscr").get<std::vector<double>>();
    r.avg_auroc = j.at("avg_auroc").get<double>();
    r.avg_oscr = j.at("avg_oscr").get<double>();
    r.confidence.values = j.at("confidence_matrix").at("values").get<std::vector<std::vector<double>>>();
    r.confidence.counts = j.at("confidence_matrix").at("counts").get<std::vector<size_t>>();
    if (j.contains("explainability_matrix")) {
      const auto& e = j.at("explainability_matrix");
      ExplainabilityMatrix em;
      em.values = e.at("values").get<std::vector<std::vector<double>>>();
      em.row_counts = e.at("row_counts").get<std::vector<size_t>>();
      em.thresholds = e.at("thresholds").get<std::vector<double>>();
      r.explainability = em;
    }
    r.thresholds = j.value("thresholds", std::vector<double>{});
    r.threshold_flagged = j.value("threshold_flagged", std::vector<bool>{});
    r.seeds = j.value("seeds", std::vector<int64_t>{});
    if (j.contains("per_seed")) r.per_seed = j.at("per_seed").get<std::vector<json>>();
    r.meta = j.value("meta", json::object());
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIo, std::string("malformed report: ") + e.what());
  }
}

}  // namespace mosr
