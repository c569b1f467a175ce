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


#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mosr/error.hpp"
#include "mosr/scoring.hpp"
#include "mosr/util.hpp"
#include "test_support.hpp"

namespace mosr {
namespace {

TEST(ScoreTest, MspExamples) {
  EXPECT_NEAR(MspScore({0.0, 0.0}), 0.5, 1e-15);
  // e^2 / (e^2 + e^1 + e^0.5) = 7.38906 / 11.75593.
  EXPECT_NEAR(MspScore({2.0, 1.0, 0.5}), 0.62853, 5e-5);
  EXPECT_NEAR(MspScore({2.0, 1.0, 0.5}), std::exp(2.0) / (std::exp(2.0) + std::exp(1.0) + std::exp(0.5)), 1e-15);
  EXPECT_NEAR(MspScore({1000.0, 0.0}), 1.0, 1e-12);
  EXPECT_THROW(MspScore({}), Error);
  EXPECT_THROW(MspScore({1.0, std::nan("")}), Error);
  EXPECT_THROW(MlsScore({std::numeric_limits<double>::infinity()}), Error);
}

TEST(ScoreTest, MlsExamplesAndShift) {
  EXPECT_DOUBLE_EQ(MlsScore({0.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(MlsScore({2.0, 1.0, 0.5}), 2.0);
  EXPECT_DOUBLE_EQ(MlsScore({2.0 + 3.0, 1.0 + 3.0, 0.5 + 3.0}), 5.0);
  EXPECT_NEAR(MspScore({5.0, 4.0, 3.5}), MspScore({2.0, 1.0, 0.5}), 1e-15);
}

TEST(ScoreTest, ArgMaxFirstWinsAndShiftInvariant) {
  EXPECT_EQ(ArgMax({1.0, 3.0, 3.0}), 1);
  Rng rng(4);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    Logits l(5);
    for (auto& v : l) v = g(rng);
    Logits s = l;
    for (auto& v : s) v += 7.25;
    EXPECT_EQ(ArgMax(l), ArgMax(s));
  }
}

TEST(ScoreTest, RaisingTheMaxNeverLowersConfidence) {
  Rng rng(5);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    Logits l(4);
    for (auto& v : l) v = g(rng);
    Logits up = l;
    up[ArgMax(l)] += 0.5;
    EXPECT_GE(MspScore(up), MspScore(l));
    EXPECT_GE(MlsScore(up), MlsScore(l));
  }
}

// Two well-separated classes in 2-d logit space.
struct Fixture {
  std::vector<Logits> acts;
  std::vector<int> labels;
};

Fixture TwoClusters(uint64_t seed, int per_class) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 0.5);
  Fixture f;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Logits a = c == 0 ? Logits{4.0 + g(rng), g(rng)} : Logits{g(rng), 4.0 + g(rng)};
      f.acts.push_back(a);
      f.labels.push_back(c);
    }
  }
  return f;
}

TEST(OpenMaxTest, MeansAreClassMeansOfCorrectSamples) {
  Fixture f = TwoClusters(1, 40);
  // A misclassified sample of class 0 must not shift its mean.
  f.acts.push_back({0.0, 9.0});
  f.labels.push_back(0);
  const OpenMaxModel model = OpenMaxFit(f.acts, f.labels, 2, {20, 3, true});
  for (int c = 0; c < 2; ++c) {
    std::vector<double> mean(2, 0.0);
    int n = 0;
    for (size_t i = 0; i < f.acts.size(); ++i) {
      if (f.labels[i] != c || ArgMax(f.acts[i]) != c) continue;
      mean[0] += f.acts[i][0];
      mean[1] += f.acts[i][1];
      ++n;
    }
    EXPECT_NEAR(model.classes[c].mean[0], mean[0] / n, 1e-12);
    EXPECT_NEAR(model.classes[c].mean[1], mean[1] / n, 1e-12);
  }
  EXPECT_EQ(model.alpha, 2);
}

TEST(OpenMaxTest, HandBuiltMeans) {
  std::vector<Logits> acts;
  std::vector<int> labels;
  for (int i = 0; i < 4; ++i) {
    acts.push_back({3.0 + i, 1.0});
    labels.push_back(0);
    acts.push_back({0.0, 2.0 + 2.0 * i});
    labels.push_back(1);
  }
  const OpenMaxModel m = OpenMaxFit(acts, labels, 2, {3, 1, true});
  EXPECT_DOUBLE_EQ(m.classes[0].mean[0], 4.5);
  EXPECT_DOUBLE_EQ(m.classes[0].mean[1], 1.0);
  EXPECT_DOUBLE_EQ(m.classes[1].mean[0], 0.0);
  EXPECT_DOUBLE_EQ(m.classes[1].mean[1], 5.0);
}

TEST(OpenMaxTest, TooFewCorrectSamplesNamesClass) {
  Fixture f = TwoClusters(2, 10);
  try {
    OpenMaxFit(f.acts, f.labels, 2, {20, 3, true});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFit);
    EXPECT_NE(std::string(e.what()).find("class 0"), std::string::npos);
  }
}

TEST(OpenMaxTest, IdenticalActivationsAreRejected) {
  std::vector<Logits> acts(30, Logits{3.0, 1.0});
  std::vector<int> labels(30, 0);
  for (int i = 0; i < 30; ++i) {
    acts.push_back({1.0, 3.0});
    labels.push_back(1);
  }
  try {
    OpenMaxFit(acts, labels, 2, {20, 2, true});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFit);
    EXPECT_NE(std::string(e.what()).find("spread"), std::string::npos);
  }
}

TEST(OpenMaxTest, ZeroDistanceLeavesActivations) {
  const Fixture f = TwoClusters(3, 50);
  const OpenMaxModel m = OpenMaxFit(f.acts, f.labels, 2, {20, 2, true});
  const Logits at_mean = m.classes[0].mean;
  const OpenMaxOutput out = OpenMaxScore(m, at_mean);
  // Class 1's CDF at this point is not zero, so compare against the revision
  // with class 0 untouched.
  ASSERT_EQ(out.probabilities.size(), 3u);
  EXPECT_NEAR(std::accumulate(out.probabilities.begin(), out.probabilities.end(), 0.0), 1.0, 1e-12);
  const double d1 = std::hypot(at_mean[0] - m.classes[1].mean[0], at_mean[1] - m.classes[1].mean[1]);
  const double cdf1 = m.classes[1].weibull.Cdf(d1);
  const double w1 = 0.5;  // rank 2 of alpha 2
  const std::vector<double> revised = {at_mean[0], at_mean[1] * (1 - w1 * cdf1), at_mean[1] * w1 * cdf1};
  double z = 0.0;
  for (double v : revised) z += std::exp(v);
  EXPECT_NEAR(out.probabilities[0], std::exp(revised[0]) / z, 1e-12);

  // With a single-class model the unknown mass is exactly zero.
  OpenMaxModel one;
  one.alpha = 1;
  one.classes.push_back({{2.0}, {2.0, 1.0, 0.5}});
  const OpenMaxOutput same = OpenMaxScore(one, {2.0});
  EXPECT_NEAR(same.probabilities[0], std::exp(2.0) / (std::exp(2.0) + 1.0), 1e-15);
}

TEST(OpenMaxTest, FarSampleTransfersTopActivation) {
  OpenMaxModel m;
  m.alpha = 1;
  m.classes.push_back({{5.0, 0.0}, {2.0, 1.0, 0.0}});
  m.classes.push_back({{0.0, 5.0}, {2.0, 1.0, 0.0}});
  const Logits far = {500.0, 1.0};
  const OpenMaxOutput out = OpenMaxScore(m, far);
  EXPECT_EQ(out.predicted, 0);
  EXPECT_NEAR(out.probabilities[2], 1.0, 1e-12);
  EXPECT_LT(out.confidence, MspScore(far));
}

// Revision stepped by hand from the rank weights (alpha - rank + 1) / alpha.
TEST(OpenMaxTest, FixtureMatchesHandSteppedRevision) {
  OpenMaxModel m;
  m.alpha = 2;
  m.classes.push_back({{3.0, 0.0, 0.0}, {1.5, 2.0, 0.5}});
  m.classes.push_back({{0.0, 3.0, 0.0}, {2.0, 1.0, 0.0}});
  m.classes.push_back({{0.0, 0.0, 3.0}, {1.0, 4.0, 0.0}});
  const Logits l = {1.0, 2.5, 0.5};
  // Rank 1: class 1, weight 1. d = |(1, -0.5, 0.5)| = sqrt(1.5).
  const double d1 = std::sqrt(1.5);
  const double cdf1 = 1.0 - std::exp(-(d1 * d1));
  // Rank 2: class 0, weight 1/2. d = |(-2, 2.5, 0.5)| = sqrt(10.5).
  const double d0 = std::sqrt(10.5);
  const double cdf0 = 1.0 - std::exp(std::pow(0.5 / 2.0, 1.5) - std::pow(d0 / 2.0, 1.5));
  const double v1 = 2.5 * (1.0 - cdf1), v0 = 1.0 * (1.0 - 0.5 * cdf0), v2 = 0.5;
  const double vu = 2.5 * cdf1 + 1.0 * 0.5 * cdf0;
  const double z = std::exp(v0) + std::exp(v1) + std::exp(v2) + std::exp(vu);
  const OpenMaxOutput out = OpenMaxScore(m, l);
  EXPECT_NEAR(out.probabilities[0], std::exp(v0) / z, 1e-12);
  EXPECT_NEAR(out.probabilities[1], std::exp(v1) / z, 1e-12);
  EXPECT_NEAR(out.probabilities[2], std::exp(v2) / z, 1e-12);
  EXPECT_NEAR(out.probabilities[3], std::exp(vu) / z, 1e-12);
  EXPECT_EQ(out.predicted, 1);
  EXPECT_NEAR(out.confidence, std::exp(v1) / z, 1e-12);
}

TEST(OpenMaxTest, UnfittedModelAndJsonRoundTrip) {
  EXPECT_THROW(OpenMaxScore(OpenMaxModel{}, {1.0, 2.0}), Error);
  const Fixture f = TwoClusters(6, 40);
  const OpenMaxModel m = OpenMaxFit(f.acts, f.labels, 2);
  const OpenMaxModel back = OpenMaxModelFromJson(ToJson(m));
  const Logits probe = {1.5, 2.0};
  EXPECT_EQ(OpenMaxScore(m, probe).probabilities, OpenMaxScore(back, probe).probabilities);
}

TEST(DumpTest, CsvAndSidecarRoundTrip) {
  testing::TempDir dir("dump");
  PredictionDump dump;
  dump.scorer = "openmax";
  dump.hyperparams = {{"tail_size", 20}, {"alpha", 2}};
  dump.domains = {{"digit", {"0", "1"}, {"5"}}, {"color", {"red", "blue"}, {"rose"}}};
  PredictionRecord r;
  r.sample_id = "test-0_red-00000";
  r.group = GroupTag::KnownSeen();
  r.attributes = {{"0", "1", {}, 0.123456789012345}, {"red", "red", {}, 1.0 / 3.0}};
  dump.records.push_back(r);
  r.sample_id = "test-5_rose-00001";
  r.group = GroupTag::OodAll();
  r.attributes = {{"5", "0", {}, 1e-300}, {"rose", "blue", {}, 0.5}};
  dump.records.push_back(r);
  const auto path = dir.path() / "predictions_openmax.csv";
  WriteDump(path, dump);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "predictions_openmax.json"));
  const CsvTable csv = ReadCsv(path);
  EXPECT_EQ(csv.header, (CsvRow{"sample_id", "group", "attr_1_true", "attr_1_pred", "attr_1_conf", "attr_2_true",
                                "attr_2_pred", "attr_2_conf"}));
  const PredictionDump back = ReadDump(path);
  EXPECT_EQ(back.scorer, "openmax");
  EXPECT_EQ(back.hyperparams, dump.hyperparams);
  ASSERT_EQ(back.records.size(), 2u);
  for (size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.records[i].sample_id, dump.records[i].sample_id);
    EXPECT_EQ(back.records[i].group, dump.records[i].group);
    for (size_t m = 0; m < 2; ++m) {
      EXPECT_EQ(back.records[i].attributes[m].confidence, dump.records[i].attributes[m].confidence);
      EXPECT_EQ(back.records[i].attributes[m].predicted_label, dump.records[i].attributes[m].predicted_label);
    }
  }
}

}  // namespace
}  // namespace mosr
