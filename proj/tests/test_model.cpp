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
#include <set>

#include "mosr/error.hpp"
#include "mosr/model.hpp"
#include "mosr/splits.hpp"
#include "gradcheck.hpp"
#include "test_support.hpp"

namespace mosr {
namespace {

ModelSpec TinySpec(Variant variant) {
  ModelSpec spec;
  spec.backbone.kind = BackboneKind::kLeNet;
  spec.backbone.feature_dim = 8;
  spec.heads = {{1, 8, 3}, {1, 8, 2}};
  spec.variant = variant;
  spec.image_size = 16;
  spec.Validate();
  return spec;
}

nn::Tensor RandomImages(int n, int size, uint64_t seed) {
  return testing::RandomImageTensor(n, size, seed);
}

TEST(LossTest, HandComputedFixture) {
  Matrix z0(2, 2), z1(2, 3);
  z0 << 1, 2, 0, 0;
  z1 << 3, 0, 0, 0, 0, 5;
  const std::vector<std::vector<int>> labels = {{1, 0}, {0, 1}};
  const LossResult r = MultiHeadLoss({z0, z1}, labels);

  const double h0 = (std::log1p(std::exp(-1.0)) + std::log(2.0)) / 2.0;
  const double h1 = (std::log1p(2.0 * std::exp(-3.0)) + 5.0 + std::log1p(2.0 * std::exp(-5.0))) / 2.0;
  ASSERT_EQ(r.per_head.size(), 2u);
  EXPECT_NEAR(r.per_head[0], h0, 1e-12);
  EXPECT_NEAR(r.per_head[1], h1, 1e-12);
  EXPECT_NEAR(r.total, h0 + h1, 1e-12);
  EXPECT_EQ(r.correct, (std::vector<int>{2, 1}));

  // d/dz of the mean cross-entropy is (softmax - onehot) / N.
  const double e = std::exp(1.0);
  EXPECT_NEAR(r.grads[0](0, 0), (1.0 / (1.0 + e)) / 2.0, 1e-7);
  EXPECT_NEAR(r.grads[0](0, 1), (e / (1.0 + e) - 1.0) / 2.0, 1e-7);
  EXPECT_NEAR(r.grads[0](1, 0), (0.5 - 1.0) / 2.0, 1e-7);
  EXPECT_NEAR(r.grads[0](1, 1), 0.5 / 2.0, 1e-7);
  const double d = std::exp(5.0) + 2.0;
  EXPECT_NEAR(r.grads[1](1, 1), (1.0 / d - 1.0) / 2.0, 1e-7);
  EXPECT_NEAR(r.grads[1](1, 2), (std::exp(5.0) / d) / 2.0, 1e-7);
  for (const auto& g : r.grads) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) EXPECT_NEAR(g.row(i).sum(), 0.0, 1e-7);
  }
}

TEST(LossTest, LargeLogitsStayFinite) {
  Matrix z(1, 3);
  z << 1000, -1000, 0;
  const LossResult r = MultiHeadLoss({z}, {{1}});
  EXPECT_NEAR(r.total, 2000.0, 1e-9);
  EXPECT_TRUE(r.grads[0].allFinite());
}

TEST(LossTest, RejectsBadShapes) {
  Matrix z(2, 2);
  z.setZero();
  EXPECT_THROW(MultiHeadLoss({z}, {{0}}), Error);
  EXPECT_THROW(MultiHeadLoss({z}, {{0}, {2}}), Error);
  EXPECT_THROW(MultiHeadLoss({z}, {{0}, {-1}}), Error);
}

TEST(ModelTest, DuplicatedBranchesAreIndependent) {
  MultiHeadModel model(TinySpec(Variant::kDuplicated), 3);
  std::set<nn::Parameter*> b0, b1;
  for (auto* p : model.ParametersOfBranch(0)) b0.insert(p);
  for (auto* p : model.ParametersOfBranch(1)) b1.insert(p);
  for (auto* p : b0) EXPECT_EQ(b1.count(p), 0u) << p->name;
  EXPECT_EQ(b0.size() + b1.size(), model.Parameters().size());

  // Head 0's loss alone reaches no parameter of branch 1.
  const nn::Tensor x = RandomImages(3, 16, 4);
  auto logits = model.Forward(x, nn::Mode::kTrain);
  LossResult r = MultiHeadLoss(logits, {{0, 0}, {1, 1}, {2, 0}});
  r.grads[1].setZero();
  model.ZeroGrad();
  model.Backward(r.grads);
  for (auto* p : b1) EXPECT_EQ(p->grad.cwiseAbs().maxCoeff(), 0.0f) << p->name;
  double reached = 0.0;
  for (auto* p : b0) reached += p->grad.cwiseAbs().sum();
  EXPECT_GT(reached, 0.0);
}

TEST(ModelTest, SharedBackboneIsReachedByEveryHead) {
  MultiHeadModel model(TinySpec(Variant::kShared), 3);
  std::set<std::string> b0, b1;
  for (auto* p : model.ParametersOfBranch(0)) b0.insert(p->name);
  for (auto* p : model.ParametersOfBranch(1)) b1.insert(p->name);
  int common = 0;
  for (const auto& n : b0) common += static_cast<int>(b1.count(n));
  EXPECT_GT(common, 0);
  for (const auto& n : b0) {
    if (b1.count(n)) EXPECT_EQ(n.rfind("backbone0.", 0), 0u) << n;
  }
}

TEST(ModelTest, SpecJsonRoundTripAndValidation) {
  const ModelSpec spec = TinySpec(Variant::kDuplicated);
  const ModelSpec back = ModelSpecFromJson(ToJson(spec));
  EXPECT_EQ(ToJson(back), ToJson(spec));
  ModelSpec bad = spec;
  bad.heads[0].output_dim = 0;
  EXPECT_THROW(bad.Validate(), Error);
  bad = spec;
  bad.heads.clear();
  EXPECT_THROW(bad.Validate(), Error);
  EXPECT_THROW(ModelSpecFromJson(nlohmann::json{{"heads", 1}}), Error);
  EXPECT_THROW(ParseVariant("triplicated"), Error);
  EXPECT_THROW(ParseBackboneKind("vgg"), Error);
}

TEST(ModelTest, ForPlanSizesHeadsByKnownValues) {
  const SplitPlan plan = MakeSplitPlan(BuiltinPreset("color-mnist"), CorrelationKind::kCorrelated);
  const ModelSpec spec = ModelSpec::ForPlan(plan, BackboneSpec{}, Variant::kShared, 32);
  ASSERT_EQ(spec.heads.size(), plan.domains.size());
  for (size_t m = 0; m < plan.domains.size(); ++m) {
    EXPECT_EQ(spec.heads[m].output_dim, static_cast<int>(plan.domains[m].known_values.size()));
  }
}

TEST(ModelTest, RejectsWrongInputShape) {
  MultiHeadModel model(TinySpec(Variant::kShared), 1);
  EXPECT_THROW(model.Forward(RandomImages(2, 20, 1), nn::Mode::kEval), Error);
}

TEST(ModelTest, ToTensorScalesAndLaysOutPixels) {
  Image a(2, 3, CV_8UC3, cv::Scalar(0, 0, 0));
  a.at<cv::Vec3b>(1, 2) = cv::Vec3b(255, 51, 0);
  Image b(2, 3, CV_8UC3, cv::Scalar(255, 255, 255));
  const nn::Tensor t = ToTensor({&a, &b});
  EXPECT_EQ(t.batch, 2);
  EXPECT_EQ(t.channels(), 3);
  EXPECT_FLOAT_EQ(t.data(1 * 3 + 2, 0), 1.0f);
  EXPECT_FLOAT_EQ(t.data(1 * 3 + 2, 1), 0.2f);
  EXPECT_FLOAT_EQ(t.data(1 * 3 + 2, 2), 0.0f);
  EXPECT_FLOAT_EQ(t.data(6 + 4, 1), 1.0f);
  Image c(3, 3, CV_8UC3);
  EXPECT_THROW(ToTensor({&a, &c}), Error);
}

TEST(SelectEpochTest, FirstMinimumWins) {
  EXPECT_EQ(SelectEpoch({3.0, 2.0, 2.5, 2.0}), 2);
  EXPECT_EQ(SelectEpoch({1.0}), 1);
  EXPECT_EQ(SelectEpoch({5.0, 4.0, 3.0}), 3);
  EXPECT_THROW(SelectEpoch({}), Error);
}

// Two heads: head 0 reads the dominant color channel, head 1 the brightness.
struct ToySet {
  std::vector<Image> storage;
  LabeledSet set;
};

ToySet MakeToySet(int n, uint64_t seed) {
  ToySet toy;
  nn::Rng rng(seed);
  std::uniform_int_distribution<int> noise(0, 40);
  toy.storage.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int color = i % 3, bright = (i / 3) % 2;
    Image img(16, 16, CV_8UC3);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        cv::Vec3b px;
        for (int c = 0; c < 3; ++c) {
          px[c] = static_cast<uint8_t>((c == color ? 120 + 100 * bright : 20) + noise(rng));
        }
        img.at<cv::Vec3b>(y, x) = px;
      }
    }
    toy.storage.push_back(img);
    toy.set.labels.push_back({color, bright});
  }
  for (const auto& img : toy.storage) toy.set.images.push_back(&img);
  return toy;
}

TEST(TrainTest, LossDecreasesAndRunIsDeterministic) {
  const ToySet train = MakeToySet(48, 1), val = MakeToySet(12, 2);
  TrainConfig config;
  config.max_epochs = 8;
  config.batch_size = 16;
  config.seed = 5;
  config.learning_rate = 3e-3;
  std::vector<int> seen;
  TrainResult a = Train(TinySpec(Variant::kShared), train.set, val.set, config,
                        [&](const EpochLog& e) { seen.push_back(e.epoch); });
  ASSERT_EQ(a.log.epochs.size(), 8u);
  EXPECT_EQ(seen, (std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8}));
  EXPECT_LT(a.log.epochs.back().train_total, a.log.epochs.front().train_total);
  std::vector<double> totals;
  for (const auto& e : a.log.epochs) totals.push_back(e.val_total);
  EXPECT_EQ(a.log.selected_epoch, SelectEpoch(totals));
  EXPECT_EQ(a.log.ToCsv().rows.size(), 8u);

  TrainResult b = Train(TinySpec(Variant::kShared), train.set, val.set, config);
  const auto la = ExtractActivations(*a.model, val.set.images);
  const auto lb = ExtractActivations(*b.model, val.set.images);
  for (size_t m = 0; m < la.size(); ++m) EXPECT_EQ(la[m], lb[m]);
}

TEST(CheckpointTest, RoundTripReproducesLogits) {
  testing::TempDir dir("ckpt");
  const ToySet toy = MakeToySet(12, 3);
  TrainConfig config;
  config.max_epochs = 2;
  config.batch_size = 6;
  config.seed = 9;
  TrainResult r = Train(TinySpec(Variant::kDuplicated), toy.set, toy.set, config);
  const auto path = dir.path() / "model.bin";
  SaveCheckpoint(path, *r.model, config, r.log.selected_epoch);
  const Checkpoint ck = LoadCheckpoint(path);
  EXPECT_EQ(ck.selected_epoch, r.log.selected_epoch);
  EXPECT_EQ(ToJson(ck.config), ToJson(config));
  EXPECT_EQ(ToJson(ck.model->spec()), ToJson(r.model->spec()));
  const auto la = ExtractActivations(*r.model, toy.set.images, 5);
  const auto lb = ExtractActivations(*ck.model, toy.set.images, 5);
  for (size_t m = 0; m < la.size(); ++m) EXPECT_EQ(la[m], lb[m]);

  std::filesystem::resize_file(path, std::filesystem::file_size(path) / 2);
  EXPECT_THROW(LoadCheckpoint(path), Error);
  EXPECT_THROW(LoadCheckpoint(dir.path() / "missing.bin"), Error);
}

}  // namespace
}  // namespace mosr
