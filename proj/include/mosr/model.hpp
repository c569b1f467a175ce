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


#ifndef MOSR_MODEL_HPP_
#define MOSR_MODEL_HPP_

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mosr/datagen.hpp"
#include "mosr/nn/layers.hpp"

namespace mosr {

using nn::Matrix;

enum class BackboneKind { kLeNet, kResNet18 };
enum class Variant { kShared, kDuplicated };

std::string ToString(BackboneKind kind);
BackboneKind ParseBackboneKind(const std::string& s);
std::string ToString(Variant variant);
Variant ParseVariant(const std::string& s);

struct BackboneSpec {
  BackboneKind kind = BackboneKind::kLeNet;
  int feature_dim = 128;
  // Channels of the first residual stage; 64 is the standard topology.
  int resnet_width = 64;
};

struct HeadSpec {
  int hidden_layers = 2;
  int hidden_units = 128;
  int output_dim = 0;
};

struct ModelSpec {
  BackboneSpec backbone;
  std::vector<HeadSpec> heads;
  Variant variant = Variant::kShared;
  int image_size = 32;
  int in_channels = 3;

  // One head per attribute, output_dim = |known values|.
  static ModelSpec ForPlan(const SplitPlan& plan, BackboneSpec backbone, Variant variant,
                           int image_size);
  void Validate() const;
};

nlohmann::json ToJson(const ModelSpec& spec);
ModelSpec ModelSpecFromJson(const nlohmann::json& j);

// Images as a batch tensor: pixels scaled to [0, 1], one column per channel.
nn::Tensor ToTensor(const std::vector<const Image*>& images);

class MultiHeadModel {
 public:
  MultiHeadModel(const ModelSpec& spec, uint64_t seed);

  // One N x |A^k_m| logit matrix per attribute.
  std::vector<Matrix> Forward(const nn::Tensor& images, nn::Mode mode);
  // Gradients w.r.t. each head's logits from the last Forward.
  void Backward(const std::vector<Matrix>& logit_grads);

  std::vector<nn::Parameter*> Parameters();
  std::vector<Matrix*> Buffers();
  void ZeroGrad();
  const ModelSpec& spec() const { return spec_; }
  int num_heads() const { return static_cast<int>(spec_.heads.size()); }
  // Parameters and buffers reached by head m's loss.
  std::vector<nn::Parameter*> ParametersOfBranch(int m);

 private:
  ModelSpec spec_;
  std::vector<std::unique_ptr<nn::Sequential>> backbones_;  // 1 or M
  std::vector<std::unique_ptr<nn::Sequential>> heads_;
};

struct LossResult {
  double total = 0.0;
  std::vector<double> per_head;
  // d total / d logits, per head.
  std::vector<Matrix> grads;
  std::vector<int> correct;
};

// Sum over heads of the batch-mean cross-entropy; labels[n][m] indexes the
// known values of attribute m.
LossResult MultiHeadLoss(const std::vector<Matrix>& logits,
                         const std::vector<std::vector<int>>& labels);

struct TrainConfig {
  // Zero selects 1e-3 for LeNet-like and 1e-4 for ResNet-like backbones.
  double learning_rate = 0.0;
  int max_epochs = 400;
  int batch_size = 128;
  uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  double EffectiveLearningRate(BackboneKind kind) const;
};

nlohmann::json ToJson(const TrainConfig& config);
TrainConfig TrainConfigFromJson(const nlohmann::json& j);

class Adam {
 public:
  Adam(std::vector<nn::Parameter*> params, double lr, double beta1, double beta2, double eps);
  void Step();

 private:
  std::vector<nn::Parameter*> params_;
  std::vector<Matrix> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

struct EpochLog {
  int epoch = 0;
  std::vector<double> train_loss, val_loss, train_acc, val_acc;
  double train_total = 0.0, val_total = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  int selected_epoch = 0;

  CsvTable ToCsv() const;
};

// 1-based epoch with the minimum validation total; the earliest wins ties.
int SelectEpoch(const std::vector<double>& val_totals);

// Labeled images for one partition; labels index known values per attribute.
struct LabeledSet {
  std::vector<const Image*> images;
  std::vector<std::vector<int>> labels;
  size_t size() const { return images.size(); }
};

// Records of `partition` in manifest order. Non-known labels are an error.
LabeledSet MakeLabeledSet(const DatasetManifest& manifest, Partition partition);

struct TrainResult {
  std::unique_ptr<MultiHeadModel> model;
  TrainingLog log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Runs all max_epochs and returns the model restored to the epoch with the
// lowest validation loss.
TrainResult Train(const ModelSpec& spec, const LabeledSet& train, const LabeledSet& val,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Inference-mode logits, one N x |A^k_m| matrix per head, in input order.
std::vector<Matrix> ExtractActivations(MultiHeadModel& model,
                                       const std::vector<const Image*>& images,
                                       int batch_size = 256);

void SaveCheckpoint(const std::filesystem::path& path, MultiHeadModel& model,
                    const TrainConfig& config, int selected_epoch);
struct Checkpoint {
  std::unique_ptr<MultiHeadModel> model;
  TrainConfig config;
  int selected_epoch = 0;
};
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace mosr

#endif  // MOSR_MODEL_HPP_
