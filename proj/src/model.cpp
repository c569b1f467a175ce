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


#include "mosr/model.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "mosr/error.hpp"
#include "mosr/util.hpp"

namespace mosr {
namespace {

using json = nlohmann::json;
using nn::Mode;
using nn::Sequential;
using nn::Tensor;

int ConvOut(int size, int kernel, int stride, int pad) { return (size + 2 * pad - kernel) / stride + 1; }

std::unique_ptr<Sequential> BuildLeNet(const ModelSpec& spec, nn::Rng& rng, const std::string& p) {
  auto net = std::make_unique<Sequential>();
  net->Emplace<nn::Conv2d>(spec.in_channels, 6, 5, 1, 0, true, rng, p + "conv1")
      .set_propagate_input_grad(false);
  net->Emplace<nn::ReLU>();
  net->Emplace<nn::MaxPool2d>(2, 2);
  net->Emplace<nn::Conv2d>(6, 16, 5, 1, 0, true, rng, p + "conv2");
  net->Emplace<nn::ReLU>();
  net->Emplace<nn::MaxPool2d>(2, 2);
  net->Emplace<nn::Flatten>();
  int s = ConvOut(spec.image_size, 5, 1, 0) / 2;
  s = ConvOut(s, 5, 1, 0) / 2;
  if (s < 1) throw Error(ErrorKind::kConfiguration, "image too small for the LeNet-like backbone");
  net->Emplace<nn::Linear>(16 * s * s, 120, rng, p + "fc1");
  net->Emplace<nn::ReLU>();
  net->Emplace<nn::Linear>(120, 84, rng, p + "fc2");
  net->Emplace<nn::ReLU>();
  net->Emplace<nn::Linear>(84, spec.backbone.feature_dim, rng, p + "fc3");
  return net;
}

std::unique_ptr<Sequential> BuildResNet18(const ModelSpec& spec, nn::Rng& rng, const std::string& p) {
  const int w = spec.backbone.resnet_width;
  auto net = std::make_unique<Sequential>();
  net->Emplace<nn::Conv2d>(spec.in_channels, w, 7, 2, 3, false, rng, p + "stem")
      .set_propagate_input_grad(false);
  net->Emplace<nn::BatchNorm>(w, p + "stem_bn");
  net->Emplace<nn::ReLU>();
  net->Emplace<nn::MaxPool2d>(3, 2, 1);
  int in = w;
  for (int stage = 0; stage < 4; ++stage) {
    const int out = w << stage;
    for (int block = 0; block < 2; ++block) {
      const int stride = (stage > 0 && block == 0) ? 2 : 1;
      net->Emplace<nn::ResidualBlock>(in, out, stride, rng,
                                      p + "layer" + std::to_string(stage + 1) + "." +
                                          std::to_string(block));
      in = out;
    }
  }
  net->Emplace<nn::GlobalAvgPool>();
  net->Emplace<nn::Linear>(in, spec.backbone.feature_dim, rng, p + "fc");
  return net;
}

std::unique_ptr<Sequential> BuildHead(const HeadSpec& head, int in, nn::Rng& rng,
                                      const std::string& p) {
  auto net = std::make_unique<Sequential>();
  for (int l = 0; l < head.hidden_layers; ++l) {
    const std::string name = p + "hidden" + std::to_string(l + 1);
    net->Emplace<nn::Linear>(l == 0 ? in : head.hidden_units, head.hidden_units, rng, name);
    net->Emplace<nn::BatchNorm>(head.hidden_units, name + "_bn");
    net->Emplace<nn::ReLU>();
  }
  net->Emplace<nn::Linear>(head.hidden_layers == 0 ? in : head.hidden_units, head.output_dim, rng,
                           p + "out");
  return net;
}

void CheckFinite(double v, const std::string& where) {
  if (!std::isfinite(v)) throw Error(ErrorKind::kTraining, "non-finite loss " + where);
}

}  // namespace

std::string ToString(BackboneKind kind) { return kind == BackboneKind::kLeNet ? "lenet" : "resnet18"; }

BackboneKind ParseBackboneKind(const std::string& s) {
  if (s == "lenet") return BackboneKind::kLeNet;
  if (s == "resnet18") return BackboneKind::kResNet18;
  throw Error(ErrorKind::kConfiguration, "unknown backbone '" + s + "'");
}

std::string ToString(Variant variant) { return variant == Variant::kShared ? "shared" : "duplicated"; }

Variant ParseVariant(const std::string& s) {
  if (s == "shared") return Variant::kShared;
  if (s == "duplicated" || s == "d") return Variant::kDuplicated;
  throw Error(ErrorKind::kConfiguration, "unknown model variant '" + s + "'");
}

ModelSpec ModelSpec::ForPlan(const SplitPlan& plan, BackboneSpec backbone, Variant variant,
                             int image_size) {
  ModelSpec spec;
  spec.backbone = backbone;
  spec.variant = variant;
  spec.image_size = image_size;
  for (const auto& d : plan.domains) {
    HeadSpec h;
    h.output_dim = static_cast<int>(d.known_values.size());
    spec.heads.push_back(h);
  }
  spec.Validate();
  return spec;
}

void ModelSpec::Validate() const {
  if (backbone.feature_dim <= 0) throw Error(ErrorKind::kConfiguration, "feature_dim must be positive");
  if (backbone.resnet_width <= 0) throw Error(ErrorKind::kConfiguration, "resnet_width must be positive");
  if (heads.empty()) throw Error(ErrorKind::kConfiguration, "model needs at least one head");
  for (const auto& h : heads) {
    if (h.output_dim <= 0 || h.hidden_units <= 0 || h.hidden_layers < 0) {
      throw Error(ErrorKind::kConfiguration, "invalid head specification");
    }
  }
  if (image_size <= 0 || in_channels <= 0) throw Error(ErrorKind::kConfiguration, "invalid input shape");
}

json ToJson(const ModelSpec& spec) {
  json heads = json::array();
  for (const auto& h : spec.heads) {
    heads.push_back({{"hidden_layers", h.hidden_layers}, {"hidden_units", h.hidden_units},
                     {"output_dim", h.output_dim}});
  }
  return {{"backbone", {{"kind", ToString(spec.backbone.kind)},
                        {"feature_dim", spec.backbone.feature_dim},
                        {"resnet_width", spec.backbone.resnet_width}}},
          {"heads", heads},
          {"variant", ToString(spec.variant)},
          {"image_size", spec.image_size},
          {"in_channels", spec.in_channels}};
}

ModelSpec ModelSpecFromJson(const json& j) {
  try {
    ModelSpec spec;
    spec.backbone.kind = ParseBackboneKind(j.at("backbone").at("kind").get<std::string>());
    spec.backbone.feature_dim = j.at("backbone").at("feature_dim").get<int>();
    spec.backbone.resnet_width = j.at("backbone").value("resnet_width", 64);
    for (const auto& h : j.at("heads")) {
      spec.heads.push_back({h.at("hidden_layers").get<int>(), h.at("hidden_units").get<int>(),
                            h.at("output_dim").get<int>()});
    }
    spec.variant = ParseVariant(j.at("variant").get<std::string>());
    spec.image_size = j.at("image_size").get<int>();
    spec.in_channels = j.value("in_channels", 3);
    spec.Validate();
    return spec;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIo, std::string("malformed model spec: ") + e.what());
  }
}

Tensor ToTensor(const std::vector<const Image*>& images) {
  if (images.empty()) return Tensor{};
  const int h = images.front()->rows, w = images.front()->cols;
  const int c = images.front()->channels();
  Tensor t = Tensor::Zeros(c, static_cast<int>(images.size()), h, w);
  const size_t plane = static_cast<size_t>(h) * w;
  for (size_t n = 0; n < images.size(); ++n) {
    const Image& img = *images[n];
    if (img.rows != h || img.cols != w || img.channels() != c || img.depth() != CV_8U) {
      throw Error(ErrorKind::kInput, "images in a batch must share one 8-bit shape");
    }
    for (int y = 0; y < h; ++y) {
      const uint8_t* row = img.ptr<uint8_t>(y);
      for (int x = 0; x < w; ++x) {
        for (int ch = 0; ch < c; ++ch) {
          t.data(static_cast<Eigen::Index>(n * plane + static_cast<size_t>(y) * w + x), ch) =
              row[x * c + ch] * (1.0f / 255.0f);
        }
      }
    }
  }
  return t;
}

// ---------------------------------------------------------------- model

MultiHeadModel::MultiHeadModel(const ModelSpec& spec, uint64_t seed) : spec_(spec) {
  spec_.Validate();
  nn::Rng rng = DeriveRng(seed, "init");
  const int m = num_heads();
  const int copies = spec_.variant == Variant::kShared ? 1 : m;
  for (int i = 0; i < copies; ++i) {
    const std::string prefix = "backbone" + std::to_string(i) + ".";
    backbones_.push_back(spec_.backbone.kind == BackboneKind::kLeNet ? BuildLeNet(spec_, rng, prefix)
                                                                     : BuildResNet18(spec_, rng, prefix));
  }
  for (int i = 0; i < m; ++i) {
    heads_.push_back(BuildHead(spec_.heads[i], spec_.backbone.feature_dim, rng,
                               "head" + std::to_string(i) + "."));
  }
}

std::vector<Matrix> MultiHeadModel::Forward(const Tensor& images, nn::Mode mode) {
  if (images.height != spec_.image_size || images.width != spec_.image_size ||
      images.channels() != spec_.in_channels) {
    throw Error(ErrorKind::kInput,
                "expected " + std::to_string(spec_.in_channels) + "x" + std::to_string(spec_.image_size) +
                    "x" + std::to_string(spec_.image_size) + " input, got " +
                    std::to_string(images.channels()) + "x" + std::to_string(images.height) + "x" +
                    std::to_string(images.width));
  }
  std::vector<Matrix> logits;
  Tensor shared;
  if (spec_.variant == Variant::kShared) shared = backbones_[0]->Forward(images, mode);
  for (int m = 0; m < num_heads(); ++m) {
    const Tensor features =
        spec_.variant == Variant::kShared ? shared : backbones_[m]->Forward(images, mode);
    logits.push_back(heads_[m]->Forward(features, mode).data);
  }
  return logits;
}

void MultiHeadModel::Backward(const std::vector<Matrix>& logit_grads) {
  Tensor feature_grad;
  for (int m = 0; m < num_heads(); ++m) {
    Tensor g;
    g.data = logit_grads[m];
    g.batch = static_cast<int>(g.data.rows());
    Tensor dz = heads_[m]->Backward(g);
    if (spec_.variant == Variant::kDuplicated) {
      backbones_[m]->Backward(dz);
    } else if (feature_grad.empty()) {
      feature_grad = std::move(dz);
    } else {
      feature_grad.data += dz.data;
    }
  }
  if (spec_.variant == Variant::kShared) backbones_[0]->Backward(feature_grad);
}

std::vector<nn::Parameter*> MultiHeadModel::Parameters() {
  std::vector<nn::Parameter*> out;
  for (auto& b : backbones_) b->CollectParameters(out);
  for (auto& h : heads_) h->CollectParameters(out);
  return out;
}

std::vector<Matrix*> MultiHeadModel::Buffers() {
  std::vector<Matrix*> out;
  for (auto& b : backbones_) b->CollectBuffers(out);
  for (auto& h : heads_) h->CollectBuffers(out);
  return out;
}

std::vector<nn::Parameter*> MultiHeadModel::ParametersOfBranch(int m) {
  std::vector<nn::Parameter*> out;
  backbones_[spec_.variant == Variant::kShared ? 0 : m]->CollectParameters(out);
  heads_[m]->CollectParameters(out);
  return out;
}

void MultiHeadModel::ZeroGrad() {
  for (auto* p : Parameters()) p->grad.setZero();
}

// ---------------------------------------------------------------- loss

LossResult MultiHeadLoss(const std::vector<Matrix>& logits, const std::vector<std::vector<int>>& labels) {
  LossResult out;
  out.total = 0.0;
  const auto n = static_cast<Eigen::Index>(labels.size());
  for (size_t m = 0; m < logits.size(); ++m) {
    const Matrix& z = logits[m];
    if (z.rows() != n) throw Error(ErrorKind::kTraining, "logit rows do not match the label count");
    Matrix grad(z.rows(), z.cols());
    double loss = 0.0;
    int correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int y = labels[i][m];
      if (y < 0 || y >= z.cols()) throw Error(ErrorKind::kTraining, "label index out of range");
      Eigen::Index arg;
      const double mx = z.row(i).maxCoeff(&arg);
      double sum = 0.0;
      for (Eigen::Index c = 0; c < z.cols(); ++c) sum += std::exp(static_cast<double>(z(i, c)) - mx);
      loss += std::log(sum) + mx - z(i, y);
      correct += arg == y;
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const double p = std::exp(static_cast<double>(z(i, c)) - mx) / sum;
        grad(i, c) = static_cast<nn::Scalar>((p - (c == y ? 1.0 : 0.0)) / static_cast<double>(n));
      }
    }
    loss /= static_cast<double>(n);
    out.per_head.push_back(loss);
    out.total += loss;
    out.grads.push_back(std::move(grad));
    out.correct.push_back(correct);
  }
  return out;
}

// ---------------------------------------------------------------- training

double TrainConfig::EffectiveLearningRate(BackboneKind kind) const {
  if (learning_rate > 0.0) return learning_rate;
  return kind == BackboneKind::kLeNet ? 1e-3 : 1e-4;
}

json ToJson(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"max_epochs", c.max_epochs},
          {"batch_size", c.batch_size},       {"seed", c.seed},
          {"beta1", c.beta1},                 {"beta2", c.beta2},
          {"epsilon", c.epsilon}};
}

TrainConfig TrainConfigFromJson(const json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  return c;
}

Adam::Adam(std::vector<nn::Parameter*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::Step() {
  ++t_;
  const nn::Scalar b1 = static_cast<nn::Scalar>(beta1_), b2 = static_cast<nn::Scalar>(beta2_);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const nn::Scalar step = static_cast<nn::Scalar>(lr_ / c1);
  const nn::Scalar inv_c2 = static_cast<nn::Scalar>(1.0 / c2);
  const nn::Scalar eps = static_cast<nn::Scalar>(eps_);
  for (size_t i = 0; i < params_.size(); ++i) {
    const auto g = params_[i]->grad.array();
    m_[i].array() = b1 * m_[i].array() + (1.0f - b1) * g;
    v_[i].array() = b2 * v_[i].array() + (1.0f - b2) * g.square();
    params_[i]->value.array() -= step * m_[i].array() / ((v_[i].array() * inv_c2).sqrt() + eps);
  }
}

CsvTable TrainingLog::ToCsv() const {
  CsvTable t;
  const size_t m = epochs.empty() ? 0 : epochs.front().train_loss.size();
  t.header = {"epoch"};
  for (size_t h = 1; h <= m; ++h) t.header.push_back("train_loss_" + std::to_string(h));
  t.header.push_back("train_total");
  for (size_t h = 1; h <= m; ++h) t.header.push_back("val_loss_" + std::to_string(h));
  t.header.push_back("val_total");
  for (size_t h = 1; h <= m; ++h) t.header.push_back("train_acc_" + std::to_string(h));
  for (size_t h = 1; h <= m; ++h) t.header.push_back("val_acc_" + std::to_string(h));
  t.header.push_back("selected");
  for (const auto& e : epochs) {
    CsvRow row{std::to_string(e.epoch)};
    for (double v : e.train_loss) row.push_back(FormatDouble(v));
    row.push_back(FormatDouble(e.train_total));
    for (double v : e.val_loss) row.push_back(FormatDouble(v));
    row.push_back(FormatDouble(e.val_total));
    for (double v : e.train_acc) row.push_back(FormatDouble(v));
    for (double v : e.val_acc) row.push_back(FormatDouble(v));
    row.push_back(e.epoch == selected_epoch ? "1" : "0");
    t.rows.push_back(std::move(row));
  }
  return t;
}

int SelectEpoch(const std::vector<double>& val_totals) {
  if (val_totals.empty()) throw Error(ErrorKind::kTraining, "no completed epochs to select from");
  size_t best = 0;
  for (size_t i = 1; i < val_totals.size(); ++i) {
    if (val_totals[i] < val_totals[best]) best = i;
  }
  return static_cast<int>(best) + 1;
}

LabeledSet MakeLabeledSet(const DatasetManifest& manifest, Partition partition) {
  LabeledSet set;
  const auto& domains = manifest.plan.domains;
  for (size_t i : manifest.Indices(partition)) {
    const auto& r = manifest.records[i];
    if (r.image.empty()) throw Error(ErrorKind::kTraining, "image of " + r.sample_id + " is not loaded");
    std::vector<int> labels;
    for (size_t m = 0; m < domains.size(); ++m) {
      const int k = domains[m].KnownIndex(r.labels[m]);
      if (k < 0) {
        throw Error(ErrorKind::kTraining, r.sample_id + " carries non-known value '" + r.labels[m] + "'");
      }
      labels.push_back(k);
    }
    set.images.push_back(&r.image);
    set.labels.push_back(std::move(labels));
  }
  return set;
}

namespace {

struct Snapshot {
  std::vector<Matrix> values;
  std::vector<Matrix> buffers;
};

Snapshot Capture(MultiHeadModel& model) {
  Snapshot s;
  for (auto* p : model.Parameters()) s.values.push_back(p->value);
  for (auto* b : model.Buffers()) s.buffers.push_back(*b);
  return s;
}

void Restore(MultiHeadModel& model, const Snapshot& s) {
  const auto params = model.Parameters();
  const auto buffers = model.Buffers();
  for (size_t i = 0; i < params.size(); ++i) params[i]->value = s.values[i];
  for (size_t i = 0; i < buffers.size(); ++i) *buffers[i] = s.buffers[i];
}

// Mean loss and accuracy per head over `set`, inference mode.
void Evaluate(MultiHeadModel& model, const LabeledSet& set, int batch_size,
              std::vector<double>& loss, std::vector<double>& acc) {
  const int m = model.num_heads();
  loss.assign(m, 0.0);
  acc.assign(m, 0.0);
  for (size_t start = 0; start < set.size(); start += batch_size) {
    const size_t end = std::min(set.size(), start + batch_size);
    std::vector<const Image*> images(set.images.begin() + start, set.images.begin() + end);
    std::vector<std::vector<int>> labels(set.labels.begin() + start, set.labels.begin() + end);
    const auto logits = model.Forward(ToTensor(images), nn::Mode::kEval);
    const auto r = MultiHeadLoss(logits, labels);
    for (int h = 0; h < m; ++h) {
      loss[h] += r.per_head[h] * static_cast<double>(end - start);
      acc[h] += r.correct[h];
    }
  }
  for (int h = 0; h < m; ++h) {
    loss[h] /= static_cast<double>(set.size());
    acc[h] /= static_cast<double>(set.size());
  }
}

}  // namespace

TrainResult Train(const ModelSpec& spec, const LabeledSet& train, const LabeledSet& val,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  if (train.size() == 0) throw Error(ErrorKind::kTraining, "empty training partition");
  if (val.size() == 0) throw Error(ErrorKind::kTraining, "empty validation partition");
  if (config.max_epochs < 1) throw Error(ErrorKind::kConfiguration, "max_epochs must be at least 1");
  if (config.batch_size < 2) throw Error(ErrorKind::kConfiguration, "batch_size must be at least 2");
  const double lr = config.EffectiveLearningRate(spec.backbone.kind);
  if (!(lr > 0.0)) throw Error(ErrorKind::kConfiguration, "learning rate must be positive");

  TrainResult result;
  result.model = std::make_unique<MultiHeadModel>(spec, config.seed);
  MultiHeadModel& model = *result.model;
  Adam adam(model.Parameters(), lr, config.beta1, config.beta2, config.epsilon);
  Rng shuffle_rng = DeriveRng(config.seed, "shuffle");
  const int m = model.num_heads();

  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Snapshot best;
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Shuffle(order, shuffle_rng);
    EpochLog log;
    log.epoch = epoch;
    log.train_loss.assign(m, 0.0);
    log.train_acc.assign(m, 0.0);
    size_t seen = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      // Batch statistics are undefined for a single sample.
      if (end - start < 2) continue;
      std::vector<const Image*> images;
      std::vector<std::vector<int>> labels;
      for (size_t i = start; i < end; ++i) {
        images.push_back(train.images[order[i]]);
        labels.push_back(train.labels[order[i]]);
      }
      const auto logits = model.Forward(ToTensor(images), nn::Mode::kTrain);
      const auto loss = MultiHeadLoss(logits, labels);
      CheckFinite(loss.total, "at epoch " + std::to_string(epoch) + ", batch starting at " +
                                  std::to_string(start));
      model.ZeroGrad();
      model.Backward(loss.grads);
      adam.Step();
      for (int h = 0; h < m; ++h) {
        log.train_loss[h] += loss.per_head[h] * static_cast<double>(end - start);
        log.train_acc[h] += loss.correct[h];
      }
      seen += end - start;
    }
    for (int h = 0; h < m; ++h) {
      log.train_loss[h] /= static_cast<double>(seen);
      log.train_acc[h] /= static_cast<double>(seen);
      log.train_total += log.train_loss[h];
    }
    Evaluate(model, val, 256, log.val_loss, log.val_acc);
    for (double v : log.val_loss) log.val_total += v;
    CheckFinite(log.val_total, "on validation at epoch " + std::to_string(epoch));
    if (log.val_total < best_val) {
      best_val = log.val_total;
      best = Capture(model);
    }
    result.log.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  std::vector<double> totals;
  for (const auto& e : result.log.epochs) totals.push_back(e.val_total);
  result.log.selected_epoch = SelectEpoch(totals);
  Restore(model, best);
  return result;
}

std::vector<Matrix> ExtractActivations(MultiHeadModel& model, const std::vector<const Image*>& images,
                                       int batch_size) {
  std::vector<Matrix> out(model.num_heads());
  for (int h = 0; h < model.num_heads(); ++h) out[h].resize(0, model.spec().heads[h].output_dim);
  if (images.empty()) return out;
  for (int h = 0; h < model.num_heads(); ++h) {
    out[h].resize(static_cast<Eigen::Index>(images.size()), model.spec().heads[h].output_dim);
  }
  for (size_t start = 0; start < images.size(); start += batch_size) {
    const size_t end = std::min(images.size(), start + static_cast<size_t>(batch_size));
    std::vector<const Image*> batch(images.begin() + start, images.begin() + end);
    const auto logits = model.Forward(ToTensor(batch), nn::Mode::kEval);
    for (int h = 0; h < model.num_heads(); ++h) {
      out[h].middleRows(static_cast<Eigen::Index>(start), logits[h].rows()) = logits[h];
    }
  }
  return out;
}

// ---------------------------------------------------------------- checkpoints

namespace {
constexpr char kMagic[] = "MOSRCKPT1\n";
}

void SaveCheckpoint(const std::filesystem::path& path, MultiHeadModel& model, const TrainConfig& config,
                    int selected_epoch) {
  json tensors = json::array();
  std::vector<const Matrix*> blobs;
  for (auto* p : model.Parameters()) {
    tensors.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
    blobs.push_back(&p->value);
  }
  int b = 0;
  for (auto* m : model.Buffers()) {
    tensors.push_back({{"name", "buffer" + std::to_string(b++)}, {"rows", m->rows()}, {"cols", m->cols()}});
    blobs.push_back(m);
  }
  const json header = {{"model_spec", ToJson(model.spec())},
                       {"train_config", ToJson(config)},
                       {"selected_epoch", selected_epoch},
                       {"tensors", tensors}};
  std::string out = kMagic;
  const std::string text = header.dump();
  const uint64_t len = text.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  out += text;
  for (const Matrix* m : blobs) {
    out.append(reinterpret_cast<const char*>(m->data()), sizeof(nn::Scalar) * static_cast<size_t>(m->size()));
  }
  WriteFileAtomic(path, out);
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  const std::string raw = ReadFile(path);
  const size_t magic_len = sizeof(kMagic) - 1;
  if (raw.compare(0, magic_len, kMagic) != 0 || raw.size() < magic_len + 8) {
    throw Error(ErrorKind::kIo, path.string() + " is not a checkpoint");
  }
  uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= uint64_t{static_cast<uint8_t>(raw[magic_len + i])} << (8 * i);
  size_t offset = magic_len + 8;
  if (raw.size() < offset + len) throw Error(ErrorKind::kIo, path.string() + " is truncated");
  const json header = json::parse(raw.substr(offset, len));
  offset += len;

  Checkpoint ck;
  ck.config = TrainConfigFromJson(header.at("train_config"));
  ck.selected_epoch = header.at("selected_epoch").get<int>();
  ck.model = std::make_unique<MultiHeadModel>(ModelSpecFromJson(header.at("model_spec")), ck.config.seed);
  std::vector<Matrix*> targets;
  for (auto* p : ck.model->Parameters()) targets.push_back(&p->value);
  for (auto* b : ck.model->Buffers()) targets.push_back(b);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != targets.size()) {
    throw Error(ErrorKind::kIo, path.string() + ": tensor count does not match the model spec");
  }
  for (size_t i = 0; i < targets.size(); ++i) {
    Matrix& t = *targets[i];
    if (tensors[i].at("rows").get<Eigen::Index>() != t.rows() ||
        tensors[i].at("cols").get<Eigen::Index>() != t.cols()) {
      throw Error(ErrorKind::kIo, path.string() + ": shape mismatch for " +
                                      tensors[i].at("name").get<std::string>());
    }
    const size_t bytes = sizeof(nn::Scalar) * static_cast<size_t>(t.size());
    if (raw.size() < offset + bytes) throw Error(ErrorKind::kIo, path.string() + " is truncated");
    std::memcpy(t.data(), raw.data() + offset, bytes);
    offset += bytes;
  }
  if (offset != raw.size()) throw Error(ErrorKind::kIo, path.string() + " has trailing bytes");
  return ck;
}

}  // namespace mosr
