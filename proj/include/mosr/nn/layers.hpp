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

#ifndef MOSR_NN_LAYERS_HPP_
#define MOSR_NN_LAYERS_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#ifndef MOSR_NN_SCALAR
#define MOSR_NN_SCALAR float
#endif

namespace mosr::nn {

// float in production; the double build exists for finite-difference checks.
using Scalar = MOSR_NN_SCALAR;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using IndexMatrix = Eigen::Matrix<int32_t, Eigen::Dynamic, Eigen::Dynamic>;
using Rng = std::mt19937_64;

// Activations are stored as one column per channel: a (N*H*W) x C
// column-major matrix whose rows run over (n, y, x) with x fastest. A fully
// connected activation is the H = W = 1 case, i.e. one row per sample.
struct Tensor {
  Matrix data;
  int batch = 0;
  int height = 1;
  int width = 1;

  int channels() const { return static_cast<int>(data.cols()); }
  int spatial() const { return height * width; }
  bool empty() const { return data.size() == 0; }

  static Tensor Zeros(int channels, int batch, int height = 1, int width = 1);
};

enum class Mode { kTrain, kEval };

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor Forward(const Tensor& x, Mode mode) = 0;
  // Consumes the gradient w.r.t. the last Forward output, accumulates
  // parameter gradients and returns the gradient w.r.t. the input.
  virtual Tensor Backward(const Tensor& grad_out) = 0;

  virtual void CollectParameters(std::vector<Parameter*>& out) { (void)out; }
  // Non-trainable state that is part of a checkpoint (batch-norm statistics).
  virtual void CollectBuffers(std::vector<Matrix*>& out) { (void)out; }
  virtual std::string Describe() const = 0;
};

class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad,
         bool bias, Rng& rng, std::string name);

  Tensor Forward(const Tensor& x, Mode mode) override;
  Tensor Backward(const Tensor& grad_out) override;
  void CollectParameters(std::vector<Parameter*>& out) override;
  std::string Describe() const override;

  // The first layer of a network never needs its input gradient.
  void set_propagate_input_grad(bool v) { propagate_input_grad_ = v; }

 private:
  int in_channels_, out_channels_, kernel_, stride_, pad_;
  bool has_bias_;
  bool propagate_input_grad_ = true;
  Parameter weight_;  // (in*kernel*kernel) x out
  Parameter bias_;    // 1 x out
  Matrix cols_;
  int in_batch_ = 0, in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
};

class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features, Rng& rng, std::string name);

  Tensor Forward(const Tensor& x, Mode mode) override;
  Tensor Backward(const Tensor& grad_out) override;
  void CollectParameters(std::vector<Parameter*>& out) override;
  std::string Describe() const override;

 private:
  Parameter weight_;  // in x out
  Parameter bias_;
  Matrix input_;
};

class ReLU final : public Layer {
 public:
  Tensor Forward(const Tensor& x, Mode mode) override;
  Tensor Backward(const Tensor& grad_out) override;
  std::string Describe() const override { return "relu"; }

 private:
  Matrix output_;
};

class MaxPool2d final : public Layer {
 public:
  MaxPool2d(int kernel, int stride, int pad = 0)
      : kernel_(kernel), stride_(stride), pad_(pad) {}

  Tensor Forward(const Tensor& x, Mode mode) override;
  Tensor Backward(const Tensor& grad_out) override;
  std::string Describe() const override;

 private:
  int kernel_, stride_, pad_;
  IndexMatrix argmax_;
  int in_batch_ = 0, in_h_ = 0, in_w_ = 0, in_cols_ = 0;
};

// Normalizes every channel over all remaining axes, so the same layer serves
// as BatchNorm1d (H = W = 1) and BatchNorm2d.
class BatchNorm final : public Layer {
 public:
  BatchNorm(int channels, std::string name, Scalar momentum = 0.1f,
            Scalar eps = 1e-5f);

  Tensor Forward(const Tensor& x, Mode mode) override;
  Tensor Backward(const Tensor& grad_out) override;
  void CollectParameters(std::vector<Parameter*>& out) override;
  void CollectBuffers(std::vector<Matrix*>& out) override;
  std::string Describe() const override;

 private:
  Scalar momentum_, eps_;
  Parameter gamma_, beta_;
  Matrix running_mean_, running_var_;
  Matrix normalized_;
  Vector inv_std_;
  Tensor shape_;
  bool eval_ = false;
};

class Flatten final : public Layer {
 public:
  Tensor Forward(const Tensor& x, Mode mode) override;
  Tensor Backward(const Tensor& grad_out) override;
  std::string Describe() const override { return "flatten"; }

 private:
  int channels_ = 0, height_ = 1, width_ = 1;
};

class GlobalAvgPool final : public Layer {
 public:
  Tensor Forward(const Tensor& x, Mode mode) override;
  Tensor Backward(const Tensor& grad_out) override;
  std::string Describe() const override { return "global_avg_pool"; }

 private:
  int height_ = 1, width_ = 1;
};

class Sequential final : public Layer {
 public:
  Sequential() = default;

  Sequential& Add(std::unique_ptr<Layer> layer);
  template <typename L, typename... Args>
  L& Emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor Forward(const Tensor& x, Mode mode) override;
  Tensor Backward(const Tensor& grad_out) override;
  void CollectParameters(std::vector<Parameter*>& out) override;
  void CollectBuffers(std::vector<Matrix*>& out) override;
  std::string Describe() const override;

  size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// conv3x3-bn-relu-conv3x3-bn plus identity (or 1x1 conv-bn projection when
// the shape changes), followed by relu.
class ResidualBlock final : public Layer {
 public:
  ResidualBlock(int in_channels, int out_channels, int stride, Rng& rng,
                const std::string& name);

  Tensor Forward(const Tensor& x, Mode mode) override;
  Tensor Backward(const Tensor& grad_out) override;
  void CollectParameters(std::vector<Parameter*>& out) override;
  void CollectBuffers(std::vector<Matrix*>& out) override;
  std::string Describe() const override;

 private:
  Sequential main_;
  std::unique_ptr<Sequential> projection_;
  ReLU out_relu_;
};

}  // namespace mosr::nn

#endif  // MOSR_NN_LAYERS_HPP_
