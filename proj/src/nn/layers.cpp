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

#include "mosr/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include <boost/random/uniform_real_distribution.hpp>

namespace mosr::nn {
namespace {

// Same bound PyTorch uses for its default conv/linear initialization.
void UniformInit(Matrix& m, Scalar bound, Rng& rng) {
  boost::random::uniform_real_distribution<Scalar> dist(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  }
}

Parameter MakeParameter(std::string name, int rows, int cols) {
  Parameter p;
  p.name = std::move(name);
  p.value = Matrix::Zero(rows, cols);
  p.grad = Matrix::Zero(rows, cols);
  return p;
}

}  // namespace

Tensor Tensor::Zeros(int channels, int batch, int height, int width) {
  Tensor t;
  t.data = Matrix::Zero(static_cast<Eigen::Index>(batch) * height * width, channels);
  t.batch = batch;
  t.height = height;
  t.width = width;
  return t;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride,
               int pad, bool bias, Rng& rng, std::string name)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      has_bias_(bias) {
  const int fan_in = in_channels * kernel * kernel;
  weight_ = MakeParameter(name + ".weight", fan_in, out_channels);
  const Scalar bound = 1.0f / std::sqrt(static_cast<Scalar>(fan_in));
  UniformInit(weight_.value, bound, rng);
  if (has_bias_) {
    bias_ = MakeParameter(name + ".bias", 1, out_channels);
    UniformInit(bias_.value, bound, rng);
  }
}

Tensor Conv2d::Forward(const Tensor& x, Mode mode) {
  (void)mode;
  if (x.channels() != in_channels_) {
    throw std::invalid_argument("conv: expected " + std::to_string(in_channels_) +
                                " input channels, got " +
                                std::to_string(x.channels()));
  }
  in_batch_ = x.batch;
  in_h_ = x.height;
  in_w_ = x.width;
  out_h_ = (in_h_ + 2 * pad_ - kernel_) / stride_ + 1;
  out_w_ = (in_w_ + 2 * pad_ - kernel_) / stride_ + 1;
  if (out_h_ <= 0 || out_w_ <= 0) {
    throw std::invalid_argument("conv: input smaller than kernel");
  }

  // cols_ row j = output position (n, oy, ox); column r = (c, ky, kx).
  const Eigen::Index rows = static_cast<Eigen::Index>(in_batch_) * out_h_ * out_w_;
  cols_.resize(rows, static_cast<Eigen::Index>(in_channels_) * kernel_ * kernel_);
  const size_t in_plane = static_cast<size_t>(in_h_) * in_w_;
  for (int c = 0; c < in_channels_; ++c) {
    const Scalar* plane = x.data.col(c).data();
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        Scalar* dst = cols_.col((c * kernel_ + ky) * kernel_ + kx).data();
        for (int n = 0; n < in_batch_; ++n) {
          const Scalar* img = plane + n * in_plane;
          for (int oy = 0; oy < out_h_; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= in_h_) {
              std::memset(dst, 0, sizeof(Scalar) * out_w_);
              dst += out_w_;
              continue;
            }
            const Scalar* row = img + static_cast<size_t>(iy) * in_w_;
            if (stride_ == 1) {
              // ix = ox - pad + kx; copy the in-range span in one go.
              const int lo = std::max(0, pad_ - kx);
              const int hi = std::min(out_w_, in_w_ + pad_ - kx);
              if (lo > 0) std::memset(dst, 0, sizeof(Scalar) * lo);
              if (hi > lo) {
                std::memcpy(dst + lo, row + lo - pad_ + kx, sizeof(Scalar) * (hi - lo));
              }
              if (hi < out_w_) {
                std::memset(dst + std::max(hi, lo), 0,
                            sizeof(Scalar) * (out_w_ - std::max(hi, lo)));
              }
            } else {
              for (int ox = 0; ox < out_w_; ++ox) {
                const int ix = ox * stride_ - pad_ + kx;
                dst[ox] = (ix < 0 || ix >= in_w_) ? 0.0f : row[ix];
              }
            }
            dst += out_w_;
          }
        }
      }
    }
  }

  Tensor y;
  y.batch = in_batch_;
  y.height = out_h_;
  y.width = out_w_;
  y.data.noalias() = cols_ * weight_.value;
  if (has_bias_) y.data.rowwise() += bias_.value.row(0);
  return y;
}

Tensor Conv2d::Backward(const Tensor& grad_out) {
  weight_.grad.noalias() += cols_.transpose() * grad_out.data;
  if (has_bias_) bias_.grad += grad_out.data.colwise().sum();
  if (!propagate_input_grad_) return Tensor{};

  Matrix dcols;
  dcols.noalias() = grad_out.data * weight_.value.transpose();
  Tensor dx = Tensor::Zeros(in_channels_, in_batch_, in_h_, in_w_);
  const size_t in_plane = static_cast<size_t>(in_h_) * in_w_;
  for (int c = 0; c < in_channels_; ++c) {
    Scalar* plane = dx.data.col(c).data();
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        const Scalar* src = dcols.col((c * kernel_ + ky) * kernel_ + kx).data();
        for (int n = 0; n < in_batch_; ++n) {
          Scalar* img = plane + n * in_plane;
          for (int oy = 0; oy < out_h_; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy >= 0 && iy < in_h_) {
              Scalar* row = img + static_cast<size_t>(iy) * in_w_;
              for (int ox = 0; ox < out_w_; ++ox) {
                const int ix = ox * stride_ - pad_ + kx;
                if (ix >= 0 && ix < in_w_) row[ix] += src[ox];
              }
            }
            src += out_w_;
          }
        }
      }
    }
  }
  return dx;
}

void Conv2d::CollectParameters(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

std::string Conv2d::Describe() const {
  return "conv(" + std::to_string(in_channels_) + "->" +
         std::to_string(out_channels_) + ", k" + std::to_string(kernel_) +
         " s" + std::to_string(stride_) + " p" + std::to_string(pad_) + ")";
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, Rng& rng, std::string name) {
  weight_ = MakeParameter(name + ".weight", in_features, out_features);
  bias_ = MakeParameter(name + ".bias", 1, out_features);
  const Scalar bound = 1.0f / std::sqrt(static_cast<Scalar>(in_features));
  UniformInit(weight_.value, bound, rng);
  UniformInit(bias_.value, bound, rng);
}

Tensor Linear::Forward(const Tensor& x, Mode mode) {
  (void)mode;
  if (x.spatial() != 1 || x.channels() != weight_.value.rows()) {
    throw std::invalid_argument(
        "linear: expected " + std::to_string(weight_.value.rows()) +
        " features, got " + std::to_string(x.channels() * x.spatial()));
  }
  input_ = x.data;
  Tensor y;
  y.batch = x.batch;
  y.data.noalias() = x.data * weight_.value;
  y.data.rowwise() += bias_.value.row(0);
  return y;
}

Tensor Linear::Backward(const Tensor& grad_out) {
  weight_.grad.noalias() += input_.transpose() * grad_out.data;
  bias_.grad += grad_out.data.colwise().sum();
  Tensor dx;
  dx.batch = grad_out.batch;
  dx.data.noalias() = grad_out.data * weight_.value.transpose();
  return dx;
}

void Linear::CollectParameters(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

std::string Linear::Describe() const {
  return "linear(" + std::to_string(weight_.value.rows()) + "->" +
         std::to_string(weight_.value.cols()) + ")";
}

// ---------------------------------------------------------------- ReLU

Tensor ReLU::Forward(const Tensor& x, Mode mode) {
  (void)mode;
  Tensor y;
  y.batch = x.batch;
  y.height = x.height;
  y.width = x.width;
  y.data = x.data.cwiseMax(0.0f);
  output_ = y.data;
  return y;
}

Tensor ReLU::Backward(const Tensor& grad_out) {
  Tensor dx;
  dx.batch = grad_out.batch;
  dx.height = grad_out.height;
  dx.width = grad_out.width;
  dx.data = (output_.array() > 0.0f).select(grad_out.data.array(), 0.0f).matrix();
  return dx;
}

// ---------------------------------------------------------------- MaxPool2d

Tensor MaxPool2d::Forward(const Tensor& x, Mode mode) {
  (void)mode;
  in_batch_ = x.batch;
  in_h_ = x.height;
  in_w_ = x.width;
  in_cols_ = static_cast<int>(x.data.rows());
  const int out_h = (in_h_ + 2 * pad_ - kernel_) / stride_ + 1;
  const int out_w = (in_w_ + 2 * pad_ - kernel_) / stride_ + 1;
  const int channels = x.channels();

  Tensor y = Tensor::Zeros(channels, in_batch_, out_h, out_w);
  argmax_.resize(y.data.rows(), channels);
  for (int c = 0; c < channels; ++c) {
    const Scalar* in = x.data.col(c).data();
    Scalar* out = y.data.col(c).data();
    int32_t* arg = argmax_.col(c).data();
    for (int n = 0; n < in_batch_; ++n) {
      const int32_t base = n * in_h_ * in_w_;
      for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
          Scalar best = -std::numeric_limits<Scalar>::infinity();
          int32_t best_at = -1;
          for (int ky = 0; ky < kernel_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= in_h_) continue;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= in_w_) continue;
              const int32_t at = base + iy * in_w_ + ix;
              if (in[at] > best) {
                best = in[at];
                best_at = at;
              }
            }
          }
          *out++ = best;
          *arg++ = best_at;
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2d::Backward(const Tensor& grad_out) {
  Tensor dx = Tensor::Zeros(grad_out.channels(), in_batch_, in_h_, in_w_);
  for (Eigen::Index c = 0; c < grad_out.data.cols(); ++c) {
    Scalar* d = dx.data.col(c).data();
    const Scalar* g = grad_out.data.col(c).data();
    const int32_t* arg = argmax_.col(c).data();
    for (Eigen::Index j = 0; j < grad_out.data.rows(); ++j) d[arg[j]] += g[j];
  }
  return dx;
}

std::string MaxPool2d::Describe() const {
  return "maxpool(k" + std::to_string(kernel_) + " s" + std::to_string(stride_) +
         ")";
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(int channels, std::string name, Scalar momentum, Scalar eps)
    : momentum_(momentum), eps_(eps) {
  gamma_ = MakeParameter(name + ".gamma", 1, channels);
  gamma_.value.setOnes();
  beta_ = MakeParameter(name + ".beta", 1, channels);
  running_mean_ = Matrix::Zero(1, channels);
  running_var_ = Matrix::Ones(1, channels);
}

Tensor BatchNorm::Forward(const Tensor& x, Mode mode) {
  const Eigen::Index count = x.data.rows();
  Tensor y;
  y.batch = x.batch;
  y.height = x.height;
  y.width = x.width;
  shape_.batch = x.batch;
  shape_.height = x.height;
  shape_.width = x.width;
  eval_ = mode == Mode::kEval;
  if (eval_) {
    const RowVector inv =
        (running_var_.row(0).array() + eps_).rsqrt().matrix();
    inv_std_ = inv.transpose();
    normalized_ = (x.data.rowwise() - running_mean_.row(0)) * inv.asDiagonal();
    y.data = (normalized_ * gamma_.value.row(0).asDiagonal()).rowwise() +
             beta_.value.row(0);
    return y;
  }
  if (count < 2) {
    throw std::invalid_argument("batch norm needs at least 2 values per channel");
  }
  const RowVector mean = x.data.colwise().mean();
  normalized_ = x.data.rowwise() - mean;
  const RowVector var =
      normalized_.array().square().colwise().sum().matrix() / static_cast<Scalar>(count);
  inv_std_ = (var.array() + eps_).rsqrt().matrix().transpose();
  normalized_ = normalized_ * inv_std_.asDiagonal();
  y.data = (normalized_ * gamma_.value.row(0).asDiagonal()).rowwise() +
           beta_.value.row(0);

  const Scalar unbias = static_cast<Scalar>(count) / static_cast<Scalar>(count - 1);
  running_mean_.row(0) = (1.0f - momentum_) * running_mean_.row(0) + momentum_ * mean;
  running_var_.row(0) =
      (1.0f - momentum_) * running_var_.row(0) + (momentum_ * unbias) * var;
  return y;
}

Tensor BatchNorm::Backward(const Tensor& grad_out) {
  const Scalar count = static_cast<Scalar>(grad_out.data.rows());
  gamma_.grad.row(0) += grad_out.data.cwiseProduct(normalized_).colwise().sum();
  beta_.grad.row(0) += grad_out.data.colwise().sum();

  const Matrix dnorm = grad_out.data * gamma_.value.row(0).asDiagonal();
  Tensor dx;
  dx.batch = shape_.batch;
  dx.height = shape_.height;
  dx.width = shape_.width;
  if (eval_) {
    // Running statistics are constants.
    dx.data = dnorm * inv_std_.asDiagonal();
    return dx;
  }
  const RowVector sum_d = dnorm.colwise().sum();
  const RowVector sum_dn = dnorm.cwiseProduct(normalized_).colwise().sum();
  dx.data = count * dnorm;
  dx.data.rowwise() -= sum_d;
  dx.data -= normalized_ * sum_dn.asDiagonal();
  dx.data = dx.data * (inv_std_ / count).asDiagonal();
  return dx;
}

void BatchNorm::CollectParameters(std::vector<Parameter*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm::CollectBuffers(std::vector<Matrix*>& out) {
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

std::string BatchNorm::Describe() const {
  return "batchnorm(" + std::to_string(gamma_.value.cols()) + ")";
}

// ---------------------------------------------------------------- Flatten

// Feature order is (c, y, x), the usual NCHW flattening.
Tensor Flatten::Forward(const Tensor& x, Mode mode) {
  (void)mode;
  channels_ = x.channels();
  height_ = x.height;
  width_ = x.width;
  const int spatial = x.spatial();
  Tensor y;
  y.batch = x.batch;
  y.data.resize(x.batch, static_cast<Eigen::Index>(channels_) * spatial);
  for (int c = 0; c < channels_; ++c) {
    for (int s = 0; s < spatial; ++s) {
      for (int n = 0; n < x.batch; ++n) {
        y.data(n, c * spatial + s) = x.data(static_cast<Eigen::Index>(n) * spatial + s, c);
      }
    }
  }
  return y;
}

Tensor Flatten::Backward(const Tensor& grad_out) {
  const int spatial = height_ * width_;
  Tensor dx = Tensor::Zeros(channels_, grad_out.batch, height_, width_);
  for (int c = 0; c < channels_; ++c) {
    for (int s = 0; s < spatial; ++s) {
      for (int n = 0; n < grad_out.batch; ++n) {
        dx.data(static_cast<Eigen::Index>(n) * spatial + s, c) =
            grad_out.data(n, c * spatial + s);
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::Forward(const Tensor& x, Mode mode) {
  (void)mode;
  height_ = x.height;
  width_ = x.width;
  const int spatial = x.spatial();
  Tensor y = Tensor::Zeros(x.channels(), x.batch);
  for (int n = 0; n < x.batch; ++n) {
    y.data.row(n) =
        x.data.middleRows(static_cast<Eigen::Index>(n) * spatial, spatial).colwise().mean();
  }
  return y;
}

Tensor GlobalAvgPool::Backward(const Tensor& grad_out) {
  const int spatial = height_ * width_;
  Tensor dx = Tensor::Zeros(grad_out.channels(), grad_out.batch, height_, width_);
  const Scalar scale = 1.0f / static_cast<Scalar>(spatial);
  for (int n = 0; n < grad_out.batch; ++n) {
    dx.data.middleRows(static_cast<Eigen::Index>(n) * spatial, spatial).rowwise() =
        grad_out.data.row(n) * scale;
  }
  return dx;
}

// ---------------------------------------------------------------- Sequential

Sequential& Sequential::Add(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

Tensor Sequential::Forward(const Tensor& x, Mode mode) {
  Tensor h = x;
  for (auto& layer : layers_) h = layer->Forward(h, mode);
  return h;
}

Tensor Sequential::Backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = (*it)->Backward(g);
  }
  return g;
}

void Sequential::CollectParameters(std::vector<Parameter*>& out) {
  for (auto& layer : layers_) layer->CollectParameters(out);
}

void Sequential::CollectBuffers(std::vector<Matrix*>& out) {
  for (auto& layer : layers_) layer->CollectBuffers(out);
}

std::string Sequential::Describe() const {
  std::string s = "[";
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (i) s += ", ";
    s += layers_[i]->Describe();
  }
  return s + "]";
}

// ---------------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(int in_channels, int out_channels, int stride,
                             Rng& rng, const std::string& name) {
  main_.Emplace<Conv2d>(in_channels, out_channels, 3, stride, 1, false, rng,
                        name + ".conv1");
  main_.Emplace<BatchNorm>(out_channels, name + ".bn1");
  main_.Emplace<ReLU>();
  main_.Emplace<Conv2d>(out_channels, out_channels, 3, 1, 1, false, rng,
                        name + ".conv2");
  main_.Emplace<BatchNorm>(out_channels, name + ".bn2");
  if (stride != 1 || in_channels != out_channels) {
    projection_ = std::make_unique<Sequential>();
    projection_->Emplace<Conv2d>(in_channels, out_channels, 1, stride, 0, false,
                                 rng, name + ".proj");
    projection_->Emplace<BatchNorm>(out_channels, name + ".proj_bn");
  }
}

Tensor ResidualBlock::Forward(const Tensor& x, Mode mode) {
  Tensor h = main_.Forward(x, mode);
  if (projection_) {
    h.data += projection_->Forward(x, mode).data;
  } else {
    h.data += x.data;
  }
  return out_relu_.Forward(h, mode);
}

Tensor ResidualBlock::Backward(const Tensor& grad_out) {
  const Tensor g = out_relu_.Backward(grad_out);
  Tensor dx = main_.Backward(g);
  if (projection_) {
    dx.data += projection_->Backward(g).data;
  } else {
    dx.data += g.data;
  }
  return dx;
}

void ResidualBlock::CollectParameters(std::vector<Parameter*>& out) {
  main_.CollectParameters(out);
  if (projection_) projection_->CollectParameters(out);
}

void ResidualBlock::CollectBuffers(std::vector<Matrix*>& out) {
  main_.CollectBuffers(out);
  if (projection_) projection_->CollectBuffers(out);
}

std::string ResidualBlock::Describe() const {
  return "residual" + main_.Describe() + (projection_ ? "+proj" : "");
}

}  // namespace mosr::nn
