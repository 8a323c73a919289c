// Copyright 2026 The cmfda Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CMFDA_NN_LAYERS_HPP_
#define CMFDA_NN_LAYERS_HPP_

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "cmfda/error.hpp"
#include "cmfda/nn/ops.hpp"
#include "cmfda/nn/tensor.hpp"
#include "cmfda/rng.hpp"

namespace cmfda::nn {

enum class LayerKind { kConv2D, kFullyConnected, kReLU, kMaxPool2D, kFlatten, kGradientReversal, kSoftmax };

inline std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2D: return "conv2d";
    case LayerKind::kFullyConnected: return "fc";
    case LayerKind::kReLU: return "relu";
    case LayerKind::kMaxPool2D: return "maxpool2d";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kGradientReversal: return "grl";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "?";
}

namespace detail {

template <typename T>
const Tensor<T>& cached(const std::optional<Tensor<T>>& cache, std::string_view layer) {
  if (!cache) throw UsageError(std::string(layer) + ": backward called without a cached forward");
  return *cache;
}

/// Kaiming-uniform: U(-b, b), b = sqrt(6 / fan_in).
template <typename T>
void kaiming_uniform(Tensor<T>& t, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace detail

template <typename T>
class Conv2D {
 public:
  static constexpr LayerKind kind = LayerKind::kConv2D;

  Conv2D(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t stride = 1, std::size_t padding = 0)
      : weights_({out_channels, in_channels, kernel, kernel}),
        bias_({out_channels}),
        stride_(stride),
        padding_(padding) {
    if (stride < 1 || kernel < 1) throw ConfigError("conv2d: kernel and stride must be >= 1");
  }

  void init(Rng& rng) { detail::kaiming_uniform(weights_, weights_.size() / weights_.dim(0), rng); }

  Tensor<T> forward(const Tensor<T>& input) {
    Tensor<T> out = conv2d_forward(input, weights_, bias_, stride_, padding_);
    cache_ = input;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) {
    const Tensor<T>& input = detail::cached(cache_, "conv2d");
    auto g = conv2d_backward(input, weights_, bias_, grad_out, stride_, padding_);
    accumulate(weights_, g.grad_weights);
    accumulate(bias_, g.grad_bias);
    cache_.reset();
    return std::move(g.grad_input);
  }

  std::vector<Tensor<T>*> parameters() { return {&weights_, &bias_}; }
  Tensor<T>& weights() { return weights_; }
  Tensor<T>& bias() { return bias_; }
  std::size_t stride() const { return stride_; }
  std::size_t padding() const { return padding_; }

  Shape output_shape(const Shape& in) const {
    if (in.size() != 4 || in[1] != weights_.dim(1) || weights_.dim(2) > in[2] + 2 * padding_ ||
        weights_.dim(3) > in[3] + 2 * padding_) {
      throw ConfigError("conv2d: cannot accept input " + shape_str(in));
    }
    return {in[0], weights_.dim(0), (in[2] + 2 * padding_ - weights_.dim(2)) / stride_ + 1,
            (in[3] + 2 * padding_ - weights_.dim(3)) / stride_ + 1};
  }

 private:
  static void accumulate(Tensor<T>& p, const Tensor<T>& g) {
    auto pg = p.grad();
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[i];
  }

  Tensor<T> weights_;
  Tensor<T> bias_;
  std::size_t stride_;
  std::size_t padding_;
  std::optional<Tensor<T>> cache_;
};

template <typename T>
class FullyConnected {
 public:
  static constexpr LayerKind kind = LayerKind::kFullyConnected;

  FullyConnected(std::size_t in_features, std::size_t out_features)
      : weights_({in_features, out_features}), bias_({out_features}) {}

  void init(Rng& rng) { detail::kaiming_uniform(weights_, weights_.dim(0), rng); }

  Tensor<T> forward(const Tensor<T>& input) {
    Tensor<T> out = fc_forward(input, weights_, bias_);
    cache_ = input;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) {
    const Tensor<T>& input = detail::cached(cache_, "fc");
    auto g = fc_backward(input, weights_, grad_out);
    auto wg = weights_.grad();
    for (std::size_t i = 0; i < wg.size(); ++i) wg[i] += g.grad_weights[i];
    auto bg = bias_.grad();
    for (std::size_t i = 0; i < bg.size(); ++i) bg[i] += g.grad_bias[i];
    cache_.reset();
    return std::move(g.grad_input);
  }

  std::vector<Tensor<T>*> parameters() { return {&weights_, &bias_}; }
  Tensor<T>& weights() { return weights_; }
  Tensor<T>& bias() { return bias_; }

  Shape output_shape(const Shape& in) const {
    if (in.size() != 2 || in[1] != weights_.dim(0)) {
      throw ConfigError("fc: cannot accept input " + shape_str(in) + ", expects width " +
                        std::to_string(weights_.dim(0)));
    }
    return {in[0], weights_.dim(1)};
  }

 private:
  Tensor<T> weights_;
  Tensor<T> bias_;
  std::optional<Tensor<T>> cache_;
};

template <typename T>
class ReLU {
 public:
  static constexpr LayerKind kind = LayerKind::kReLU;

  Tensor<T> forward(const Tensor<T>& input) {
    cache_ = input;
    return relu_forward(input);
  }
  Tensor<T> backward(const Tensor<T>& grad_out) {
    Tensor<T> g = relu_backward(detail::cached(cache_, "relu"), grad_out);
    cache_.reset();
    return g;
  }
  std::vector<Tensor<T>*> parameters() { return {}; }
  Shape output_shape(const Shape& in) const { return in; }

 private:
  std::optional<Tensor<T>> cache_;
};

template <typename T>
class MaxPool2D {
 public:
  static constexpr LayerKind kind = LayerKind::kMaxPool2D;

  explicit MaxPool2D(std::size_t size = 2) : size_(size) {
    if (size < 1) throw ConfigError("maxpool2d: window must be >= 1");
  }

  Tensor<T> forward(const Tensor<T>& input) {
    auto r = maxpool2d_forward(input, size_);
    input_shape_ = input.shape();
    argmax_ = std::move(r.argmax);
    return std::move(r.output);
  }
  Tensor<T> backward(const Tensor<T>& grad_out) {
    if (!argmax_) throw UsageError("maxpool2d: backward called without a cached forward");
    Tensor<T> g = maxpool2d_backward(input_shape_, *argmax_, grad_out);
    argmax_.reset();
    return g;
  }
  std::vector<Tensor<T>*> parameters() { return {}; }
  std::size_t size() const { return size_; }

  Shape output_shape(const Shape& in) const {
    if (in.size() != 4 || in[2] < size_ || in[3] < size_) {
      throw ConfigError("maxpool2d: cannot accept input " + shape_str(in));
    }
    return {in[0], in[1], in[2] / size_, in[3] / size_};
  }

 private:
  std::size_t size_;
  Shape input_shape_;
  std::optional<std::vector<std::size_t>> argmax_;
};

template <typename T>
class Flatten {
 public:
  static constexpr LayerKind kind = LayerKind::kFlatten;

  Tensor<T> forward(const Tensor<T>& input) {
    if (input.rank() < 1) throw UsageError("flatten: rank-0 input");
    input_shape_ = input.shape();
    const std::size_t n = input.dim(0);
    return input.reshaped({n, n ? input.size() / n : 0});
  }
  Tensor<T> backward(const Tensor<T>& grad_out) {
    if (!input_shape_) throw UsageError("flatten: backward called without a cached forward");
    Tensor<T> g = grad_out.reshaped(*input_shape_);
    input_shape_.reset();
    return g;
  }
  std::vector<Tensor<T>*> parameters() { return {}; }
  Shape output_shape(const Shape& in) const {
    std::size_t rest = 1;
    for (std::size_t i = 1; i < in.size(); ++i) rest *= in[i];
    return {in.at(0), rest};
  }

 private:
  std::optional<Shape> input_shape_;
};

/// Identity forward; backward scales the incoming gradient by -lambda.
template <typename T>
class GradientReversal {
 public:
  static constexpr LayerKind kind = LayerKind::kGradientReversal;

  explicit GradientReversal(T lambda = T{1}) { set_lambda(lambda); }

  void set_lambda(T lambda) {
    if (!(lambda >= T{0})) throw UsageError("grl: lambda must be >= 0");
    lambda_ = lambda;
  }
  T lambda() const { return lambda_; }

  Tensor<T> forward(const Tensor<T>& input) {
    armed_ = true;
    return grl_forward(input);
  }
  Tensor<T> backward(const Tensor<T>& grad_out) {
    if (!armed_) throw UsageError("grl: backward called without a cached forward");
    armed_ = false;
    return grl_backward(grad_out, lambda_);
  }
  std::vector<Tensor<T>*> parameters() { return {}; }
  Shape output_shape(const Shape& in) const { return in; }

 private:
  T lambda_{1};
  bool armed_ = false;
};

template <typename T>
class Softmax {
 public:
  static constexpr LayerKind kind = LayerKind::kSoftmax;

  Tensor<T> forward(const Tensor<T>& input) {
    Tensor<T> p = softmax_forward(input);
    cache_ = p;
    return p;
  }
  Tensor<T> backward(const Tensor<T>& grad_out) {
    Tensor<T> g = softmax_backward(detail::cached(cache_, "softmax"), grad_out);
    cache_.reset();
    return g;
  }
  std::vector<Tensor<T>*> parameters() { return {}; }
  Shape output_shape(const Shape& in) const { return in; }

 private:
  std::optional<Tensor<T>> cache_;
};

template <typename T>
using Layer = std::variant<Conv2D<T>, FullyConnected<T>, ReLU<T>, MaxPool2D<T>, Flatten<T>,
                           GradientReversal<T>, Softmax<T>>;

template <typename T>
LayerKind kind_of(const Layer<T>& layer) {
  return std::visit([](const auto& l) { return std::decay_t<decltype(l)>::kind; }, layer);
}

/// Ordered list of layers run front to back, backpropagated back to front.
template <typename T>
class LayerStack {
 public:
  LayerStack() = default;

  template <typename L>
  LayerStack& add(L layer) {
    layers_.emplace_back(std::move(layer));
    return *this;
  }

  void init(Rng& rng) {
    for (auto& layer : layers_) {
      std::visit(
          [&rng](auto& l) {
            if constexpr (requires { l.init(rng); }) l.init(rng);
          },
          layer);
    }
  }

  Tensor<T> forward(Tensor<T> x) {
    for (auto& layer : layers_) x = std::visit([&x](auto& l) { return l.forward(x); }, layer);
    return x;
  }

  Tensor<T> backward(Tensor<T> g) {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      g = std::visit([&g](auto& l) { return l.backward(g); }, *it);
    }
    return g;
  }

  std::vector<Tensor<T>*> parameters() {
    std::vector<Tensor<T>*> out;
    for (auto& layer : layers_) {
      auto p = std::visit([](auto& l) { return l.parameters(); }, layer);
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->size();
    return n;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  /// Shape propagation; throws ConfigError on any inconsistency.
  Shape output_shape(Shape in) const {
    for (const auto& layer : layers_) {
      in = std::visit([&in](const auto& l) { return l.output_shape(in); }, layer);
    }
    return in;
  }

  std::vector<Layer<T>>& layers() { return layers_; }
  const std::vector<Layer<T>>& layers() const { return layers_; }
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<Layer<T>> layers_;
};

}  // namespace cmfda::nn

#endif  // CMFDA_NN_LAYERS_HPP_
