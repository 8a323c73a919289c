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

// Stateless forward/backward kernels. Layers in layers.hpp wrap these with a
// forward cache and parameter storage.

#ifndef CMFDA_NN_OPS_HPP_
#define CMFDA_NN_OPS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cmfda/error.hpp"
#include "cmfda/nn/tensor.hpp"

namespace cmfda::nn {

struct Conv2dGeometry {
  std::size_t batch, in_channels, in_h, in_w;
  std::size_t out_channels, kernel_h, kernel_w;
  std::size_t stride, padding;
  std::size_t out_h, out_w;

  std::size_t patch() const { return in_channels * kernel_h * kernel_w; }
  std::size_t out_plane() const { return out_h * out_w; }
};

template <typename T>
Conv2dGeometry conv2d_geometry(const Tensor<T>& input, const Tensor<T>& weights,
                               const Tensor<T>& bias, std::size_t stride, std::size_t padding) {
  if (input.rank() != 4 || weights.rank() != 4 || bias.rank() != 1) {
    throw UsageError("conv2d: expected input [N,C,H,W], weights [K,C,kh,kw], bias [K]");
  }
  if (stride < 1) throw UsageError("conv2d: stride must be >= 1");
  Conv2dGeometry g{};
  g.batch = input.dim(0);
  g.in_channels = input.dim(1);
  g.in_h = input.dim(2);
  g.in_w = input.dim(3);
  g.out_channels = weights.dim(0);
  g.kernel_h = weights.dim(2);
  g.kernel_w = weights.dim(3);
  g.stride = stride;
  g.padding = padding;
  if (weights.dim(1) != g.in_channels) {
    throw UsageError("conv2d: input has " + std::to_string(g.in_channels) +
                     " channels, weights expect " + std::to_string(weights.dim(1)));
  }
  if (bias.dim(0) != g.out_channels) throw UsageError("conv2d: bias length != kernel count");
  if (g.kernel_h > g.in_h + 2 * padding || g.kernel_w > g.in_w + 2 * padding) {
    throw UsageError("conv2d: kernel larger than padded input " + shape_str(input.shape()));
  }
  g.out_h = (g.in_h + 2 * padding - g.kernel_h) / stride + 1;
  g.out_w = (g.in_w + 2 * padding - g.kernel_w) / stride + 1;
  return g;
}

namespace detail {

// cols[r * plane + p], r = (c * kh + i) * kw + j, p = oy * out_w + ox.
template <typename T>
void im2col(const T* image, const Conv2dGeometry& g, T* cols) {
  const std::size_t plane = g.out_plane();
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const T* chan = image + c * g.in_h * g.in_w;
    for (std::size_t i = 0; i < g.kernel_h; ++i) {
      for (std::size_t j = 0; j < g.kernel_w; ++j) {
        T* row = cols + ((c * g.kernel_h + i) * g.kernel_w + j) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto y = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                         static_cast<std::ptrdiff_t>(g.padding);
          T* dst = row + oy * g.out_w;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.in_h)) {
            std::fill(dst, dst + g.out_w, T{0});
            continue;
          }
          const T* src = chan + static_cast<std::size_t>(y) * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto x = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                           static_cast<std::ptrdiff_t>(g.padding);
            dst[ox] = (x < 0 || x >= static_cast<std::ptrdiff_t>(g.in_w))
                          ? T{0}
                          : src[static_cast<std::size_t>(x)];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const Conv2dGeometry& g, T* image) {
  const std::size_t plane = g.out_plane();
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    T* chan = image + c * g.in_h * g.in_w;
    for (std::size_t i = 0; i < g.kernel_h; ++i) {
      for (std::size_t j = 0; j < g.kernel_w; ++j) {
        const T* row = cols + ((c * g.kernel_h + i) * g.kernel_w + j) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto y = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                         static_cast<std::ptrdiff_t>(g.padding);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          T* dst = chan + static_cast<std::size_t>(y) * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto x = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                           static_cast<std::ptrdiff_t>(g.padding);
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
            dst[static_cast<std::size_t>(x)] += row[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 2-D cross-correlation (no kernel flip) with zero padding.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                         std::size_t stride, std::size_t padding) {
  const Conv2dGeometry g = conv2d_geometry(input, weights, bias, stride, padding);
  Tensor<T> out({g.batch, g.out_channels, g.out_h, g.out_w});
  const std::size_t plane = g.out_plane();
  const std::size_t patch = g.patch();
  std::vector<T> cols(patch * plane);
  const T* w = weights.ptr();
  for (std::size_t n = 0; n < g.batch; ++n) {
    detail::im2col(input.ptr() + n * g.in_channels * g.in_h * g.in_w, g, cols.data());
    T* o = out.ptr() + n * g.out_channels * plane;
    for (std::size_t k = 0; k < g.out_channels; ++k) {
      T* orow = o + k * plane;
      std::fill(orow, orow + plane, bias[k]);
      for (std::size_t r = 0; r < patch; ++r) {
        const T wk = w[k * patch + r];
        const T* crow = cols.data() + r * plane;
        for (std::size_t p = 0; p < plane; ++p) orow[p] += wk * crow[p];
      }
    }
  }
  return out;
}

template <typename T>
struct Conv2dGrads {
  Tensor<T> grad_input;
  Tensor<T> grad_weights;
  Tensor<T> grad_bias;
};

/// Exact gradients of conv2d_forward with respect to input, weights and bias.
template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights,
                               const Tensor<T>& bias, const Tensor<T>& grad_out,
                               std::size_t stride, std::size_t padding) {
  const Conv2dGeometry g = conv2d_geometry(input, weights, bias, stride, padding);
  require_shape(grad_out, {g.batch, g.out_channels, g.out_h, g.out_w}, "conv2d_backward");
  Conv2dGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(weights.shape()),
                       Tensor<T>(bias.shape())};
  const std::size_t plane = g.out_plane();
  const std::size_t patch = g.patch();
  const std::size_t image_size = g.in_channels * g.in_h * g.in_w;
  std::vector<T> cols(patch * plane);
  std::vector<T> dcols(patch * plane);
  const T* w = weights.ptr();
  T* gw = grads.grad_weights.ptr();
  T* gb = grads.grad_bias.ptr();
  for (std::size_t n = 0; n < g.batch; ++n) {
    detail::im2col(input.ptr() + n * image_size, g, cols.data());
    std::fill(dcols.begin(), dcols.end(), T{0});
    const T* go = grad_out.ptr() + n * g.out_channels * plane;
    for (std::size_t k = 0; k < g.out_channels; ++k) {
      const T* grow = go + k * plane;
      T bsum{0};
      for (std::size_t p = 0; p < plane; ++p) bsum += grow[p];
      gb[k] += bsum;
      for (std::size_t r = 0; r < patch; ++r) {
        const T* crow = cols.data() + r * plane;
        T acc{0};
        for (std::size_t p = 0; p < plane; ++p) acc += grow[p] * crow[p];
        gw[k * patch + r] += acc;
        const T wk = w[k * patch + r];
        T* drow = dcols.data() + r * plane;
        for (std::size_t p = 0; p < plane; ++p) drow[p] += wk * grow[p];
      }
    }
    detail::col2im_add(dcols.data(), g, grads.grad_input.ptr() + n * image_size);
  }
  return grads;
}

/// output = input . weights + bias, input [N,D], weights [D,M], bias [M].
template <typename T>
Tensor<T> fc_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
  if (input.rank() != 2 || weights.rank() != 2 || bias.rank() != 1 ||
      input.dim(1) != weights.dim(0) || bias.dim(0) != weights.dim(1)) {
    throw UsageError("fc: incompatible shapes input " + shape_str(input.shape()) + ", weights " +
                     shape_str(weights.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const std::size_t n_rows = input.dim(0), d_in = weights.dim(0), d_out = weights.dim(1);
  Tensor<T> out({n_rows, d_out});
  for (std::size_t n = 0; n < n_rows; ++n) {
    T* o = out.ptr() + n * d_out;
    std::copy(bias.ptr(), bias.ptr() + d_out, o);
    const T* x = input.ptr() + n * d_in;
    for (std::size_t d = 0; d < d_in; ++d) {
      const T xv = x[d];
      const T* wrow = weights.ptr() + d * d_out;
      for (std::size_t m = 0; m < d_out; ++m) o[m] += xv * wrow[m];
    }
  }
  return out;
}

template <typename T>
struct FcGrads {
  Tensor<T> grad_input;
  Tensor<T> grad_weights;
  Tensor<T> grad_bias;
};

template <typename T>
FcGrads<T> fc_backward(const Tensor<T>& input, const Tensor<T>& weights,
                       const Tensor<T>& grad_out) {
  const std::size_t n_rows = input.dim(0), d_in = weights.dim(0), d_out = weights.dim(1);
  require_shape(grad_out, {n_rows, d_out}, "fc_backward");
  FcGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(weights.shape()), Tensor<T>({d_out})};
  for (std::size_t n = 0; n < n_rows; ++n) {
    const T* g = grad_out.ptr() + n * d_out;
    const T* x = input.ptr() + n * d_in;
    T* gx = grads.grad_input.ptr() + n * d_in;
    for (std::size_t m = 0; m < d_out; ++m) grads.grad_bias[m] += g[m];
    for (std::size_t d = 0; d < d_in; ++d) {
      const T* wrow = weights.ptr() + d * d_out;
      T* gwrow = grads.grad_weights.ptr() + d * d_out;
      const T xv = x[d];
      T acc{0};
      for (std::size_t m = 0; m < d_out; ++m) {
        gwrow[m] += xv * g[m];
        acc += wrow[m] * g[m];
      }
      gx[d] = acc;
    }
  }
  return grads;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T{0} ? input[i] : T{0};
  return out;
}

/// Gradient passes where the forward input was strictly positive.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out) {
  require_shape(grad_out, input.shape(), "relu_backward");
  Tensor<T> gin(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) gin[i] = input[i] > T{0} ? grad_out[i] : T{0};
  return gin;
}

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

/// Non-overlapping max pooling (window == stride == size), floor semantics.
/// Ties resolve to the first maximum in row-major window order.
template <typename T>
MaxPoolResult<T> maxpool2d_forward(const Tensor<T>& input, std::size_t size) {
  if (input.rank() != 4) throw UsageError("maxpool2d: expected [N,C,H,W] input");
  if (size < 1 || input.dim(2) < size || input.dim(3) < size) {
    throw UsageError("maxpool2d: window " + std::to_string(size) + " does not fit " +
                     shape_str(input.shape()));
  }
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oh = h / size, ow = w / size;
  MaxPoolResult<T> r{Tensor<T>({n, c, oh, ow}), std::vector<std::size_t>(n * c * oh * ow)};
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = base + (oy * size) * w + ox * size;
        for (std::size_t i = 0; i < size; ++i) {
          for (std::size_t j = 0; j < size; ++j) {
            const std::size_t idx = base + (oy * size + i) * w + ox * size + j;
            if (input[idx] > input[best]) best = idx;
          }
        }
        r.output[o] = input[best];
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Shape& input_shape, std::span<const std::size_t> argmax,
                             const Tensor<T>& grad_out) {
  if (grad_out.size() != argmax.size()) throw UsageError("maxpool2d_backward: shape mismatch");
  Tensor<T> gin(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) gin[argmax[o]] += grad_out[o];
  return gin;
}

/// Row-wise softmax of [N,K], max-subtracted.
template <typename T>
Tensor<T> softmax_forward(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw UsageError("softmax: expected [N,K]");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor<T> out(logits.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const T* z = logits.ptr() + r * k;
    T* p = out.ptr() + r * k;
    const T zmax = *std::max_element(z, z + k);
    T sum{0};
    for (std::size_t j = 0; j < k; ++j) sum += (p[j] = std::exp(z[j] - zmax));
    for (std::size_t j = 0; j < k; ++j) p[j] /= sum;
  }
  return out;
}

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& probs, const Tensor<T>& grad_out) {
  require_shape(grad_out, probs.shape(), "softmax_backward");
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  Tensor<T> gin(probs.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const T* p = probs.ptr() + r * k;
    const T* g = grad_out.ptr() + r * k;
    T dot{0};
    for (std::size_t j = 0; j < k; ++j) dot += p[j] * g[j];
    for (std::size_t j = 0; j < k; ++j) gin[r * k + j] = p[j] * (g[j] - dot);
  }
  return gin;
}

/// Identity.
template <typename T>
Tensor<T> grl_forward(const Tensor<T>& input) {
  return input;
}

/// Returns -lambda * grad_out elementwise.
template <typename T>
Tensor<T> grl_backward(const Tensor<T>& grad_out, T lambda) {
  Tensor<T> gin(grad_out.shape());
  for (std::size_t i = 0; i < grad_out.size(); ++i) gin[i] = -(lambda * grad_out[i]);
  return gin;
}

template <typename T>
struct CrossEntropyResult {
  T loss;
  Tensor<T> grad_logits;
};

/// Mean over rows of -log softmax(logits)[label]; gradient (softmax - onehot) / N.
template <typename T>
CrossEntropyResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size() || labels.empty()) {
    throw UsageError("softmax_cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  CrossEntropyResult<T> r{T{0}, Tensor<T>(logits.shape())};
  const T inv_n = T{1} / static_cast<T>(n);
  for (std::size_t row = 0; row < n; ++row) {
    const int label = labels[row];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw DataError("softmax_cross_entropy: label " + std::to_string(label) +
                      " outside [0," + std::to_string(k) + ")");
    }
    const T* z = logits.ptr() + row * k;
    T* g = r.grad_logits.ptr() + row * k;
    const T zmax = *std::max_element(z, z + k);
    T sum{0};
    for (std::size_t j = 0; j < k; ++j) sum += (g[j] = std::exp(z[j] - zmax));
    const T log_sum = std::log(sum);
    r.loss += log_sum - (z[label] - zmax);
    for (std::size_t j = 0; j < k; ++j) g[j] = g[j] / sum * inv_n;
    g[label] -= inv_n;
  }
  r.loss *= inv_n;
  return r;
}

}  // namespace cmfda::nn

#endif  // CMFDA_NN_OPS_HPP_
