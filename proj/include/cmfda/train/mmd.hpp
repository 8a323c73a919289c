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

#ifndef CMFDA_TRAIN_MMD_HPP_
#define CMFDA_TRAIN_MMD_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cmfda/error.hpp"
#include "cmfda/nn/tensor.hpp"

namespace cmfda::train {

enum class KernelKind { kLinear, kRbf };

/// kLinear: identity feature map. kRbf: exp(-|x-y|^2 / (2 bandwidth^2)).
struct MmdKernel {
  KernelKind kind = KernelKind::kLinear;
  double bandwidth = 1.0;
};

inline KernelKind parse_kernel(const std::string& s) {
  if (s == "linear" || s == "identity") return KernelKind::kLinear;
  if (s == "rbf") return KernelKind::kRbf;
  throw ConfigError("unknown mmd kernel '" + s + "'");
}

inline const char* kernel_name(KernelKind k) { return k == KernelKind::kLinear ? "linear" : "rbf"; }

template <typename T>
struct Mmd2Result {
  double mmd2 = 0;
  nn::Tensor<T> grad_source;  // d mmd2 / d source rows
  nn::Tensor<T> grad_target;
};

namespace detail {

template <typename T>
void check_sets(const nn::Tensor<T>& s, const nn::Tensor<T>& t) {
  if (s.rank() != 2 || t.rank() != 2 || s.dim(1) != t.dim(1)) {
    throw UsageError("mmd: feature sets must be [Ns,D] and [Nt,D], got " + nn::shape_str(s.shape()) +
                     " and " + nn::shape_str(t.shape()));
  }
  if (s.dim(0) == 0 || t.dim(0) == 0) throw UsageError("mmd: empty feature set");
}

template <typename T>
std::vector<double> row_mean(const nn::Tensor<T>& x) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<double> m(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) m[k] += x.at(i, k);
  }
  for (double& v : m) v /= static_cast<double>(n);
  return m;
}

template <typename T>
double sq_dist(const nn::Tensor<T>& a, std::size_t i, const nn::Tensor<T>& b, std::size_t j) {
  double acc = 0;
  for (std::size_t k = 0; k < a.dim(1); ++k) {
    const double d = static_cast<double>(a.at(i, k)) - static_cast<double>(b.at(j, k));
    acc += d * d;
  }
  return acc;
}

// Adds coef * sum_j k(a_i, b_j) * (a_i - b_j) / h^2 into grad row i, for every i.
template <typename T>
double rbf_block(const nn::Tensor<T>& a, const nn::Tensor<T>& b, double h2, double coef,
                 std::vector<double>* grad_a) {
  const std::size_t d = a.dim(1);
  double sum = 0;
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < b.dim(0); ++j) {
      const double k = std::exp(-sq_dist(a, i, b, j) / (2 * h2));
      sum += k;
      if (grad_a) {
        for (std::size_t c = 0; c < d; ++c) {
          (*grad_a)[i * d + c] += coef * k * (static_cast<double>(a.at(i, c)) - b.at(j, c)) / h2;
        }
      }
    }
  }
  return sum;
}

}  // namespace detail

/// Squared MMD and its gradient with respect to both feature sets.
template <typename T>
Mmd2Result<T> mmd2_with_grad(const nn::Tensor<T>& s, const nn::Tensor<T>& t, const MmdKernel& kernel) {
  detail::check_sets(s, t);
  const std::size_t ns = s.dim(0), nt = t.dim(0), d = s.dim(1);
  Mmd2Result<T> r{0, nn::Tensor<T>(s.shape()), nn::Tensor<T>(t.shape())};
  if (kernel.kind == KernelKind::kLinear) {
    const auto ms = detail::row_mean(s), mt = detail::row_mean(t);
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = ms[k] - mt[k];
      r.mmd2 += diff * diff;
      const T gs = static_cast<T>(2 * diff / static_cast<double>(ns));
      const T gt = static_cast<T>(-2 * diff / static_cast<double>(nt));
      for (std::size_t i = 0; i < ns; ++i) r.grad_source.at(i, k) = gs;
      for (std::size_t j = 0; j < nt; ++j) r.grad_target.at(j, k) = gt;
    }
    return r;
  }
  if (!(kernel.bandwidth > 0)) throw ConfigError("mmd: rbf bandwidth must be > 0");
  const double h2 = kernel.bandwidth * kernel.bandwidth;
  const double nss = static_cast<double>(ns) * ns, ntt = static_cast<double>(nt) * nt;
  const double nst = static_cast<double>(ns) * nt;
  std::vector<double> gs(ns * d, 0.0), gt(nt * d, 0.0);
  // d k(x,y)/dx = -k (x - y) / h^2; each within-set pair appears twice.
  const double kss = detail::rbf_block(s, s, h2, -2.0 / nss, &gs);
  const double ktt = detail::rbf_block(t, t, h2, -2.0 / ntt, &gt);
  const double kst = detail::rbf_block(s, t, h2, 2.0 / nst, &gs);
  detail::rbf_block(t, s, h2, 2.0 / nst, &gt);
  r.mmd2 = kss / nss + ktt / ntt - 2 * kst / nst;
  for (std::size_t i = 0; i < gs.size(); ++i) r.grad_source[i] = static_cast<T>(gs[i]);
  for (std::size_t i = 0; i < gt.size(); ++i) r.grad_target[i] = static_cast<T>(gt[i]);
  return r;
}

/// MMD distance (non-negative): the norm of the mean-embedding difference.
template <typename T>
double compute_mmd(const nn::Tensor<T>& s, const nn::Tensor<T>& t, const MmdKernel& kernel = {}) {
  detail::check_sets(s, t);
  if (kernel.kind == KernelKind::kLinear) {
    const auto ms = detail::row_mean(s), mt = detail::row_mean(t);
    double acc = 0;
    for (std::size_t k = 0; k < ms.size(); ++k) acc += (ms[k] - mt[k]) * (ms[k] - mt[k]);
    return std::sqrt(acc);
  }
  return std::sqrt(std::max(0.0, mmd2_with_grad(s, t, kernel).mmd2));
}

}  // namespace cmfda::train

#endif  // CMFDA_TRAIN_MMD_HPP_
