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

#ifndef CMFDA_NN_GRADCHECK_HPP_
#define CMFDA_NN_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "cmfda/error.hpp"
#include "cmfda/nn/tensor.hpp"

namespace cmfda::nn {

/// Central differences (f(p + eps) - f(p - eps)) / 2eps for every coordinate of
/// `param`. The tensor is perturbed in place and restored exactly.
template <typename T>
std::vector<double> finite_difference_gradient(const std::function<double()>& loss_fn,
                                               Tensor<T>& param, double epsilon) {
  if (!(epsilon > 0)) throw UsageError("finite_difference_gradient: epsilon must be > 0");
  std::vector<double> grads(param.size());
  auto data = param.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const T saved = data[i];
    data[i] = static_cast<T>(saved + epsilon);
    const double up = loss_fn();
    data[i] = static_cast<T>(saved - epsilon);
    const double down = loss_fn();
    data[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_difference_gradient: non-finite loss at coordinate " +
                         std::to_string(i));
    }
    // Use the step actually representable in T.
    const double h = static_cast<double>(static_cast<T>(saved + epsilon)) -
                     static_cast<double>(static_cast<T>(saved - epsilon));
    grads[i] = (up - down) / h;
  }
  return grads;
}

/// ||a - b|| / max(||a|| + ||b||, floor), the norm-wise relative error.
inline double relative_error(std::span<const double> a, std::span<const double> b,
                             double floor = 1e-12) {
  if (a.size() != b.size()) throw UsageError("relative_error: length mismatch");
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nb), floor);
}

template <typename T>
std::vector<double> to_double(std::span<const T> v) {
  return std::vector<double>(v.begin(), v.end());
}

}  // namespace cmfda::nn

#endif  // CMFDA_NN_GRADCHECK_HPP_
