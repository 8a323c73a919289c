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

#ifndef CMFDA_NN_OPTIM_HPP_
#define CMFDA_NN_OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cmfda/error.hpp"
#include "cmfda/nn/tensor.hpp"

namespace cmfda::nn {

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct SgdMomentumParams {
  double lr = 1e-4;
  double momentum = 0.9;
};

namespace detail {

template <typename T>
void check_congruent(std::span<Tensor<T>* const> params, const std::vector<std::vector<T>>& bufs,
                     const char* who) {
  if (bufs.size() != params.size()) {
    throw UsageError(std::string(who) + ": state holds " + std::to_string(bufs.size()) +
                     " buffers for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (bufs[i].size() != params[i]->size()) {
      throw UsageError(std::string(who) + ": state buffer " + std::to_string(i) +
                       " is not congruent with its parameter");
    }
  }
}

template <typename T>
std::vector<std::vector<T>> zero_buffers(std::span<Tensor<T>* const> params) {
  std::vector<std::vector<T>> bufs;
  bufs.reserve(params.size());
  for (auto* p : params) bufs.emplace_back(p->size(), T{0});
  return bufs;
}

}  // namespace detail

/// Bias-corrected Adam. Buffers are created on the first step and then bound
/// to that parameter list's shapes.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamParams hp = {}) : hp_(hp) {
    if (!(hp.lr > 0)) throw ConfigError("adam: lr must be > 0");
  }

  void step(std::span<Tensor<T>* const> params) {
    if (m_.empty() && t_ == 0) {
      m_ = detail::zero_buffers(params);
      v_ = detail::zero_buffers(params);
    }
    detail::check_congruent(params, m_, "adam");
    ++t_;
    const double c1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(hp_.beta1), b2 = static_cast<T>(hp_.beta2);
    const T lr = static_cast<T>(hp_.lr), eps = static_cast<T>(hp_.epsilon);
    const T inv_c1 = static_cast<T>(1.0 / c1), inv_c2 = static_cast<T>(1.0 / c2);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<T>& p = *params[i];
      if (!p.has_grad()) continue;
      auto g = p.grad();
      auto w = p.data();
      std::vector<T>& m = m_[i];
      std::vector<T>& v = v_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = b1 * m[j] + (T{1} - b1) * g[j];
        v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
        const T mhat = m[j] * inv_c1;
        const T vhat = v[j] * inv_c2;
        w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  std::uint64_t steps() const { return t_; }
  const AdamParams& hyperparameters() const { return hp_; }

 private:
  AdamParams hp_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

/// Classical momentum: v <- mu * v - lr * g; p <- p + v.
template <typename T>
class SgdMomentum {
 public:
  explicit SgdMomentum(SgdMomentumParams hp = {}) : hp_(hp) {
    if (!(hp.lr > 0)) throw ConfigError("sgd: lr must be > 0");
    if (!(hp.momentum >= 0 && hp.momentum < 1)) throw ConfigError("sgd: momentum must be in [0,1)");
  }

  void step(std::span<Tensor<T>* const> params) {
    if (velocity_.empty() && t_ == 0) velocity_ = detail::zero_buffers(params);
    detail::check_congruent(params, velocity_, "sgd_momentum");
    ++t_;
    const T mu = static_cast<T>(hp_.momentum), lr = static_cast<T>(hp_.lr);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<T>& p = *params[i];
      if (!p.has_grad()) continue;
      auto g = p.grad();
      auto w = p.data();
      std::vector<T>& vel = velocity_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        vel[j] = mu * vel[j] - lr * g[j];
        w[j] += vel[j];
      }
    }
  }

  std::uint64_t steps() const { return t_; }
  const SgdMomentumParams& hyperparameters() const { return hp_; }

 private:
  SgdMomentumParams hp_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<T>> velocity_;
};

template <typename T>
using OptimizerState = std::variant<Adam<T>, SgdMomentum<T>>;

template <typename T>
void optimizer_step(OptimizerState<T>& state, std::span<Tensor<T>* const> params) {
  std::visit([params](auto& opt) { opt.step(params); }, state);
}

}  // namespace cmfda::nn

#endif  // CMFDA_NN_OPTIM_HPP_
