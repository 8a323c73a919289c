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

// Randomized finite-difference checks of every layer's analytic backward.
// Used by `cmfda gradcheck` and by the acceptance suite.

#ifndef CMFDA_NN_GRADCHECK_SUITE_HPP_
#define CMFDA_NN_GRADCHECK_SUITE_HPP_

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "cmfda/nn/gradcheck.hpp"
#include "cmfda/nn/layers.hpp"
#include "cmfda/nn/ops.hpp"
#include "cmfda/rng.hpp"

namespace cmfda::nn {

struct GradcheckRow {
  std::string layer;
  std::string precision;  // "f32" / "f64"
  int cases = 0;
  double max_rel_error = 0;
  double tolerance = 0;
  bool pass() const { return cases > 0 && max_rel_error <= tolerance; }
};

namespace detail {

template <typename T>
struct GradcheckTraits;
template <>
struct GradcheckTraits<float> {
  static constexpr double eps = 1e-2;
  static constexpr double tol = 1e-3;
  static constexpr const char* name = "f32";
};
template <>
struct GradcheckTraits<double> {
  static constexpr double eps = 1e-6;
  static constexpr double tol = 1e-6;
  static constexpr const char* name = "f64";
};

template <typename T>
Tensor<T> random_tensor(const Shape& shape, Rng& rng, double lo = -1, double hi = 1) {
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Values bounded away from zero by `margin`, so ReLU kinks are never crossed.
template <typename T>
Tensor<T> kink_free_tensor(const Shape& shape, Rng& rng, double margin) {
  Tensor<T> t(shape);
  for (auto& v : t.data()) {
    const double mag = margin + rng.uniform(0.0, 1.0);
    v = static_cast<T>(rng.uniform() < 0.5 ? -mag : mag);
  }
  return t;
}

// Distinct values spaced by `gap`, shuffled, so every pooling window has a
// unique maximum separated from the runner-up by more than 2 * eps.
template <typename T>
Tensor<T> tie_free_tensor(const Shape& shape, Rng& rng, double gap) {
  Tensor<T> t(shape);
  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<T>((static_cast<double>(order[i]) - t.size() / 2.0) * gap);
  }
  return t;
}

template <typename T>
double weighted_sum(const Tensor<T>& out, const Tensor<T>& weights) {
  double s = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    s += static_cast<double>(out[i]) * static_cast<double>(weights[i]);
  }
  return s;
}

// Checks d/d(input) and d/d(every parameter) of sum(layer(x) * R).
template <typename T, typename L>
double check_layer(L& layer, Tensor<T> input) {
  Rng rng(0xC0FFEE ^ input.size());
  Tensor<T> probe_out = layer.forward(input);
  const Tensor<T> r = random_tensor<T>(probe_out.shape(), rng);
  Tensor<T> grad_in = layer.backward(r);
  for (auto* p : layer.parameters()) p->zero_grad();
  // Re-run so parameter gradients hold exactly one backward.
  layer.forward(input);
  grad_in = layer.backward(r);

  auto loss = [&]() { return weighted_sum(layer.forward(input), r); };
  const double eps = GradcheckTraits<T>::eps;
  double worst = relative_error(to_double<T>(grad_in.data()),
                                finite_difference_gradient<T>(loss, input, eps));
  for (auto* p : layer.parameters()) {
    const auto analytic = to_double<T>(std::span<const T>(p->grad()));
    worst = std::max(worst, relative_error(analytic, finite_difference_gradient<T>(loss, *p, eps)));
  }
  return worst;
}

// The reversal layer is deliberately not the derivative of its forward map;
// its contract is backward == -lambda * (finite-difference gradient of identity).
template <typename T>
double check_grl(T lambda, Tensor<T> input) {
  GradientReversal<T> layer(lambda);
  Rng rng(0xBEEF ^ input.size());
  const Tensor<T> r = random_tensor<T>(input.shape(), rng);
  layer.forward(input);
  const Tensor<T> analytic = layer.backward(r);
  auto loss = [&]() { return weighted_sum(layer.forward(input), r); };
  auto fd = finite_difference_gradient<T>(loss, input, GradcheckTraits<T>::eps);
  for (auto& v : fd) v *= -static_cast<double>(lambda);
  return relative_error(to_double<T>(analytic.data()), fd);
}

template <typename T>
double check_softmax_ce(Tensor<T> logits, const std::vector<int>& labels) {
  const auto analytic = softmax_cross_entropy(logits, labels);
  auto loss = [&]() { return static_cast<double>(softmax_cross_entropy(logits, labels).loss); };
  return relative_error(to_double<T>(analytic.grad_logits.data()),
                        finite_difference_gradient<T>(loss, logits, GradcheckTraits<T>::eps));
}

template <typename T>
std::vector<GradcheckRow> run_suite_for(int cases, std::uint64_t seed) {
  using Traits = GradcheckTraits<T>;
  Rng rng(seed);
  auto pick = [&rng](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
  };
  std::vector<GradcheckRow> rows;
  auto run = [&](const std::string& name, auto&& one_case) {
    GradcheckRow row{name, Traits::name, 0, 0.0, Traits::tol};
    for (int c = 0; c < cases; ++c) {
      row.max_rel_error = std::max(row.max_rel_error, one_case());
      ++row.cases;
    }
    rows.push_back(row);
  };

  run("conv2d", [&] {
    const std::size_t n = pick(1, 2), ch = pick(1, 3), k = pick(1, 4), ks = pick(1, 3);
    const std::size_t stride = pick(1, 2), pad = pick(0, 1);
    const std::size_t h = pick(ks, 7), w = pick(ks, 7);
    Conv2D<T> layer(ch, k, ks, stride, pad);
    Rng init(rng.next_u64());
    layer.init(init);
    for (auto& v : layer.bias().data()) v = static_cast<T>(rng.uniform(-0.5, 0.5));
    return check_layer<T>(layer, random_tensor<T>({n, ch, h, w}, rng));
  });
  run("fc", [&] {
    const std::size_t n = pick(1, 4), d = pick(1, 8), m = pick(1, 6);
    FullyConnected<T> layer(d, m);
    Rng init(rng.next_u64());
    layer.init(init);
    for (auto& v : layer.bias().data()) v = static_cast<T>(rng.uniform(-0.5, 0.5));
    return check_layer<T>(layer, random_tensor<T>({n, d}, rng));
  });
  run("relu", [&] {
    ReLU<T> layer;
    return check_layer<T>(layer, kink_free_tensor<T>({pick(1, 3), pick(1, 4), pick(1, 5), pick(1, 5)},
                                                     rng, 10 * Traits::eps + 0.05));
  });
  run("maxpool2d", [&] {
    const std::size_t size = pick(1, 3);
    MaxPool2D<T> layer(size);
    return check_layer<T>(
        layer, tie_free_tensor<T>({pick(1, 2), pick(1, 3), pick(size, 7), pick(size, 7)}, rng,
                                  10 * Traits::eps + 0.01));
  });
  run("flatten", [&] {
    Flatten<T> layer;
    return check_layer<T>(layer, random_tensor<T>({pick(1, 3), pick(1, 3), pick(1, 4), pick(1, 4)}, rng));
  });
  run("grl", [&] {
    const auto lambda = static_cast<T>(rng.uniform(0.1, 2.0));
    return check_grl<T>(lambda, random_tensor<T>({pick(1, 4), pick(1, 6)}, rng));
  });
  run("softmax", [&] {
    Softmax<T> layer;
    return check_layer<T>(layer, random_tensor<T>({pick(1, 4), pick(2, 5)}, rng, -2, 2));
  });
  run("softmax_ce", [&] {
    const std::size_t n = pick(1, 6), k = pick(2, 5);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.below(k));
    return check_softmax_ce<T>(random_tensor<T>({n, k}, rng, -3, 3), labels);
  });
  return rows;
}

}  // namespace detail

/// Runs every layer type at 32- and 64-bit precision on `cases` random shapes each.
inline std::vector<GradcheckRow> run_gradcheck_suite(int cases = 10, std::uint64_t seed = 2024) {
  auto rows = detail::run_suite_for<float>(cases, seed);
  auto rows64 = detail::run_suite_for<double>(cases, seed);
  rows.insert(rows.end(), rows64.begin(), rows64.end());
  return rows;
}

inline void print_gradcheck_table(std::ostream& os, const std::vector<GradcheckRow>& rows) {
  os << std::left << std::setw(12) << "layer" << std::setw(6) << "prec" << std::right
     << std::setw(7) << "cases" << std::setw(14) << "max_rel_err" << std::setw(11) << "tol"
     << "  result\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(12) << r.layer << std::setw(6) << r.precision << std::right
       << std::setw(7) << r.cases << std::setw(14) << std::scientific << std::setprecision(3)
       << r.max_rel_error << std::setw(11) << r.tolerance << std::defaultfloat << "  "
       << (r.pass() ? "PASS" : "FAIL") << '\n';
  }
}

}  // namespace cmfda::nn

#endif  // CMFDA_NN_GRADCHECK_SUITE_HPP_
