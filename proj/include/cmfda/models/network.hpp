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

// Two-head topology: a shared feature extractor (theta_f), a 2-way source
// classifier (theta_s) and a 2-way domain classifier (theta_d) that sits
// behind a gradient-reversal layer.

#ifndef CMFDA_MODELS_NETWORK_HPP_
#define CMFDA_MODELS_NETWORK_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmfda/error.hpp"
#include "cmfda/image/raster.hpp"
#include "cmfda/nn/layers.hpp"
#include "cmfda/nn/ops.hpp"
#include "cmfda/nn/tensor.hpp"
#include "cmfda/rng.hpp"

namespace cmfda::models {

/// kMlp is a fully connected extractor for low-dimensional point data.
enum class Preset { kAlexNetSmall, kVgg7Small, kMlp };

inline std::string preset_name(Preset p) {
  switch (p) {
    case Preset::kAlexNetSmall: return "alexnet_small";
    case Preset::kVgg7Small: return "vgg7_small";
    case Preset::kMlp: return "mlp";
  }
  return "?";
}

inline Preset parse_preset(const std::string& s) {
  if (s == "alexnet" || s == "alexnet_small" || s == "AlexNetSmall") return Preset::kAlexNetSmall;
  if (s == "vgg7" || s == "vgg7_small" || s == "Vgg7Small") return Preset::kVgg7Small;
  if (s == "mlp") return Preset::kMlp;
  throw ConfigError("unknown network preset '" + s + "'");
}

struct NetworkSpec {
  Preset preset = Preset::kAlexNetSmall;
  std::size_t input_side = 64;   // image presets
  std::size_t input_dim = 2;     // kMlp
  std::size_t mlp_layers = 2;    // kMlp: fc-relu pairs in the extractor
  std::size_t feature_dim = 256;
  std::size_t domain_hidden = 64;
  std::size_t num_classes = 2;
  image::ColorSpace color_space = image::ColorSpace::kRgb;

  /// Shape of one input sample (without the batch axis).
  nn::Shape sample_shape() const {
    if (preset == Preset::kMlp) return {input_dim};
    return {3, input_side, input_side};
  }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

inline nlohmann::json to_json(const NetworkSpec& s) {
  return {{"preset", preset_name(s.preset)},
          {"input_side", s.input_side},
          {"input_dim", s.input_dim},
          {"mlp_layers", s.mlp_layers},
          {"feature_dim", s.feature_dim},
          {"domain_hidden", s.domain_hidden},
          {"num_classes", s.num_classes},
          {"color_space", std::string(image::color_space_name(s.color_space))}};
}

inline NetworkSpec spec_from_json(const nlohmann::json& j) {
  try {
    NetworkSpec s;
    s.preset = parse_preset(j.at("preset").get<std::string>());
    s.input_side = j.at("input_side").get<std::size_t>();
    s.input_dim = j.at("input_dim").get<std::size_t>();
    s.mlp_layers = j.at("mlp_layers").get<std::size_t>();
    s.feature_dim = j.at("feature_dim").get<std::size_t>();
    s.domain_hidden = j.at("domain_hidden").get<std::size_t>();
    s.num_classes = j.at("num_classes").get<std::size_t>();
    s.color_space = image::parse_color_space(j.at("color_space").get<std::string>());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("network spec: ") + e.what());
  }
}

template <typename T>
struct ForwardOutputs {
  nn::Tensor<T> class_logits;   // [n_source, classes]
  nn::Tensor<T> domain_logits;  // [N, 2]
  nn::Tensor<T> features;       // [N, feature_dim]
};

template <typename T>
class TwoHeadNetwork {
 public:
  TwoHeadNetwork() = default;
  explicit TwoHeadNetwork(NetworkSpec spec) : spec_(spec) {}

  const NetworkSpec& spec() const { return spec_; }
  nn::LayerStack<T>& extractor() { return extractor_; }
  nn::LayerStack<T>& source_head() { return source_head_; }
  nn::LayerStack<T>& domain_head() { return domain_head_; }

  std::vector<nn::Tensor<T>*> theta_f() { return extractor_.parameters(); }
  std::vector<nn::Tensor<T>*> theta_s() { return source_head_.parameters(); }
  std::vector<nn::Tensor<T>*> theta_d() { return domain_head_.parameters(); }

  /// theta_f, then theta_s, then theta_d.
  std::vector<nn::Tensor<T>*> parameters() {
    auto out = theta_f();
    for (auto* p : theta_s()) out.push_back(p);
    for (auto* p : theta_d()) out.push_back(p);
    return out;
  }
  std::vector<nn::Tensor<T>*> classifier_parameters() {
    auto out = theta_f();
    for (auto* p : theta_s()) out.push_back(p);
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

  void set_lambda(T lambda) { std::get<nn::GradientReversal<T>>(domain_head_.layers().front()).set_lambda(lambda); }

  nn::Tensor<T> features(const nn::Tensor<T>& x) {
    check_input(x);
    return extractor_.forward(x);
  }

  /// Features once for all rows; the class head sees the first `n_source`
  /// rows, the domain head (through the GRL) sees every row.
  ForwardOutputs<T> forward_full(const nn::Tensor<T>& x, std::size_t n_source, T lambda) {
    check_input(x);
    if (n_source > x.dim(0)) throw UsageError("forward_full: n_source exceeds batch");
    ForwardOutputs<T> out;
    out.features = extractor_.forward(x);
    if (n_source > 0) out.class_logits = source_head_.forward(out.features.rows(0, n_source));
    set_lambda(lambda);
    out.domain_logits = domain_head_.forward(out.features);
    return out;
  }

  /// Class logits only; no domain head involvement.
  nn::Tensor<T> classify(const nn::Tensor<T>& x) { return source_head_.forward(features(x)); }

  /// Backpropagates head gradients into every parameter's grad buffer and
  /// returns the feature gradient. Either head gradient may be absent.
  nn::Tensor<T> backward_full(const std::optional<nn::Tensor<T>>& grad_class_logits,
                              const std::optional<nn::Tensor<T>>& grad_domain_logits,
                              const nn::Shape& feature_shape) {
    nn::Tensor<T> gf(feature_shape);
    if (grad_domain_logits) gf = domain_head_.backward(*grad_domain_logits);
    if (grad_class_logits) add_rows(gf, source_head_.backward(*grad_class_logits));
    extractor_.backward(gf);
    return gf;
  }

  /// Adds `g` into the leading rows of `acc`.
  static void add_rows(nn::Tensor<T>& acc, const nn::Tensor<T>& g) {
    if (g.rank() != 2 || g.dim(1) != acc.dim(1) || g.dim(0) > acc.dim(0)) {
      throw UsageError("add_rows: " + nn::shape_str(g.shape()) + " into " + nn::shape_str(acc.shape()));
    }
    // g first so that adding a zero domain gradient leaves g's bits intact.
    for (std::size_t i = 0; i < g.size(); ++i) acc[i] = g[i] + acc[i];
  }

 private:
  void check_input(const nn::Tensor<T>& x) const {
    nn::Shape want = spec_.sample_shape();
    want.insert(want.begin(), x.rank() ? x.dim(0) : 0);
    if (x.shape() != want || x.dim(0) == 0) {
      throw UsageError("network input: expected " + nn::shape_str(want) + ", got " + nn::shape_str(x.shape()));
    }
  }

  NetworkSpec spec_;
  nn::LayerStack<T> extractor_;
  nn::LayerStack<T> source_head_;
  nn::LayerStack<T> domain_head_;
};

namespace detail {

template <typename T>
void add_conv_block(nn::LayerStack<T>& s, std::size_t in, std::size_t out, std::size_t k,
                    std::size_t stride, std::size_t pad, bool pool) {
  s.add(nn::Conv2D<T>(in, out, k, stride, pad)).add(nn::ReLU<T>());
  if (pool) s.add(nn::MaxPool2D<T>(2));
}

}  // namespace detail

/// Builds and initializes the network. Extractor, source head and domain head
/// draw from independent seed-derived streams.
template <typename T>
TwoHeadNetwork<T> build_network(const NetworkSpec& spec, std::uint64_t seed) {
  if (spec.feature_dim == 0 || spec.domain_hidden == 0 || spec.num_classes < 2) {
    throw ConfigError("network: feature_dim, domain_hidden must be > 0 and num_classes >= 2");
  }
  TwoHeadNetwork<T> net(spec);
  auto& f = net.extractor();
  switch (spec.preset) {
    case Preset::kAlexNetSmall:
      if (spec.input_side < 16) throw ConfigError("alexnet_small: input_side must be >= 16");
      detail::add_conv_block(f, 3, 16, 5, 2, 2, true);
      detail::add_conv_block(f, 16, 32, 3, 1, 1, true);
      detail::add_conv_block(f, 32, 64, 3, 1, 1, true);
      break;
    case Preset::kVgg7Small:
      if (spec.input_side < 8) throw ConfigError("vgg7_small: input_side must be >= 8");
      detail::add_conv_block(f, 3, 16, 3, 1, 1, false);
      detail::add_conv_block(f, 16, 16, 3, 1, 1, true);
      detail::add_conv_block(f, 16, 32, 3, 1, 1, false);
      detail::add_conv_block(f, 32, 32, 3, 1, 1, true);
      detail::add_conv_block(f, 32, 64, 3, 1, 1, false);
      detail::add_conv_block(f, 64, 64, 3, 1, 1, true);
      break;
    case Preset::kMlp:
      if (spec.input_dim == 0 || spec.mlp_layers == 0) {
        throw ConfigError("mlp: input_dim and mlp_layers must be > 0");
      }
      for (std::size_t i = 1; i < spec.mlp_layers; ++i) {
        f.add(nn::FullyConnected<T>(i == 1 ? spec.input_dim : spec.feature_dim, spec.feature_dim));
        f.add(nn::ReLU<T>());
      }
      break;
  }
  std::size_t flat = spec.preset == Preset::kMlp && spec.mlp_layers > 1 ? spec.feature_dim : spec.input_dim;
  if (spec.preset != Preset::kMlp) {
    f.add(nn::Flatten<T>());
    const nn::Shape out = f.output_shape({1, 3, spec.input_side, spec.input_side});
    flat = out.at(1);
    if (flat == 0) throw ConfigError("network: input_side too small for preset");
  }
  f.add(nn::FullyConnected<T>(flat, spec.feature_dim)).add(nn::ReLU<T>());

  net.source_head().add(nn::FullyConnected<T>(spec.feature_dim, spec.num_classes));
  net.domain_head()
      .add(nn::GradientReversal<T>(T{1}))
      .add(nn::FullyConnected<T>(spec.feature_dim, spec.domain_hidden))
      .add(nn::ReLU<T>())
      .add(nn::FullyConnected<T>(spec.domain_hidden, 2));

  Rng rf(hash_combine(seed, 1)), rs(hash_combine(seed, 2)), rd(hash_combine(seed, 3));
  net.extractor().init(rf);
  net.source_head().init(rs);
  net.domain_head().init(rd);
  return net;
}

/// Argmax class predictions, evaluated in chunks of `chunk` rows.
template <typename T>
std::vector<int> predict(TwoHeadNetwork<T>& net, const nn::Tensor<T>& inputs, std::size_t chunk = 64) {
  std::vector<int> out;
  const std::size_t n = inputs.rank() ? inputs.dim(0) : 0;
  out.reserve(n);
  for (std::size_t b = 0; b < n; b += chunk) {
    const nn::Tensor<T> logits = net.classify(inputs.rows(b, std::min(n, b + chunk)));
    const std::size_t k = logits.dim(1);
    for (std::size_t r = 0; r < logits.dim(0); ++r) {
      const T* z = logits.ptr() + r * k;
      out.push_back(static_cast<int>(std::max_element(z, z + k) - z));
    }
  }
  return out;
}

inline double accuracy(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size() || truth.empty()) throw UsageError("accuracy: size mismatch or empty");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace cmfda::models

#endif  // CMFDA_MODELS_NETWORK_HPP_
