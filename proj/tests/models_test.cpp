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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>

#include "cmfda/models/checkpoint.hpp"
#include "cmfda/models/network.hpp"
#include "cmfda/nn/ops.hpp"

namespace cmfda::models {
namespace {

template <typename T>
nn::Tensor<T> random_input(const NetworkSpec& spec, std::size_t n, std::uint64_t seed) {
  nn::Shape shape = spec.sample_shape();
  shape.insert(shape.begin(), n);
  nn::Tensor<T> x(shape);
  Rng rng(seed);
  for (auto& v : x.data()) v = static_cast<T>(rng.uniform());
  return x;
}

template <typename T>
bool same_parameters(TwoHeadNetwork<T>& a, TwoHeadNetwork<T>& b) {
  auto pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->shape() != pb[i]->shape() ||
        std::memcmp(pa[i]->ptr(), pb[i]->ptr(), pa[i]->size() * sizeof(T)) != 0) {
      return false;
    }
  }
  return true;
}

NetworkSpec small_alexnet() {
  NetworkSpec s;
  s.input_side = 16;
  s.feature_dim = 12;
  s.domain_hidden = 6;
  return s;
}

TEST(BuildNetwork, SeedDeterminesParameters) {
  auto a = build_network<float>(NetworkSpec{}, 7);
  auto b = build_network<float>(NetworkSpec{}, 7);
  auto c = build_network<float>(NetworkSpec{}, 8);
  EXPECT_TRUE(same_parameters(a, b));
  EXPECT_FALSE(same_parameters(a, c));
}

TEST(BuildNetwork, AlexNetSmallFeaturesAre256) {
  auto net = build_network<float>(NetworkSpec{}, 1);
  const auto f = net.features(random_input<float>(net.spec(), 3, 2));
  EXPECT_EQ(f.shape(), (nn::Shape{3, 256}));
  EXPECT_EQ(net.extractor().output_shape({1, 3, 64, 64}), (nn::Shape{1, 256}));
}

TEST(BuildNetwork, VggHasMoreParameters) {
  NetworkSpec vgg;
  vgg.preset = Preset::kVgg7Small;
  auto a = build_network<float>(NetworkSpec{}, 1);
  auto v = build_network<float>(vgg, 1);
  EXPECT_GT(v.parameter_count(), a.parameter_count());
  EXPECT_EQ(v.features(random_input<float>(vgg, 1, 3)).shape(), (nn::Shape{1, 256}));
  // 6 conv + 1 fc weight layers in the extractor
  std::size_t weight_layers = 0;
  for (const auto& l : v.extractor().layers()) {
    weight_layers += nn::kind_of(l) == nn::LayerKind::kConv2D || nn::kind_of(l) == nn::LayerKind::kFullyConnected;
  }
  EXPECT_EQ(weight_layers, 7u);
}

TEST(BuildNetwork, InconsistentSpecIsConfigError) {
  NetworkSpec s;
  s.input_side = 8;
  EXPECT_THROW(build_network<float>(s, 1), ConfigError);
  s = NetworkSpec{};
  s.feature_dim = 0;
  EXPECT_THROW(build_network<float>(s, 1), ConfigError);
  EXPECT_THROW(parse_preset("resnet"), ConfigError);
}

TEST(BuildNetwork, WrongInputShapeIsUsageError) {
  auto net = build_network<float>(small_alexnet(), 1);
  EXPECT_THROW(net.features(nn::Tensor<float>({2, 3, 17, 16})), UsageError);
  EXPECT_THROW(net.forward_full(random_input<float>(small_alexnet(), 2, 1), 3, 1.0f), UsageError);
}

TEST(TwoHead, ParameterSetsAreDisjoint) {
  auto net = build_network<float>(NetworkSpec{}, 1);
  std::set<const void*> seen;
  for (auto* p : net.parameters()) EXPECT_TRUE(seen.insert(p).second);
  EXPECT_EQ(seen.size(), net.theta_f().size() + net.theta_s().size() + net.theta_d().size());
  EXPECT_EQ(net.source_head().output_shape({1, 256}), (nn::Shape{1, 2}));
  EXPECT_EQ(net.domain_head().output_shape({1, 256}), (nn::Shape{1, 2}));
}

TEST(TwoHead, PureAndHeadIndependentFeatures) {
  auto net = build_network<float>(small_alexnet(), 3);
  const auto x = random_input<float>(net.spec(), 4, 9);
  const auto a = net.forward_full(x, 2, 0.7f);
  const auto b = net.forward_full(x, 2, 0.7f);
  EXPECT_EQ(a.class_logits, b.class_logits);
  EXPECT_EQ(a.domain_logits, b.domain_logits);
  EXPECT_EQ(a.features, net.features(x));
  EXPECT_EQ(a.class_logits, net.classify(x.rows(0, 2)));
}

TEST(TwoHead, LambdaZeroDomainGradientLeavesThetaFZero) {
  auto net = build_network<float>(small_alexnet(), 4);
  const auto x = random_input<float>(net.spec(), 4, 5);
  net.zero_grad();
  const auto out = net.forward_full(x, 2, 0.0f);
  const std::vector<int> dom{0, 0, 1, 1};
  const auto ce = nn::softmax_cross_entropy(out.domain_logits, std::span<const int>(dom));
  net.backward_full(std::nullopt, ce.grad_logits, out.features.shape());
  for (auto* p : net.theta_f()) {
    for (float g : p->grad()) EXPECT_EQ(g, 0.0f);
  }
  double dnorm = 0;
  for (auto* p : net.theta_d()) for (float g : p->grad()) dnorm += std::abs(g);
  EXPECT_GT(dnorm, 0.0);
}

TEST(TwoHead, HeadGradientsRespectPartition) {
  auto net = build_network<double>(small_alexnet(), 5);
  const auto x = random_input<double>(net.spec(), 4, 6);
  const std::vector<int> cls{0, 1}, dom{0, 0, 1, 1};
  auto zero = [](std::vector<nn::Tensor<double>*> ps) {
    for (auto* p : ps) for (double g : p->grad()) if (g != 0.0) return false;
    return true;
  };
  net.zero_grad();
  auto out = net.forward_full(x, 2, 1.0);
  net.backward_full(nn::softmax_cross_entropy(out.class_logits, std::span<const int>(cls)).grad_logits,
                    std::nullopt, out.features.shape());
  EXPECT_TRUE(zero(net.theta_d()));
  EXPECT_FALSE(zero(net.theta_s()));
  net.zero_grad();
  out = net.forward_full(x, 2, 1.0);
  net.backward_full(std::nullopt,
                    nn::softmax_cross_entropy(out.domain_logits, std::span<const int>(dom)).grad_logits,
                    out.features.shape());
  EXPECT_TRUE(zero(net.theta_s()));
  EXPECT_FALSE(zero(net.theta_d()));
}

// Oracle: central differences of L_s - lambda * L_d (the objective theta_f
// descends under gradient reversal), of L_s for theta_s and of L_d for
// theta_d, on a sample of coordinates per tensor.
void check_total_loss_gradient(const NetworkSpec& spec) {
  auto net = build_network<double>(spec, 11);
  const auto x = random_input<double>(spec, 4, 12);
  const std::vector<int> cls{0, 1}, dom{0, 0, 1, 1};
  const double lambda = 0.6;
  auto losses = [&] {
    const auto out = net.forward_full(x, 2, lambda);
    return std::pair{nn::softmax_cross_entropy(out.class_logits, std::span<const int>(cls)).loss,
                     nn::softmax_cross_entropy(out.domain_logits, std::span<const int>(dom)).loss};
  };
  net.zero_grad();
  const auto out = net.forward_full(x, 2, lambda);
  net.backward_full(nn::softmax_cross_entropy(out.class_logits, std::span<const int>(cls)).grad_logits,
                    nn::softmax_cross_entropy(out.domain_logits, std::span<const int>(dom)).grad_logits,
                    out.features.shape());
  Rng rng(13);
  const std::size_t nf = net.theta_f().size(), ns = net.theta_s().size();
  const auto params = net.parameters();
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    nn::Tensor<double>& p = *params[pi];
    double num = 0, den = 0;
    for (int sample = 0; sample < 12; ++sample) {
      const std::size_t j = rng.below(p.size());
      const double orig = p[j], h = 1e-6;
      p[j] = orig + h;
      const auto [lsp, ldp] = losses();
      p[j] = orig - h;
      const auto [lsm, ldm] = losses();
      p[j] = orig;
      const double ds = (lsp - lsm) / (2 * h), dd = (ldp - ldm) / (2 * h);
      const double fd = pi < nf ? ds - lambda * dd : pi < nf + ns ? ds : dd;
      const double an = p.grad()[j];
      num += (fd - an) * (fd - an);
      den += fd * fd + an * an;
    }
    EXPECT_LE(std::sqrt(num) / std::max(std::sqrt(den), 1e-12), 1e-5) << "parameter tensor " << pi;
  }
}

TEST(TwoHead, TotalLossGradientMatchesFiniteDifferencesAlexNet) { check_total_loss_gradient(small_alexnet()); }

TEST(TwoHead, TotalLossGradientMatchesFiniteDifferencesMlp) {
  NetworkSpec s;
  s.preset = Preset::kMlp;
  s.input_dim = 3;
  s.feature_dim = 8;
  s.domain_hidden = 5;
  check_total_loss_gradient(s);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  NetworkSpec spec;
  spec.color_space = image::ColorSpace::kYCrCb;
  auto net = build_network<float>(spec, 21);
  const auto path = std::filesystem::temp_directory_path() / "cmfda_ckpt" / "net.ckpt";
  save_checkpoint(path, net);
  auto back = load_checkpoint<float>(path);
  EXPECT_EQ(back.spec(), spec);
  EXPECT_TRUE(same_parameters(net, back));
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(net));
}

TEST(Checkpoint, CorruptionIsDataError) {
  auto net = build_network<float>(small_alexnet(), 1);
  std::string buf = serialize_checkpoint(net);
  EXPECT_THROW(deserialize_checkpoint<float>(buf.substr(0, buf.size() - 1)), DataError);
  EXPECT_THROW(deserialize_checkpoint<float>(buf + "x"), DataError);
  EXPECT_THROW(deserialize_checkpoint<double>(buf), DataError);
  buf[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint<float>(buf), DataError);
  EXPECT_THROW(load_checkpoint<float>("/nonexistent/x.ckpt"), DataError);
}

TEST(Predict, ChunkingDoesNotChangePredictions) {
  auto net = build_network<float>(small_alexnet(), 2);
  const auto x = random_input<float>(net.spec(), 10, 3);
  EXPECT_EQ(predict(net, x, 3), predict(net, x, 64));
  EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{1, 0, 1, 1}, std::vector<int>{1, 1, 1, 0}), 0.5);
}

}  // namespace
}  // namespace cmfda::models
