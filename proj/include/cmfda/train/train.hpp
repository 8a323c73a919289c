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

// Domain-adaptation trainers. Every step runs the extractor once over the
// stacked [source; target] batch, so per-row features do not depend on
// which heads are attached.

#ifndef CMFDA_TRAIN_TRAIN_HPP_
#define CMFDA_TRAIN_TRAIN_HPP_

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cmfda/data/batching.hpp"
#include "cmfda/error.hpp"
#include "cmfda/models/checkpoint.hpp"
#include "cmfda/models/network.hpp"
#include "cmfda/nn/ops.hpp"
#include "cmfda/nn/optim.hpp"
#include "cmfda/train/mmd.hpp"

namespace cmfda::train {

enum class Method { kSourceOnly, kDann, kDdc };
enum class LambdaMode { kConstant, kAnnealed };
enum class OptimizerKind { kAdam, kSgdMomentum };

inline Method parse_method(const std::string& s) {
  if (s == "source_only") return Method::kSourceOnly;
  if (s == "dann") return Method::kDann;
  if (s == "ddc") return Method::kDdc;
  throw ConfigError("unknown training method '" + s + "'");
}
inline const char* method_name(Method m) {
  return m == Method::kSourceOnly ? "source_only" : m == Method::kDann ? "dann" : "ddc";
}
inline LambdaMode parse_lambda_mode(const std::string& s) {
  if (s == "constant") return LambdaMode::kConstant;
  if (s == "annealed") return LambdaMode::kAnnealed;
  throw ConfigError("unknown lambda schedule '" + s + "'");
}
inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "sgd_momentum" || s == "sgd") return OptimizerKind::kSgdMomentum;
  throw ConfigError("unknown optimizer '" + s + "'");
}

/// Constant: delta. Annealed: 2 / (1 + exp(-10 p)) - 1.
inline double lambda_schedule(double progress, LambdaMode mode, double delta = 1.0) {
  if (mode == LambdaMode::kConstant) return delta;
  const double p = std::clamp(progress, 0.0, 1.0);
  return 2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0;
}

struct TrainConfig {
  Method method = Method::kDann;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;  // per domain
  std::uint64_t seed = 0;
  // DANN
  nn::AdamParams adam{};
  LambdaMode lambda_mode = LambdaMode::kAnnealed;
  double delta = 1.0;
  // DDC
  nn::SgdMomentumParams sgd{};
  double mmd_alpha = 0.25;
  MmdKernel kernel{};
  // Source-only baseline
  OptimizerKind source_only_optimizer = OptimizerKind::kAdam;
  /// When set, epoch_NNN.ckpt is written after every epoch.
  std::optional<std::filesystem::path> checkpoint_dir;
};

struct StepLosses {
  double class_loss = 0;
  double domain_term = 0;  // L_d (DANN) or MMD^2 (DDC); 0 for source-only
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double class_loss = 0;
  double domain_term = 0;
  double source_accuracy = 0;
  std::optional<double> target_accuracy;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  std::string to_csv() const {
    std::ostringstream os;
    os << "epoch,L_s,L_d_or_mmd2,src_acc,tgt_acc\n";
    char line[160];
    for (const auto& e : epochs) {
      std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f,%.4f,", e.epoch, e.class_loss, e.domain_term,
                    e.source_accuracy);
      os << line;
      if (e.target_accuracy) {
        std::snprintf(line, sizeof(line), "%.4f", *e.target_accuracy);
        os << line;
      }
      os << '\n';
    }
    return os.str();
  }
};

template <typename T>
nn::OptimizerState<T> make_optimizer(const TrainConfig& cfg) {
  switch (cfg.method) {
    case Method::kDann: return nn::Adam<T>(cfg.adam);
    case Method::kDdc: return nn::SgdMomentum<T>(cfg.sgd);
    case Method::kSourceOnly:
      if (cfg.source_only_optimizer == OptimizerKind::kAdam) return nn::Adam<T>(cfg.adam);
      return nn::SgdMomentum<T>(cfg.sgd);
  }
  throw ConfigError("make_optimizer: unknown method");
}

namespace detail {

template <typename T>
const std::vector<int>& source_labels(const data::Batch<T>& b) {
  if (!b.class_labels) throw UsageError("training step: source batch carries no class labels");
  return *b.class_labels;
}

inline void require_finite_loss(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string(what) + " diverged (non-finite loss)");
}

template <typename T>
void step_params(nn::OptimizerState<T>& opt, std::vector<nn::Tensor<T>*> params) {
  for (auto* p : params) {
    if (!p->all_finite()) throw NumericError("parameters became non-finite");
  }
  nn::optimizer_step(opt, std::span<nn::Tensor<T>* const>(params));
}

}  // namespace detail

/// Supervised step on the source batch only; updates theta_f and theta_s.
template <typename T>
StepLosses source_only_step(models::TwoHeadNetwork<T>& net, const data::Batch<T>& source,
                            nn::OptimizerState<T>& opt) {
  const auto& labels = detail::source_labels(source);
  net.zero_grad();
  const nn::Tensor<T> feats = net.features(source.images);
  const nn::Tensor<T> logits = net.source_head().forward(feats);
  const auto ce = nn::softmax_cross_entropy(logits, std::span<const int>(labels));
  detail::require_finite_loss(ce.loss, "source classification loss");
  net.backward_full(ce.grad_logits, std::nullopt, feats.shape());
  detail::step_params(opt, net.classifier_parameters());
  return {static_cast<double>(ce.loss), 0.0};
}

/// L_s on source rows plus L_d on all rows (source 0, target 1). The GRL
/// hands theta_f the reversed domain gradient; one optimizer step covers
/// theta_f, theta_s and theta_d.
template <typename T>
StepLosses dann_step(models::TwoHeadNetwork<T>& net, const data::Batch<T>& source,
                     const data::Batch<T>& target, T lambda, nn::OptimizerState<T>& opt) {
  const auto& labels = detail::source_labels(source);
  const std::size_t ns = source.images.dim(0);
  net.zero_grad();
  auto out = net.forward_full(nn::concat_rows(source.images, target.images), ns, lambda);
  std::vector<int> domains = source.domain_labels;
  domains.insert(domains.end(), target.domain_labels.begin(), target.domain_labels.end());
  const auto ce_s = nn::softmax_cross_entropy(out.class_logits, std::span<const int>(labels));
  const auto ce_d = nn::softmax_cross_entropy(out.domain_logits, std::span<const int>(domains));
  detail::require_finite_loss(ce_s.loss, "source classification loss");
  detail::require_finite_loss(ce_d.loss, "domain loss");
  net.backward_full(ce_s.grad_logits, ce_d.grad_logits, out.features.shape());
  detail::step_params(opt, net.parameters());
  return {static_cast<double>(ce_s.loss), static_cast<double>(ce_d.loss)};
}

/// L_classify(source) + alpha * MMD^2(source features, target features);
/// one optimizer step on theta_f and theta_s.
template <typename T>
StepLosses ddc_step(models::TwoHeadNetwork<T>& net, const data::Batch<T>& source,
                    const data::Batch<T>& target, double alpha, const MmdKernel& kernel,
                    nn::OptimizerState<T>& opt) {
  if (!(alpha >= 0)) throw ConfigError("ddc: mmd penalty must be >= 0");
  const auto& labels = detail::source_labels(source);
  const std::size_t ns = source.images.dim(0), nt = target.images.dim(0);
  net.zero_grad();
  const nn::Tensor<T> feats = net.features(nn::concat_rows(source.images, target.images));
  const nn::Tensor<T> logits = net.source_head().forward(feats.rows(0, ns));
  const auto ce = nn::softmax_cross_entropy(logits, std::span<const int>(labels));
  const auto mmd = mmd2_with_grad(feats.rows(0, ns), feats.rows(ns, ns + nt), kernel);
  detail::require_finite_loss(ce.loss, "source classification loss");
  detail::require_finite_loss(mmd.mmd2, "mmd penalty");
  nn::Tensor<T> gf(feats.shape());
  const T a = static_cast<T>(alpha);
  const std::size_t d = feats.dim(1);
  for (std::size_t i = 0; i < ns * d; ++i) gf[i] = a * mmd.grad_source[i];
  for (std::size_t i = 0; i < nt * d; ++i) gf[ns * d + i] = a * mmd.grad_target[i];
  models::TwoHeadNetwork<T>::add_rows(gf, net.source_head().backward(ce.grad_logits));
  net.extractor().backward(gf);
  detail::step_params(opt, net.classifier_parameters());
  return {static_cast<double>(ce.loss), mmd.mmd2};
}

/// Optional per-epoch callback (epoch record is final when it runs).
template <typename T>
using EpochHook = std::function<void(const EpochRecord&, models::TwoHeadNetwork<T>&)>;

/// Runs cfg.epochs epochs of paired batches. Target class labels are never
/// read; `target_eval` (labeled) only feeds the history's tgt_acc column.
template <typename T>
TrainHistory train(models::TwoHeadNetwork<T>& net, const data::Dataset<T>& source,
                   const data::Dataset<T>& target, const TrainConfig& cfg,
                   const data::Dataset<T>* target_eval = nullptr, const EpochHook<T>& hook = {}) {
  if (!source.labeled()) throw UsageError("train: source set must be labeled");
  if (cfg.method != Method::kSourceOnly && target.size() == 0) throw UsageError("train: empty target set");
  if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be > 0");
  const data::Dataset<T> target_view = target.size() ? target.unlabeled() : source.unlabeled();
  TrainHistory history;
  if (cfg.epochs == 0) return history;

  nn::OptimizerState<T> opt = make_optimizer<T>(cfg);
  // Source-only pairs the source stream with itself so its steps match DANN
  // whenever both sets have the same size.
  const std::size_t nt = cfg.method == Method::kSourceOnly ? source.size() : target_view.size();
  data::PairedBatchIterator it(source.size(), nt, cfg.batch_size, cfg.seed);
  const std::size_t total_steps = cfg.epochs * it.steps_per_epoch();
  std::size_t global_step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double sum_cls = 0, sum_dom = 0;
    std::size_t steps = 0;
    for (auto idx = it.next(); idx; idx = it.next()) {
      const auto sb = data::gather_batch(source, std::span<const std::size_t>(idx->first), data::Domain::kSource);
      StepLosses l;
      if (cfg.method == Method::kSourceOnly) {
        l = source_only_step(net, sb, opt);
      } else {
        const auto tb = data::gather_batch(target_view, std::span<const std::size_t>(idx->second),
                                           data::Domain::kTarget);
        if (cfg.method == Method::kDann) {
          const double progress = total_steps > 1 ? static_cast<double>(global_step) / (total_steps - 1) : 1.0;
          l = dann_step(net, sb, tb, static_cast<T>(lambda_schedule(progress, cfg.lambda_mode, cfg.delta)), opt);
        } else {
          l = ddc_step(net, sb, tb, cfg.mmd_alpha, cfg.kernel, opt);
        }
      }
      sum_cls += l.class_loss;
      sum_dom += l.domain_term;
      ++steps;
      ++global_step;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.class_loss = sum_cls / static_cast<double>(steps);
    rec.domain_term = sum_dom / static_cast<double>(steps);
    rec.source_accuracy = models::accuracy(source.labels, models::predict(net, source.inputs));
    if (target_eval && target_eval->labeled()) {
      rec.target_accuracy = models::accuracy(target_eval->labels, models::predict(net, target_eval->inputs));
    }
    history.epochs.push_back(rec);
    if (cfg.checkpoint_dir) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03zu.ckpt", epoch);
      models::save_checkpoint(*cfg.checkpoint_dir / name, net);
    }
    if (hook) hook(rec, net);
  }
  return history;
}

template <typename T>
TrainHistory train_source_only(models::TwoHeadNetwork<T>& net, const data::Dataset<T>& source,
                               TrainConfig cfg, const data::Dataset<T>* target_eval = nullptr) {
  cfg.method = Method::kSourceOnly;
  return train(net, source, data::Dataset<T>{}, cfg, target_eval);
}

}  // namespace cmfda::train

#endif  // CMFDA_TRAIN_TRAIN_HPP_
