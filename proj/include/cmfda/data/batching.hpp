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

#ifndef CMFDA_DATA_BATCHING_HPP_
#define CMFDA_DATA_BATCHING_HPP_

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmfda/data/manifest.hpp"
#include "cmfda/error.hpp"
#include "cmfda/image/io.hpp"
#include "cmfda/image/raster.hpp"
#include "cmfda/nn/tensor.hpp"
#include "cmfda/rng.hpp"

namespace cmfda::data {

/// Decoded samples held in memory. `labels` is empty for unlabeled sets.
template <typename T>
struct Dataset {
  nn::Tensor<T> inputs;  // [N, ...]
  std::vector<int> labels;
  std::vector<std::string> ids;

  std::size_t size() const { return inputs.rank() ? inputs.dim(0) : 0; }
  bool labeled() const { return !labels.empty(); }

  /// Same inputs, labels dropped.
  Dataset unlabeled() const { return {inputs, {}, ids}; }
};

template <typename T>
struct Batch {
  nn::Tensor<T> images;
  std::optional<std::vector<int>> class_labels;  // never set for target batches
  std::vector<int> domain_labels;                // 0 = source, 1 = target
};

/// Gathers rows of `ds`. Class labels are attached only for source batches.
template <typename T>
Batch<T> gather_batch(const Dataset<T>& ds, std::span<const std::size_t> indices, Domain domain) {
  if (indices.empty()) throw UsageError("gather_batch: empty batch");
  const std::size_t row = ds.inputs.size() / ds.size();
  nn::Shape shape = ds.inputs.shape();
  shape[0] = indices.size();
  std::vector<T> data;
  data.reserve(indices.size() * row);
  for (std::size_t i : indices) {
    if (i >= ds.size()) throw UsageError("gather_batch: index out of range");
    const auto begin = ds.inputs.data().begin() + static_cast<std::ptrdiff_t>(i * row);
    data.insert(data.end(), begin, begin + static_cast<std::ptrdiff_t>(row));
  }
  Batch<T> b{nn::Tensor<T>(std::move(shape), std::move(data)), std::nullopt,
             std::vector<int>(indices.size(), domain == Domain::kSource ? 0 : 1)};
  if (domain == Domain::kSource && ds.labeled()) {
    std::vector<int> labels;
    labels.reserve(indices.size());
    for (std::size_t i : indices) labels.push_back(ds.labels[i]);
    b.class_labels = std::move(labels);
  }
  return b;
}

/// Endless shuffled index stream over [0, n): hands out `batch` indices at a
/// time and reshuffles when fewer than `batch` remain.
class IndexStream {
 public:
  IndexStream(std::size_t n, std::size_t batch, std::uint64_t seed)
      : order_(n), batch_(batch), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    cursor_ = n;  // forces a shuffle on first use
  }

  std::vector<std::size_t> next() {
    if (order_.size() - cursor_ < batch_) {
      rng_.shuffle(std::span<std::size_t>(order_));
      cursor_ = 0;
    }
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_));
    cursor_ += batch_;
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t cursor_;
  Rng rng_;
};

inline std::uint64_t source_stream_seed(std::uint64_t seed) { return hash_combine(seed, 0x5EED0001); }
inline std::uint64_t target_stream_seed(std::uint64_t seed) { return hash_combine(seed, 0x5EED0002); }

/// Yields equal-sized (source, target) index batches. An epoch is
/// floor(max(n_source, n_target) / batch) steps; the smaller side is
/// reshuffled and cycled. Each side has its own seed-derived stream, so the
/// source sequence does not depend on the target set.
class PairedBatchIterator {
 public:
  PairedBatchIterator(std::size_t n_source, std::size_t n_target, std::size_t batch_size,
                      std::uint64_t seed)
      : source_(check(n_source, batch_size, "source"), batch_size, source_stream_seed(seed)),
        target_(check(n_target, batch_size, "target"), batch_size, target_stream_seed(seed)),
        steps_per_epoch_(std::max(n_source, n_target) / batch_size) {}

  std::size_t steps_per_epoch() const { return steps_per_epoch_; }

  /// Next pair within the current epoch; nullopt at the epoch boundary (the
  /// following call starts the next epoch).
  std::optional<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> next() {
    if (step_ == steps_per_epoch_) {
      step_ = 0;
      return std::nullopt;
    }
    ++step_;
    auto s = source_.next();
    auto t = target_.next();
    return std::make_pair(std::move(s), std::move(t));
  }

 private:
  static std::size_t check(std::size_t n, std::size_t batch, const char* side) {
    if (n == 0) throw UsageError(std::string("paired_batch_iterator: empty ") + side + " set");
    if (batch == 0 || batch > n) {
      throw UsageError(std::string("paired_batch_iterator: batch size ") + std::to_string(batch) +
                       " exceeds " + side + " size " + std::to_string(n));
    }
    return n;
  }

  IndexStream source_;
  IndexStream target_;
  std::size_t steps_per_epoch_;
  std::size_t step_ = 0;
};

/// HWC 8-bit pixels -> CHW floats in [0,1].
template <typename T>
void image_to_chw(const image::RasterImage& img, T* out) {
  const std::size_t plane = img.width * img.height;
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out[c * plane + i] = static_cast<T>(img.data[i * 3 + c]) / T{255};
  }
}

struct ImageLoadOptions {
  std::size_t side = 64;
  image::ColorSpace color_space = image::ColorSpace::kRgb;
  bool keep_labels = true;
};

/// Decodes every record into a [N,3,side,side] tensor. Labels are kept only
/// when every record has one and `keep_labels` is set.
template <typename T>
Dataset<T> load_image_dataset(const Manifest& manifest, const ImageLoadOptions& opt) {
  const std::size_t n = manifest.size();
  const std::size_t row = 3 * opt.side * opt.side;
  Dataset<T> ds{nn::Tensor<T>({n, 3, opt.side, opt.side}), {}, {}};
  bool all_labeled = opt.keep_labels && n > 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = manifest.records[i];
    image::RasterImage img = image::read_image(manifest.resolve(rec));
    img = image::convert_color(image::resize_square(img, opt.side), opt.color_space);
    image_to_chw(img, ds.inputs.ptr() + i * row);
    ds.ids.push_back(rec.id);
    if (!rec.class_label) all_labeled = false;
  }
  if (all_labeled) {
    for (const auto& rec : manifest.records) ds.labels.push_back(static_cast<int>(*rec.class_label));
  }
  return ds;
}

}  // namespace cmfda::data

#endif  // CMFDA_DATA_BATCHING_HPP_
