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

#ifndef CMFDA_SYNTH_GENERATE_HPP_
#define CMFDA_SYNTH_GENERATE_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cmfda/data/manifest.hpp"
#include "cmfda/error.hpp"
#include "cmfda/image/coco.hpp"
#include "cmfda/image/io.hpp"
#include "cmfda/rng.hpp"
#include "cmfda/synth/forgery.hpp"

namespace cmfda::synth {

struct GenerateConfig {
  std::filesystem::path corpus_dir;
  std::filesystem::path annotations;
  std::size_t count = 10;          // records; half authentic, half forged
  double mix_copy_move = 3;        // copy-move : inpaint pair ratio
  double mix_inpaint = 1;
  std::string category;            // empty = any category
  std::size_t output_side = 0;     // 0 keeps the corpus resolution
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  int threads = 1;
  data::Domain domain = data::Domain::kSource;
  int inpaint_iterations = 400;
  CopyMoveOptions copy_move;
};

struct GenerateResult {
  data::Manifest manifest;
  std::size_t pairs_requested = 0;
  std::size_t pairs_written = 0;
  std::vector<std::string> skips;
};

/// Number of copy-move pairs among `pairs`, by the configured ratio.
inline std::size_t copy_move_pair_count(std::size_t pairs, double cmf, double inpaint) {
  if (cmf < 0 || inpaint < 0 || cmf + inpaint <= 0) throw ConfigError("mix ratio must be non-negative and not 0:0");
  return static_cast<std::size_t>(std::llround(static_cast<double>(pairs) * cmf / (cmf + inpaint)));
}

namespace detail {

struct PairOutcome {
  std::optional<data::ManifestRecord> authentic;
  std::optional<data::ManifestRecord> forged;
  std::vector<std::string> skips;
};

inline std::string pair_id(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "p%05zu", k);
  return buf;
}

inline PairOutcome generate_pair(const GenerateConfig& cfg, const image::CocoDataset& coco,
                                 std::size_t k, bool copy_move) {
  PairOutcome out;
  const std::size_t n_images = coco.images.size();
  // On a skip, move on to the next corpus image; at most one pass over the corpus.
  for (std::size_t attempt = 0; attempt < n_images; ++attempt) {
    const image::CocoImage& meta = coco.images[(k + attempt) % n_images];
    const std::uint64_t seed =
        hash_combine(cfg.seed, hash_combine(fnv1a(meta.file_name), k * 1000003ULL + attempt));
    try {
      image::RasterImage img = image::read_image(cfg.corpus_dir / meta.file_name);
      if (img.width != meta.width || img.height != meta.height) {
        throw DataError("image size differs from its annotation");
      }
      const auto masks = coco.masks_for(meta);
      ForgeryPair pair =
          copy_move ? make_copy_move_pair(img, masks, cfg.category, seed, meta.file_name, cfg.copy_move)
                    : make_inpaint_pair(img, masks, cfg.category, seed, meta.file_name,
                                        cfg.inpaint_iterations);
      if (cfg.output_side > 0) {
        pair.authentic = image::resize_square(pair.authentic, cfg.output_side);
        pair.forged = image::resize_square(pair.forged, cfg.output_side);
      }
      const std::string base = pair_id(k);
      const std::string auth_name = "images/" + base + "_auth.png";
      const std::string forged_name = "images/" + base + (copy_move ? "_cmf.png" : "_inp.png");
      image::write_png(cfg.out_dir / auth_name, pair.authentic);
      image::write_png(cfg.out_dir / forged_name, pair.forged);
      out.authentic = data::ManifestRecord{base + "_auth", auth_name, data::ClassLabel::kAuthentic,
                                           cfg.domain, std::nullopt, std::nullopt};
      out.forged = data::ManifestRecord{base + (copy_move ? "_cmf" : "_inp"), forged_name,
                                        data::ClassLabel::kForged, cfg.domain, std::nullopt,
                                        std::move(pair.provenance)};
      return out;
    } catch (const GenerationSkip& e) {
      out.skips.push_back(pair_id(k) + " " + meta.file_name + ": " + e.what());
    } catch (const DataError& e) {
      out.skips.push_back(pair_id(k) + " " + meta.file_name + ": " + e.what());
    }
  }
  return out;
}

}  // namespace detail

/// Writes images/ and manifest.jsonl under cfg.out_dir. Pair k's pipeline is
/// seeded from (seed, image name, k), so the output does not depend on the
/// thread count.
inline GenerateResult generate_dataset(const GenerateConfig& cfg) {
  if (cfg.count < 2 || cfg.count % 2) throw ConfigError("generate: count must be a positive even number");
  if (cfg.threads < 1) throw ConfigError("generate: threads must be >= 1");
  const image::CocoDataset coco = image::load_coco(cfg.annotations);
  if (coco.images.empty()) throw DataError("generate: annotation file lists no images");
  if (!std::filesystem::is_directory(cfg.corpus_dir)) {
    throw DataError("generate: corpus directory " + cfg.corpus_dir.string() + " not found");
  }
  std::filesystem::create_directories(cfg.out_dir / "images");

  GenerateResult result;
  result.pairs_requested = cfg.count / 2;
  const std::size_t n_cmf = copy_move_pair_count(result.pairs_requested, cfg.mix_copy_move, cfg.mix_inpaint);
  std::vector<detail::PairOutcome> outcomes(result.pairs_requested);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < outcomes.size(); k = next++) {
      outcomes[k] = detail::generate_pair(cfg, coco, k, k < n_cmf);
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::min<std::size_t>(
      static_cast<std::size_t>(cfg.threads), std::max<std::size_t>(1, outcomes.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  result.manifest.base_dir = cfg.out_dir;
  for (auto& o : outcomes) {
    result.skips.insert(result.skips.end(), o.skips.begin(), o.skips.end());
    if (o.authentic && o.forged) {
      result.manifest.records.push_back(std::move(*o.authentic));
      result.manifest.records.push_back(std::move(*o.forged));
      ++result.pairs_written;
    }
  }
  data::write_manifest(cfg.out_dir / "manifest.jsonl", result.manifest);
  return result;
}

}  // namespace cmfda::synth

#endif  // CMFDA_SYNTH_GENERATE_HPP_
