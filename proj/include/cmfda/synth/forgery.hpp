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

#ifndef CMFDA_SYNTH_FORGERY_HPP_
#define CMFDA_SYNTH_FORGERY_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cmfda/error.hpp"
#include "cmfda/image/raster.hpp"
#include "cmfda/rng.hpp"

namespace cmfda::synth {

using image::ObjectMask;
using image::RasterImage;

inline constexpr const char* kGeneratorVersion = "cmfda-synth/1";

struct AffineParams {
  double rotation_deg = 0;
  double scale = 1;
  double translate_x = 0;
  double translate_y = 0;
  bool flip_horizontal = false;

  friend bool operator==(const AffineParams&, const AffineParams&) = default;
};

struct BlendParams {
  double alpha = 1;
  int feather_radius = 0;

  friend bool operator==(const BlendParams&, const BlendParams&) = default;
};

enum class ForgeryMethod { kCopyMove, kInpaint };

/// Everything needed to re-render a forged image from its source.
struct ForgeryProvenance {
  ForgeryMethod method = ForgeryMethod::kCopyMove;
  std::string source_id;
  std::string category;
  std::size_t mask_index = 0;
  AffineParams affine;
  BlendParams blend;
  int inpaint_iterations = 0;
  std::string generator_version = kGeneratorVersion;
  std::uint64_t seed = 0;

  friend bool operator==(const ForgeryProvenance&, const ForgeryProvenance&) = default;
};

inline nlohmann::json to_json(const ForgeryProvenance& p) {
  nlohmann::json j;
  j["method"] = p.method == ForgeryMethod::kCopyMove ? "copy_move" : "inpaint";
  j["source_id"] = p.source_id;
  j["category"] = p.category;
  j["mask_index"] = p.mask_index;
  if (p.method == ForgeryMethod::kCopyMove) {
    j["affine"] = {{"rotation_deg", p.affine.rotation_deg},
                   {"scale", p.affine.scale},
                   {"translate_x", p.affine.translate_x},
                   {"translate_y", p.affine.translate_y},
                   {"flip_horizontal", p.affine.flip_horizontal}};
    j["blend"] = {{"alpha", p.blend.alpha}, {"feather_radius", p.blend.feather_radius}};
  } else {
    j["inpaint_iterations"] = p.inpaint_iterations;
  }
  j["generator_version"] = p.generator_version;
  j["seed"] = p.seed;
  return j;
}

inline ForgeryProvenance provenance_from_json(const nlohmann::json& j) {
  ForgeryProvenance p;
  try {
    const auto method = j.at("method").get<std::string>();
    if (method == "copy_move") {
      p.method = ForgeryMethod::kCopyMove;
    } else if (method == "inpaint") {
      p.method = ForgeryMethod::kInpaint;
    } else {
      throw DataError("provenance: unknown method '" + method + "'");
    }
    p.source_id = j.at("source_id").get<std::string>();
    p.category = j.at("category").get<std::string>();
    p.mask_index = j.at("mask_index").get<std::size_t>();
    if (p.method == ForgeryMethod::kCopyMove) {
      const auto& a = j.at("affine");
      p.affine = {a.at("rotation_deg").get<double>(), a.at("scale").get<double>(),
                  a.at("translate_x").get<double>(), a.at("translate_y").get<double>(),
                  a.at("flip_horizontal").get<bool>()};
      const auto& b = j.at("blend");
      p.blend = {b.at("alpha").get<double>(), b.at("feather_radius").get<int>()};
    } else {
      p.inpaint_iterations = j.at("inpaint_iterations").get<int>();
    }
    p.generator_version = j.at("generator_version").get<std::string>();
    p.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("provenance: ") + e.what());
  }
  return p;
}

/// Index of the largest-area mask of `category` (empty category matches any);
/// ties go to the lowest index. nullopt means "skip this image".
inline std::optional<std::size_t> select_largest_mask(std::span<const ObjectMask> masks,
                                                      const std::string& category) {
  std::optional<std::size_t> best;
  std::size_t best_area = 0;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (!category.empty() && masks[i].category != category) continue;
    const std::size_t a = masks[i].area();
    if (a == 0) continue;
    if (!best || a > best_area) {
      best = i;
      best_area = a;
    }
  }
  return best;
}

struct TransformedObject {
  RasterImage image;
  ObjectMask mask;
};

/// Rotates/scales/flips the object about its bounding-box centre, then
/// translates. Pixels are resampled bilinearly, the mask by nearest neighbour.
/// Output has the input frame size. Throws RetrySignal when nothing of the
/// object remains in frame.
inline TransformedObject apply_affine(const RasterImage& img, const ObjectMask& mask,
                                      const AffineParams& params) {
  if (!(params.scale > 0)) throw UsageError("apply_affine: scale must be > 0");
  if (mask.width != img.width || mask.height != img.height) {
    throw UsageError("apply_affine: mask and image sizes differ");
  }
  const image::BoundingBox box = image::bounding_box(mask);
  const double cx = box.center_x(), cy = box.center_y();
  const double theta = params.rotation_deg * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double flip = params.flip_horizontal ? -1.0 : 1.0;
  const double inv_s = 1.0 / params.scale;

  TransformedObject out{RasterImage(img.width, img.height, img.color_space),
                        ObjectMask(mask.width, mask.height, mask.category)};
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      // q = c + F^-1 S^-1 R(-theta) (p - c - t)
      const double dx = static_cast<double>(x) - cx - params.translate_x;
      const double dy = static_cast<double>(y) - cy - params.translate_y;
      const double rx = cos_t * dx + sin_t * dy;
      const double ry = -sin_t * dx + cos_t * dy;
      const double qx = cx + flip * rx * inv_s;
      const double qy = cy + ry * inv_s;
      const double nx = std::floor(qx + 0.5), ny = std::floor(qy + 0.5);
      if (nx >= 0 && ny >= 0 && nx < static_cast<double>(mask.width) &&
          ny < static_cast<double>(mask.height)) {
        out.mask.at(x, y) = mask.at(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny)) ? 1 : 0;
      }
      for (std::size_t c = 0; c < 3; ++c) {
        out.image.at(x, y, c) = image::clamp_u8(image::sample_bilinear(img, qx, qy, c));
      }
    }
  }
  if (out.mask.area() == 0) throw RetrySignal("apply_affine: transformed object left the frame");
  return out;
}

/// Per-pixel blend weight in [0,1]: 1 deep inside the mask, ramping down over
/// `radius` pixels towards the mask edge, 0 outside. Chessboard distance.
inline std::vector<double> feather_weights(const ObjectMask& mask, int radius) {
  if (radius < 0) throw UsageError("feather radius must be >= 0");
  const std::size_t w = mask.width, h = mask.height;
  std::vector<int> dist(w * h, 0);
  for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = mask.bits[i] ? 1 : 0;
  // Layer-by-layer erosion: a pixel at distance d has every 8-neighbour at >= d.
  for (int level = 1; level <= radius; ++level) {
    std::vector<int> next = dist;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        if (dist[y * w + x] != level) continue;
        bool interior = true;
        for (int dy = -1; dy <= 1 && interior; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const auto nx = static_cast<std::ptrdiff_t>(x) + dx;
            const auto ny = static_cast<std::ptrdiff_t>(y) + dy;
            if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(w) ||
                ny >= static_cast<std::ptrdiff_t>(h)) {
              continue;  // frame edge does not count as outside
            }
            if (dist[static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx)] < level) {
              interior = false;
              break;
            }
          }
        }
        if (interior) next[y * w + x] = level + 1;
      }
    }
    dist = std::move(next);
  }
  std::vector<double> weights(w * h, 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] = std::min(1.0, static_cast<double>(dist[i]) / static_cast<double>(radius + 1));
  }
  return weights;
}

/// I = a F + (1 - a) B, with a = alpha * feather weight; background elsewhere.
inline RasterImage alpha_blend(const RasterImage& foreground, const RasterImage& background,
                               const ObjectMask& mask, const BlendParams& params) {
  if (foreground.width != background.width || foreground.height != background.height ||
      mask.width != background.width || mask.height != background.height) {
    throw UsageError("alpha_blend: dimension mismatch");
  }
  if (!(params.alpha >= 0.0 && params.alpha <= 1.0)) throw UsageError("alpha_blend: alpha outside [0,1]");
  foreground.validate();
  background.validate();
  const auto weights = feather_weights(mask, params.feather_radius);
  RasterImage out = background;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    const double a = params.alpha * weights[i];
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t k = i * 3 + c;
      out.data[k] = image::clamp_u8(a * foreground.data[k] + (1.0 - a) * background.data[k]);
    }
  }
  return out;
}

class DegenerateBlendError : public UsageError {
 public:
  using UsageError::UsageError;
};

/// Sampling ranges for copy-move generation.
struct CopyMoveOptions {
  double max_rotation_deg = 30;
  double min_scale = 0.7;
  double max_scale = 1.3;
  double max_translate_fraction = 0.4;
  double min_alpha = 0.85;
  double max_alpha = 1.0;
  int feather_radius = 2;
  int retry_budget = 5;
  double min_in_frame_fraction = 0.8;
  /// A paste may cover at most this fraction of itself with the original object.
  double max_self_overlap = 0.0;
  std::optional<double> forced_alpha;
};

struct ForgeryPair {
  RasterImage authentic;
  RasterImage forged;
  ForgeryProvenance provenance;
};

/// Renders the forged image for fixed parameters.
inline RasterImage render_copy_move(const RasterImage& img, const ObjectMask& mask,
                                    const AffineParams& affine, const BlendParams& blend) {
  const TransformedObject moved = apply_affine(img, mask, affine);
  return alpha_blend(moved.image, img, moved.mask, blend);
}

inline ForgeryPair make_copy_move_pair(const RasterImage& img, std::span<const ObjectMask> masks,
                                       const std::string& category, std::uint64_t seed,
                                       const std::string& source_id = {},
                                       const CopyMoveOptions& opt = {}) {
  if (opt.forced_alpha && *opt.forced_alpha == 0.0) {
    throw DegenerateBlendError("make_copy_move_pair: alpha 0 leaves the image unchanged");
  }
  const auto index = select_largest_mask(masks, category);
  if (!index) throw GenerationSkip("no mask of category '" + category + "'");
  const ObjectMask& mask = masks[*index];
  const double area = static_cast<double>(mask.area());

  Rng rng(seed);
  for (int attempt = 0; attempt < opt.retry_budget; ++attempt) {
    AffineParams affine;
    affine.rotation_deg = rng.uniform(-opt.max_rotation_deg, opt.max_rotation_deg);
    affine.scale = rng.uniform(opt.min_scale, opt.max_scale);
    affine.translate_x = rng.uniform(-opt.max_translate_fraction, opt.max_translate_fraction) *
                         static_cast<double>(img.width);
    affine.translate_y = rng.uniform(-opt.max_translate_fraction, opt.max_translate_fraction) *
                         static_cast<double>(img.height);
    affine.flip_horizontal = rng.uniform() < 0.5;
    BlendParams blend{opt.forced_alpha.value_or(rng.uniform(opt.min_alpha, opt.max_alpha)),
                      opt.feather_radius};

    TransformedObject moved;
    try {
      moved = apply_affine(img, mask, affine);
    } catch (const RetrySignal&) {
      continue;
    }
    const double in_frame = static_cast<double>(moved.mask.area()) /
                            (area * affine.scale * affine.scale);
    if (in_frame < opt.min_in_frame_fraction) continue;
    std::size_t overlap = 0;
    for (std::size_t i = 0; i < mask.bits.size(); ++i) overlap += (mask.bits[i] && moved.mask.bits[i]);
    if (static_cast<double>(overlap) > opt.max_self_overlap * static_cast<double>(moved.mask.area())) {
      continue;
    }
    RasterImage forged = alpha_blend(moved.image, img, moved.mask, blend);
    if (forged == img) continue;

    ForgeryProvenance prov;
    prov.method = ForgeryMethod::kCopyMove;
    prov.source_id = source_id;
    prov.category = mask.category;
    prov.mask_index = *index;
    prov.affine = affine;
    prov.blend = blend;
    prov.seed = seed;
    return {img, std::move(forged), std::move(prov)};
  }
  throw GenerationSkip("copy-move: retry budget of " + std::to_string(opt.retry_budget) +
                       " exhausted");
}

/// Diffusion fill: masked pixels start at the mean of the unmasked pixels
/// bordering the mask, then each Jacobi iteration replaces every masked pixel
/// with the mean of its in-frame 4-neighbours. Unmasked pixels never change.
inline RasterImage simple_inpaint(const RasterImage& img, const ObjectMask& mask, int iterations) {
  if (mask.width != img.width || mask.height != img.height) {
    throw UsageError("simple_inpaint: mask and image sizes differ");
  }
  if (iterations < 0) throw UsageError("simple_inpaint: iterations must be >= 0");
  const std::size_t area = mask.area();
  const std::size_t total = img.width * img.height;
  if (area == 0) return img;
  if (2 * area >= total) throw UsageError("simple_inpaint: mask must cover less than half the image");

  const std::size_t w = img.width, h = img.height;
  std::vector<std::size_t> holes;
  for (std::size_t i = 0; i < total; ++i) if (mask.bits[i]) holes.push_back(i);

  double seed_color[3] = {0, 0, 0};
  std::size_t border = 0;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (mask.at(x, y)) continue;
      const bool touches = (x > 0 && mask.at(x - 1, y)) || (x + 1 < w && mask.at(x + 1, y)) ||
                           (y > 0 && mask.at(x, y - 1)) || (y + 1 < h && mask.at(x, y + 1));
      if (!touches) continue;
      for (std::size_t c = 0; c < 3; ++c) seed_color[c] += img.at(x, y, c);
      ++border;
    }
  }
  for (double& c : seed_color) c /= static_cast<double>(border);

  std::vector<double> field(total * 3);
  for (std::size_t i = 0; i < total * 3; ++i) field[i] = img.data[i];
  for (std::size_t i : holes) {
    for (std::size_t c = 0; c < 3; ++c) field[i * 3 + c] = seed_color[c];
  }
  std::vector<double> next = field;
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i : holes) {
      const std::size_t x = i % w, y = i / w;
      double acc[3] = {0, 0, 0};
      int n = 0;
      auto add = [&](std::size_t j) {
        for (std::size_t c = 0; c < 3; ++c) acc[c] += field[j * 3 + c];
        ++n;
      };
      if (x > 0) add(i - 1);
      if (x + 1 < w) add(i + 1);
      if (y > 0) add(i - w);
      if (y + 1 < h) add(i + w);
      for (std::size_t c = 0; c < 3; ++c) next[i * 3 + c] = acc[c] / n;
    }
    for (std::size_t i : holes) {
      for (std::size_t c = 0; c < 3; ++c) field[i * 3 + c] = next[i * 3 + c];
    }
  }
  RasterImage out = img;
  for (std::size_t i : holes) {
    for (std::size_t c = 0; c < 3; ++c) out.data[i * 3 + c] = image::clamp_u8(field[i * 3 + c]);
  }
  return out;
}

/// Removes the largest object (any category unless given) by diffusion fill.
inline ForgeryPair make_inpaint_pair(const RasterImage& img, std::span<const ObjectMask> masks,
                                     const std::string& category, std::uint64_t seed,
                                     const std::string& source_id, int iterations) {
  const auto index = select_largest_mask(masks, category);
  if (!index) throw GenerationSkip("no mask of category '" + category + "'");
  const ObjectMask& mask = masks[*index];
  if (2 * mask.area() >= img.width * img.height) {
    throw GenerationSkip("inpaint: object covers half the image or more");
  }
  RasterImage filled = simple_inpaint(img, mask, iterations);
  if (filled == img) throw GenerationSkip("inpaint: fill reproduced the original");
  ForgeryProvenance prov;
  prov.method = ForgeryMethod::kInpaint;
  prov.source_id = source_id;
  prov.category = mask.category;
  prov.mask_index = *index;
  prov.inpaint_iterations = iterations;
  prov.seed = seed;
  return {img, std::move(filled), std::move(prov)};
}

/// Re-renders the forged image described by `prov` from its source.
inline RasterImage regenerate(const RasterImage& img, std::span<const ObjectMask> masks,
                              const ForgeryProvenance& prov) {
  if (prov.mask_index >= masks.size()) throw DataError("provenance mask index out of range");
  const ObjectMask& mask = masks[prov.mask_index];
  if (prov.method == ForgeryMethod::kCopyMove) {
    return render_copy_move(img, mask, prov.affine, prov.blend);
  }
  return simple_inpaint(img, mask, prov.inpaint_iterations);
}

}  // namespace cmfda::synth

#endif  // CMFDA_SYNTH_FORGERY_HPP_
