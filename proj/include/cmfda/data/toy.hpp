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

// Small procedural data sources: the bundled texture/shape corpus and the
// two-moons point sets used for domain-shift experiments.

#ifndef CMFDA_DATA_TOY_HPP_
#define CMFDA_DATA_TOY_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmfda/data/batching.hpp"
#include "cmfda/image/coco.hpp"
#include "cmfda/image/io.hpp"
#include "cmfda/image/raster.hpp"
#include "cmfda/rng.hpp"

namespace cmfda::data {

/// Two interleaved half circles. Class 0 is the upper moon, class 1 the lower.
template <typename T>
Dataset<T> make_moons(std::size_t n, double noise, std::uint64_t seed) {
  Rng rng(seed);
  Dataset<T> ds{nn::Tensor<T>({n, 2}), std::vector<int>(n), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double t = rng.uniform(0.0, std::numbers::pi);
    double x = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double y = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
    x += noise * rng.normal();
    y += noise * rng.normal();
    ds.inputs.at(i, 0) = static_cast<T>(x);
    ds.inputs.at(i, 1) = static_cast<T>(y);
    ds.labels[i] = label;
  }
  return ds;
}

/// Rotates 2-D points counter-clockwise by `degrees` about (cx, cy).
template <typename T>
Dataset<T> rotate_points(const Dataset<T>& ds, double degrees, double cx = 0.0, double cy = 0.0) {
  Dataset<T> out = ds;
  const double th = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double x = ds.inputs.at(i, 0) - cx, y = ds.inputs.at(i, 1) - cy;
    out.inputs.at(i, 0) = static_cast<T>(cx + c * x - s * y);
    out.inputs.at(i, 1) = static_cast<T>(cy + s * x + c * y);
  }
  return out;
}

struct ToyCorpusOptions {
  std::size_t images = 200;
  std::size_t side = 64;
  std::uint64_t seed = 20240601;
  double background_wave = 8;   // amplitude of the dominant background wave
  double background_noise = 3;  // per-pixel Gaussian sigma
  double object_stripe = 40;    // amplitude of the stripe pattern on objects
  double background_lo = 30, background_hi = 100;  // base colour range per channel
  double object_lo = 150, object_hi = 255;
  double object_radius_lo = 0.16, object_radius_hi = 0.18;  // fraction of side
  std::size_t second_object_every = 10;
};

namespace detail {

inline std::array<double, 3> random_color(Rng& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

inline std::vector<double> regular_polygon(double cx, double cy, double r, int sides, double phase) {
  std::vector<double> xy;
  for (int i = 0; i < sides; ++i) {
    const double a = phase + 2.0 * std::numbers::pi * i / sides;
    xy.push_back(cx + r * std::cos(a));
    xy.push_back(cy + r * std::sin(a));
  }
  return xy;
}

struct PlacedShape {
  std::string category;
  image::ObjectMask mask;
  nlohmann::json segmentation;
};

inline PlacedShape place_shape(Rng& rng, std::size_t side, const std::string& category, double radius,
                               double cx, double cy) {
  PlacedShape s{category, image::ObjectMask(side, side, category), {}};
  if (category == "disc") {
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        if (dx * dx + dy * dy <= radius * radius) s.mask.at(x, y) = 1;
      }
    }
    const image::Rle rle = image::rle_encode(s.mask);
    // Alternate between the two RLE encodings so both readers are exercised.
    if (rng.uniform() < 0.5) {
      s.segmentation = {{"size", {side, side}}, {"counts", image::rle_counts_to_string(rle.counts)}};
    } else {
      s.segmentation = {{"size", {side, side}}, {"counts", rle.counts}};
    }
  } else {
    // Circumradii giving the same area as a disc of `radius`.
    const int sides = category == "box" ? 4 : 3;
    const double circumradius = radius * (category == "box" ? std::sqrt(std::numbers::pi / 2)
                                                            : std::sqrt(4 * std::numbers::pi / (3 * std::sqrt(3.0))));
    const auto poly = regular_polygon(cx, cy, circumradius, sides, rng.uniform(0.0, std::numbers::pi));
    image::rasterize_polygon(poly, s.mask);
    s.segmentation = nlohmann::json::array({poly});
  }
  return s;
}

}  // namespace detail

/// Writes `images` PNGs plus a COCO-style annotations.json into `dir`.
/// Each image: smooth two-wave texture background with one textured object
/// (disc, box or tri); every `second_object_every`-th image carries a second,
/// smaller object.
inline void write_toy_corpus(const std::filesystem::path& dir, const ToyCorpusOptions& opt = {}) {
  std::filesystem::create_directories(dir);
  const std::array<std::string, 3> categories{"disc", "box", "tri"};
  nlohmann::json root;
  root["categories"] = nlohmann::json::array();
  for (std::size_t c = 0; c < categories.size(); ++c) {
    root["categories"].push_back({{"id", c + 1}, {"name", categories[c]}});
  }
  root["images"] = nlohmann::json::array();
  root["annotations"] = nlohmann::json::array();
  std::size_t ann_id = 1;
  const double side = static_cast<double>(opt.side);

  for (std::size_t i = 0; i < opt.images; ++i) {
    Rng rng(hash_combine(opt.seed, i));
    image::RasterImage img(opt.side, opt.side);
    const auto base = detail::random_color(rng, opt.background_lo, opt.background_hi);
    const auto tint = detail::random_color(rng, -1, 1);
    const double f1 = rng.uniform(0.03, 0.12), f2 = rng.uniform(0.03, 0.12);
    const double a1 = rng.uniform(0, std::numbers::pi), a2 = rng.uniform(0, std::numbers::pi);
    for (std::size_t y = 0; y < opt.side; ++y) {
      for (std::size_t x = 0; x < opt.side; ++x) {
        const double w1 = std::sin(f1 * (x * std::cos(a1) + y * std::sin(a1)) * 2 * std::numbers::pi);
        const double w2 = std::sin(f2 * (x * std::cos(a2) + y * std::sin(a2)) * 2 * std::numbers::pi);
        for (std::size_t c = 0; c < 3; ++c) {
          img.at(x, y, c) = image::clamp_u8(base[c] + opt.background_wave * (w1 + 0.6 * tint[c] * w2) + opt.background_noise * rng.normal());
        }
      }
    }

    const std::size_t n_objects = (i % opt.second_object_every == opt.second_object_every - 1) ? 2 : 1;
    std::vector<detail::PlacedShape> shapes;
    double first_cx = 0, first_cy = 0, first_r = 0;
    for (std::size_t k = 0; k < n_objects; ++k) {
      const std::string cat = categories[(i + k * 2) % categories.size()];
      const double r = k == 0 ? rng.uniform(opt.object_radius_lo, opt.object_radius_hi) * side
                              : rng.uniform(0.05, 0.065) * side;
      double cx = 0, cy = 0;
      for (int tries = 0; tries < 100; ++tries) {
        cx = rng.uniform(r + 4, side - r - 4);
        cy = rng.uniform(r + 4, side - r - 4);
        if (k == 0 || std::hypot(cx - first_cx, cy - first_cy) > first_r * 1.45 + r * 1.45 + 2) break;
      }
      if (k == 0) {
        first_cx = cx;
        first_cy = cy;
        first_r = r;
      }
      auto shape = detail::place_shape(rng, opt.side, cat, r, cx, cy);
      const auto color = detail::random_color(rng, opt.object_lo, opt.object_hi);
      const double stripe_f = rng.uniform(0.15, 0.35);
      const double stripe_a = rng.uniform(0, std::numbers::pi);
      for (std::size_t y = 0; y < opt.side; ++y) {
        for (std::size_t x = 0; x < opt.side; ++x) {
          if (!shape.mask.at(x, y)) continue;
          const double shade = 0.75 + 0.25 * (static_cast<double>(y) - cy + r) / (2 * r);
          const double stripe = std::sin(stripe_f * (x * std::cos(stripe_a) + y * std::sin(stripe_a)) *
                                         2 * std::numbers::pi);
          for (std::size_t c = 0; c < 3; ++c) {
            img.at(x, y, c) = image::clamp_u8(color[c] * shade + opt.object_stripe * stripe + 3 * rng.normal());
          }
        }
      }
      shapes.push_back(std::move(shape));
    }

    char name[32];
    std::snprintf(name, sizeof(name), "toy_%03zu.png", i);
    image::write_png(dir / name, img);
    root["images"].push_back(
        {{"id", i + 1}, {"file_name", name}, {"width", opt.side}, {"height", opt.side}});
    for (const auto& s : shapes) {
      std::size_t cat_id = 0;
      for (std::size_t c = 0; c < categories.size(); ++c) {
        if (categories[c] == s.category) cat_id = c + 1;
      }
      root["annotations"].push_back({{"id", ann_id++},
                                     {"image_id", i + 1},
                                     {"category_id", cat_id},
                                     {"area", s.mask.area()},
                                     {"iscrowd", 0},
                                     {"segmentation", s.segmentation}});
    }
  }
  std::ofstream out(dir / "annotations.json");
  out << root.dump(1) << '\n';
}

}  // namespace cmfda::data

#endif  // CMFDA_DATA_TOY_HPP_
