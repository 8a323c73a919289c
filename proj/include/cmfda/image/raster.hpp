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

#ifndef CMFDA_IMAGE_RASTER_HPP_
#define CMFDA_IMAGE_RASTER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cmfda/error.hpp"

namespace cmfda::image {

enum class ColorSpace { kRgb, kYCrCb };

inline std::string_view color_space_name(ColorSpace cs) {
  return cs == ColorSpace::kRgb ? "rgb" : "ycrcb";
}

inline ColorSpace parse_color_space(std::string_view s) {
  if (s == "rgb") return ColorSpace::kRgb;
  if (s == "ycrcb") return ColorSpace::kYCrCb;
  throw ConfigError("unknown color space '" + std::string(s) + "' (expected rgb|ycrcb)");
}

inline std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

/// 8-bit, 3-channel, interleaved, row-major.
struct RasterImage {
  static constexpr std::size_t kChannels = 3;

  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> data;
  ColorSpace color_space = ColorSpace::kRgb;

  RasterImage() = default;
  RasterImage(std::size_t w, std::size_t h, ColorSpace cs = ColorSpace::kRgb)
      : width(w), height(h), data(w * h * kChannels, 0), color_space(cs) {}

  std::size_t channels() const { return kChannels; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return (y * width + x) * kChannels + c;
  }
  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return data[index(x, y, c)]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return data[index(x, y, c)]; }

  void validate() const {
    if (data.size() != width * height * kChannels) {
      throw DataError("raster image: " + std::to_string(data.size()) + " bytes for " +
                      std::to_string(width) + "x" + std::to_string(height));
    }
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

/// Binary per-pixel support of one annotated object.
struct ObjectMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1
  std::string category;

  ObjectMask() = default;
  ObjectMask(std::size_t w, std::size_t h, std::string cat = {})
      : width(w), height(h), bits(w * h, 0), category(std::move(cat)) {}

  std::uint8_t& at(std::size_t x, std::size_t y) { return bits[y * width + x]; }
  std::uint8_t at(std::size_t x, std::size_t y) const { return bits[y * width + x]; }

  std::size_t area() const {
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(),
                                                  [](std::uint8_t b) { return b != 0; }));
  }

  friend bool operator==(const ObjectMask&, const ObjectMask&) = default;
};

struct BoundingBox {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
  double center_x() const { return 0.5 * static_cast<double>(x0 + x1); }
  double center_y() const { return 0.5 * static_cast<double>(y0 + y1); }
};

/// Bounding box of the set pixels; empty masks throw.
inline BoundingBox bounding_box(const ObjectMask& mask) {
  BoundingBox b{mask.width, mask.height, 0, 0};
  bool any = false;
  for (std::size_t y = 0; y < mask.height; ++y) {
    for (std::size_t x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      any = true;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  if (!any) throw UsageError("bounding_box: empty mask");
  return b;
}

// BT.601 full-range coefficients. The inverse coefficients are derived from
// the forward ones rather than rounded table values.
namespace bt601 {
inline constexpr double kR = 0.299, kG = 0.587, kB = 0.114;
inline constexpr double kCr = 0.713, kCb = 0.564;
}  // namespace bt601

inline RasterImage rgb_to_ycrcb(const RasterImage& rgb) {
  if (rgb.color_space != ColorSpace::kRgb) throw UsageError("rgb_to_ycrcb: input is not RGB");
  rgb.validate();
  RasterImage out(rgb.width, rgb.height, ColorSpace::kYCrCb);
  for (std::size_t i = 0; i < rgb.data.size(); i += 3) {
    const double r = rgb.data[i], g = rgb.data[i + 1], b = rgb.data[i + 2];
    const double y = bt601::kR * r + bt601::kG * g + bt601::kB * b;
    out.data[i] = clamp_u8(y);
    out.data[i + 1] = clamp_u8((r - y) * bt601::kCr + 128.0);
    out.data[i + 2] = clamp_u8((b - y) * bt601::kCb + 128.0);
  }
  return out;
}

inline RasterImage ycrcb_to_rgb(const RasterImage& ycc) {
  if (ycc.color_space != ColorSpace::kYCrCb) throw UsageError("ycrcb_to_rgb: input is not YCrCb");
  ycc.validate();
  RasterImage out(ycc.width, ycc.height, ColorSpace::kRgb);
  for (std::size_t i = 0; i < ycc.data.size(); i += 3) {
    const double y = ycc.data[i];
    const double r_minus_y = (ycc.data[i + 1] - 128.0) / bt601::kCr;
    const double b_minus_y = (ycc.data[i + 2] - 128.0) / bt601::kCb;
    const double g = y - (bt601::kR * r_minus_y + bt601::kB * b_minus_y) / bt601::kG;
    out.data[i] = clamp_u8(y + r_minus_y);
    out.data[i + 1] = clamp_u8(g);
    out.data[i + 2] = clamp_u8(y + b_minus_y);
  }
  return out;
}

inline RasterImage convert_color(const RasterImage& img, ColorSpace target) {
  if (img.color_space == target) return img;
  return target == ColorSpace::kYCrCb ? rgb_to_ycrcb(img) : ycrcb_to_rgb(img);
}

/// Bilinear sample at continuous pixel coordinates (pixel centers on integers),
/// clamping to the border.
inline double sample_bilinear(const RasterImage& img, double x, double y, std::size_t c) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x1 = std::min(x0 + 1, img.width - 1);
  const std::size_t y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
  const double top = img.at(x0, y0, c) * (1 - fx) + img.at(x1, y0, c) * fx;
  const double bottom = img.at(x0, y1, c) * (1 - fx) + img.at(x1, y1, c) * fx;
  return top * (1 - fy) + bottom * fy;
}

/// Bilinear resampling with half-pixel centers (align_corners = false).
inline RasterImage resize_bilinear(const RasterImage& img, std::size_t out_w, std::size_t out_h) {
  img.validate();
  if (img.width == 0 || img.height == 0 || out_w == 0 || out_h == 0) {
    throw UsageError("resize_bilinear: degenerate dimensions");
  }
  if (out_w == img.width && out_h == img.height) return img;
  RasterImage out(out_w, out_h, img.color_space);
  const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
  const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double src_y = (static_cast<double>(y) + 0.5) * sy - 0.5;
    for (std::size_t x = 0; x < out_w; ++x) {
      const double src_x = (static_cast<double>(x) + 0.5) * sx - 0.5;
      for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = clamp_u8(sample_bilinear(img, src_x, src_y, c));
    }
  }
  return out;
}

/// Square network-input resize; side must be at least 8.
inline RasterImage resize_square(const RasterImage& img, std::size_t side) {
  if (side < 8) throw UsageError("resize_square: side must be >= 8");
  return resize_bilinear(img, side, side);
}

/// Nearest-neighbour mask resize, used to keep masks aligned with resized images.
inline ObjectMask resize_nearest(const ObjectMask& mask, std::size_t out_w, std::size_t out_h) {
  ObjectMask out(out_w, out_h, mask.category);
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto sy = std::min(mask.height - 1, y * mask.height / out_h);
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto sx = std::min(mask.width - 1, x * mask.width / out_w);
      out.at(x, y) = mask.at(sx, sy);
    }
  }
  return out;
}

}  // namespace cmfda::image

#endif  // CMFDA_IMAGE_RASTER_HPP_
