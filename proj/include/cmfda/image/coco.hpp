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

// COCO-style instance annotations: only image records, category names and
// segmentation masks (polygon or RLE) are consumed.

#ifndef CMFDA_IMAGE_COCO_HPP_
#define CMFDA_IMAGE_COCO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmfda/error.hpp"
#include "cmfda/image/raster.hpp"

namespace cmfda::image {

/// Column-major run lengths, first run counts zeros.
struct Rle {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> counts;
};

inline ObjectMask rle_decode(const Rle& rle, std::string category = {}) {
  ObjectMask mask(rle.width, rle.height, std::move(category));
  std::size_t pos = 0;
  std::uint8_t value = 0;
  const std::size_t total = rle.width * rle.height;
  for (std::uint32_t run : rle.counts) {
    if (pos + run > total) throw DataError("rle: runs exceed mask size");
    for (std::size_t i = 0; i < run; ++i, ++pos) {
      const std::size_t x = pos / rle.height, y = pos % rle.height;
      mask.at(x, y) = value;
    }
    value ^= 1;
  }
  if (pos != total) throw DataError("rle: runs cover " + std::to_string(pos) + " of " +
                                    std::to_string(total) + " pixels");
  return mask;
}

inline Rle rle_encode(const ObjectMask& mask) {
  Rle rle{mask.height, mask.width, {}};
  std::uint8_t value = 0;
  std::uint32_t run = 0;
  for (std::size_t x = 0; x < mask.width; ++x) {
    for (std::size_t y = 0; y < mask.height; ++y) {
      const std::uint8_t b = mask.at(x, y) ? 1 : 0;
      if (b != value) {
        rle.counts.push_back(run);
        run = 0;
        value = b;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

/// COCO compressed RLE string: LEB128-like 5-bit groups offset by '0', each
/// count after the second stored as a delta from the count two positions back.
inline std::vector<std::uint32_t> rle_counts_from_string(const std::string& s) {
  std::vector<std::int64_t> counts;
  std::size_t p = 0;
  while (p < s.size()) {
    std::int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= s.size()) throw DataError("rle string truncated");
      const std::int64_t c = static_cast<std::int64_t>(s[p]) - 48;
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= static_cast<std::int64_t>(-1) * (std::int64_t{1} << (5 * k));
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    if (x < 0) throw DataError("rle string decodes to a negative run");
    counts.push_back(x);
  }
  return {counts.begin(), counts.end()};
}

inline std::string rle_counts_to_string(const std::vector<std::uint32_t>& counts) {
  std::string s;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::int64_t x = counts[i];
    if (i > 2) x -= counts[i - 2];
    bool more = true;
    while (more) {
      std::int64_t c = x & 0x1f;
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      s.push_back(static_cast<char>(c + 48));
    }
  }
  return s;
}

/// Even-odd fill of the pixels whose centres (x + 0.5, y + 0.5) fall inside
/// the polygon given as [x0, y0, x1, y1, ...]. ORs into `mask`.
inline void rasterize_polygon(const std::vector<double>& xy, ObjectMask& mask) {
  if (xy.size() < 6 || xy.size() % 2) throw DataError("polygon needs >= 3 vertices");
  const std::size_t n = xy.size() / 2;
  std::vector<double> crossings;
  for (std::size_t y = 0; y < mask.height; ++y) {
    const double yc = static_cast<double>(y) + 0.5;
    crossings.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const double xa = xy[2 * i], ya = xy[2 * i + 1];
      const double xb = xy[2 * ((i + 1) % n)], yb = xy[2 * ((i + 1) % n) + 1];
      if ((ya <= yc) != (yb <= yc)) crossings.push_back(xa + (yc - ya) * (xb - xa) / (yb - ya));
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      const double lo = std::ceil(crossings[k] - 0.5);
      const double hi = std::ceil(crossings[k + 1] - 0.5);
      const auto x0 = static_cast<std::ptrdiff_t>(std::max(lo, 0.0));
      const auto x1 = static_cast<std::ptrdiff_t>(std::min(hi, static_cast<double>(mask.width)));
      for (std::ptrdiff_t x = x0; x < x1; ++x) mask.at(static_cast<std::size_t>(x), y) = 1;
    }
  }
}

struct CocoImage {
  std::int64_t id = 0;
  std::string file_name;
  std::size_t width = 0;
  std::size_t height = 0;
};

struct CocoAnnotation {
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  nlohmann::json segmentation;
};

struct CocoDataset {
  std::vector<CocoImage> images;  // file order
  std::map<std::int64_t, std::string> categories;
  std::map<std::int64_t, std::vector<CocoAnnotation>> annotations_by_image;

  /// Rasterized masks of one image, in annotation order.
  std::vector<ObjectMask> masks_for(const CocoImage& img) const;
};

inline ObjectMask rasterize_segmentation(const nlohmann::json& seg, std::size_t width,
                                         std::size_t height, const std::string& category) {
  if (seg.is_array()) {
    ObjectMask mask(width, height, category);
    for (const auto& poly : seg) rasterize_polygon(poly.get<std::vector<double>>(), mask);
    return mask;
  }
  if (seg.is_object() && seg.contains("counts") && seg.contains("size")) {
    Rle rle;
    const auto size = seg.at("size").get<std::vector<std::size_t>>();
    if (size.size() != 2) throw DataError("rle size must be [h, w]");
    rle.height = size[0];
    rle.width = size[1];
    if (rle.height != height || rle.width != width) {
      throw DataError("rle size does not match its image");
    }
    const auto& counts = seg.at("counts");
    rle.counts = counts.is_string() ? rle_counts_from_string(counts.get<std::string>())
                                    : counts.get<std::vector<std::uint32_t>>();
    return rle_decode(rle, category);
  }
  throw DataError("unsupported segmentation encoding");
}

inline std::vector<ObjectMask> CocoDataset::masks_for(const CocoImage& img) const {
  std::vector<ObjectMask> masks;
  auto it = annotations_by_image.find(img.id);
  if (it == annotations_by_image.end()) return masks;
  for (const auto& ann : it->second) {
    auto cat = categories.find(ann.category_id);
    const std::string name = cat == categories.end() ? std::to_string(ann.category_id) : cat->second;
    masks.push_back(rasterize_segmentation(ann.segmentation, img.width, img.height, name));
  }
  return masks;
}

inline CocoDataset parse_coco(const nlohmann::json& root) {
  CocoDataset ds;
  try {
    for (const auto& im : root.at("images")) {
      ds.images.push_back({im.at("id").get<std::int64_t>(), im.at("file_name").get<std::string>(),
                           im.at("width").get<std::size_t>(), im.at("height").get<std::size_t>()});
    }
    if (root.contains("categories")) {
      for (const auto& c : root.at("categories")) {
        ds.categories[c.at("id").get<std::int64_t>()] = c.at("name").get<std::string>();
      }
    }
    if (root.contains("annotations")) {
      for (const auto& a : root.at("annotations")) {
        if (!a.contains("segmentation")) continue;
        CocoAnnotation ann{a.at("image_id").get<std::int64_t>(),
                           a.at("category_id").get<std::int64_t>(), a.at("segmentation")};
        ds.annotations_by_image[ann.image_id].push_back(std::move(ann));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("coco annotations: ") + e.what());
  }
  return ds;
}

inline CocoDataset load_coco(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotations " + path.string());
  try {
    return parse_coco(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("annotations " + path.string() + ": " + e.what());
  }
}

}  // namespace cmfda::image

#endif  // CMFDA_IMAGE_COCO_HPP_
