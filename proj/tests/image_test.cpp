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
#include <filesystem>

#include <json.hpp>

#include "cmfda/image/coco.hpp"
#include "cmfda/image/io.hpp"
#include "cmfda/image/raster.hpp"
#include "cmfda/rng.hpp"

namespace cmfda::image {
namespace {

RasterImage solid(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RasterImage img(w, h);
  for (std::size_t i = 0; i < w * h; ++i) {
    img.data[i * 3] = r;
    img.data[i * 3 + 1] = g;
    img.data[i * 3 + 2] = b;
  }
  return img;
}

RasterImage random_image(std::size_t w, std::size_t h, Rng& rng) {
  RasterImage img(w, h);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

TEST(Raster, YCrCbReferencePixels) {
  auto px = [](std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    RasterImage out = rgb_to_ycrcb(solid(1, 1, r, g, b));
    EXPECT_EQ(out.color_space, ColorSpace::kYCrCb);
    return std::array<int, 3>{out.data[0], out.data[1], out.data[2]};
  };
  EXPECT_EQ(px(128, 128, 128), (std::array<int, 3>{128, 128, 128}));
  EXPECT_EQ(px(255, 255, 255), (std::array<int, 3>{255, 128, 128}));
  EXPECT_EQ(px(255, 0, 0), (std::array<int, 3>{76, 255, 85}));
}

TEST(Raster, YCrCbRejectsWrongSpace) {
  RasterImage y = rgb_to_ycrcb(solid(2, 2, 1, 2, 3));
  EXPECT_THROW(rgb_to_ycrcb(y), UsageError);
  EXPECT_THROW(ycrcb_to_rgb(solid(2, 2, 1, 2, 3)), UsageError);
}

TEST(Raster, YCrCbRoundTripWithinTwo) {
  Rng rng(7);
  // Saturated chroma clips, so the bound holds for in-gamut round trips only.
  int worst = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    RasterImage rgb = random_image(1, 1, rng);
    const double y = 0.299 * rgb.data[0] + 0.587 * rgb.data[1] + 0.114 * rgb.data[2];
    const double cr = (rgb.data[0] - y) * 0.713 + 128, cb = (rgb.data[2] - y) * 0.564 + 128;
    if (cr < 0 || cr > 255 || cb < 0 || cb > 255) continue;
    RasterImage back = ycrcb_to_rgb(rgb_to_ycrcb(rgb));
    EXPECT_EQ(back.color_space, ColorSpace::kRgb);
    for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(back.data[c] - rgb.data[c]));
  }
  EXPECT_LE(worst, 2);
}

TEST(Raster, ConvertColorIsIdentityForSameSpace) {
  Rng rng(1);
  RasterImage img = random_image(5, 4, rng);
  EXPECT_EQ(convert_color(img, ColorSpace::kRgb), img);
  EXPECT_EQ(parse_color_space("ycrcb"), ColorSpace::kYCrCb);
  EXPECT_THROW(parse_color_space("hsv"), ConfigError);
}

TEST(Raster, ResizeSameSizeIsIdentity) {
  Rng rng(3);
  RasterImage img = random_image(16, 16, rng);
  EXPECT_EQ(resize_square(img, 16), img);
}

TEST(Raster, ResizeConstantStaysConstant) {
  const RasterImage img = solid(37, 21, 10, 200, 77);
  for (std::size_t side : {8, 19, 64}) {
    EXPECT_EQ(resize_square(img, side), solid(side, side, 10, 200, 77));
  }
}

TEST(Raster, CheckerboardToOnePixelIsRoundedMean) {
  RasterImage img(2, 2);
  for (std::size_t c = 0; c < 3; ++c) {
    img.at(0, 0, c) = 0;
    img.at(1, 0, c) = 255;
    img.at(0, 1, c) = 255;
    img.at(1, 1, c) = 0;
  }
  RasterImage out = resize_bilinear(img, 1, 1);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at(0, 0, c), 128);
}

TEST(Raster, ResizeRejectsDegenerate) {
  EXPECT_THROW(resize_square(solid(8, 8, 0, 0, 0), 7), UsageError);
  EXPECT_THROW(resize_bilinear(RasterImage(0, 4), 8, 8), UsageError);
}

TEST(Raster, BoundingBoxOfEmptyMaskThrows) {
  ObjectMask m(4, 4);
  EXPECT_THROW(bounding_box(m), UsageError);
  m.at(1, 2) = 1;
  m.at(3, 3) = 1;
  const BoundingBox b = bounding_box(m);
  EXPECT_EQ(b.x0, 1u);
  EXPECT_EQ(b.y0, 2u);
  EXPECT_EQ(b.x1, 3u);
  EXPECT_EQ(b.y1, 3u);
}

TEST(Coco, RleDecodeIsColumnMajor) {
  const ObjectMask m = rle_decode(Rle{2, 3, {2, 2, 2}});
  // column 0 clear, column 1 set, column 2 clear
  EXPECT_EQ(m.area(), 2u);
  EXPECT_EQ(m.at(1, 0), 1);
  EXPECT_EQ(m.at(1, 1), 1);
  EXPECT_EQ(m.at(0, 0), 0);
  EXPECT_THROW(rle_decode(Rle{2, 3, {2, 2}}), DataError);
  EXPECT_THROW(rle_decode(Rle{2, 3, {5, 2}}), DataError);
}

TEST(Coco, RleRoundTrip) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    ObjectMask m(1 + rng.below(20), 1 + rng.below(20));
    for (auto& b : m.bits) b = rng.uniform() < 0.4;
    const Rle rle = rle_encode(m);
    EXPECT_EQ(rle_decode(rle), m);
    EXPECT_EQ(rle_counts_from_string(rle_counts_to_string(rle.counts)), rle.counts);
  }
}

TEST(Coco, CompressedCountsHandValues) {
  EXPECT_EQ(rle_counts_to_string({0, 4}), "04");
  EXPECT_EQ(rle_counts_to_string({1, 2, 3, 5}), "1233");  // 5 stored as 5 - 2
  EXPECT_EQ(rle_counts_to_string({1, 5, 2, 1}), "152L");  // delta -4
  EXPECT_EQ(rle_counts_from_string("152L"), (std::vector<std::uint32_t>{1, 5, 2, 1}));
  EXPECT_EQ(rle_counts_from_string("1233"), (std::vector<std::uint32_t>{1, 2, 3, 5}));
}

TEST(Coco, PolygonRasterizesPixelCenters) {
  ObjectMask m(10, 10);
  rasterize_polygon({2, 2, 6, 2, 6, 5, 2, 5}, m);
  EXPECT_EQ(m.area(), 12u);  // 4 x 3 pixel centres
  EXPECT_EQ(m.at(2, 2), 1);
  EXPECT_EQ(m.at(5, 4), 1);
  EXPECT_EQ(m.at(6, 4), 0);
  ObjectMask tri(10, 10);
  rasterize_polygon({0, 0, 10, 0, 0, 10}, tri);
  EXPECT_EQ(tri.area(), 45u);  // x + y + 1 < 10 strictly, ties on the diagonal excluded
}

TEST(Coco, ParseMixedSegmentations) {
  const nlohmann::json root = {
      {"images", {{{"id", 1}, {"file_name", "a.png"}, {"width", 3}, {"height", 2}}}},
      {"categories", {{{"id", 7}, {"name", "disc"}}}},
      {"annotations",
       {{{"image_id", 1}, {"category_id", 7}, {"segmentation", {{0, 0, 2, 0, 2, 2, 0, 2}}}},
        {{"image_id", 1}, {"category_id", 7}, {"segmentation", {{"size", {2, 3}}, {"counts", {2, 2, 2}}}}},
        {{"image_id", 1}, {"category_id", 9}, {"segmentation", {{"size", {2, 3}}, {"counts", "042"}}}}}}};
  const CocoDataset ds = parse_coco(root);
  const auto masks = ds.masks_for(ds.images.at(0));
  ASSERT_EQ(masks.size(), 3u);
  EXPECT_EQ(masks[0].area(), 4u);
  EXPECT_EQ(masks[0].category, "disc");
  EXPECT_EQ(masks[1].area(), 2u);
  EXPECT_EQ(masks[2].area(), 4u);
  EXPECT_EQ(masks[2].category, "9");
  EXPECT_THROW(parse_coco(nlohmann::json::object()), DataError);
}

TEST(Coco, RleSizeMismatchIsDataError) {
  const nlohmann::json seg = {{"size", {4, 4}}, {"counts", {16}}};
  EXPECT_THROW(rasterize_segmentation(seg, 3, 4, "x"), DataError);
  EXPECT_THROW(rasterize_segmentation(nlohmann::json(5), 3, 4, "x"), DataError);
}

TEST(Io, PngRoundTrip) {
  Rng rng(5);
  const RasterImage img = random_image(13, 9, rng);
  const auto path = std::filesystem::temp_directory_path() / "cmfda_io_roundtrip.png";
  write_png(path, img);
  EXPECT_EQ(read_image(path), img);
  std::filesystem::remove(path);
  EXPECT_THROW(read_image(path), DataError);
  EXPECT_THROW(read_image("x.gif"), DataError);
}

}  // namespace
}  // namespace cmfda::image
