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
#include <fstream>
#include <map>
#include <sstream>

#include "cmfda/data/manifest.hpp"
#include "cmfda/image/coco.hpp"
#include "cmfda/image/io.hpp"
#include "cmfda/rng.hpp"
#include "cmfda/synth/forgery.hpp"
#include "cmfda/synth/generate.hpp"

namespace cmfda::synth {
namespace {

const std::filesystem::path kCorpus = std::filesystem::path(CMFDA_SOURCE_DIR) / "data" / "toy_corpus";

ObjectMask square_mask(std::size_t side, std::size_t x0, std::size_t y0, std::size_t n,
                       std::string cat = "box") {
  ObjectMask m(side, side, std::move(cat));
  for (std::size_t y = y0; y < y0 + n; ++y) {
    for (std::size_t x = x0; x < x0 + n; ++x) m.at(x, y) = 1;
  }
  return m;
}

RasterImage random_image(std::size_t w, std::size_t h, Rng& rng) {
  RasterImage img(w, h);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

TEST(SelectLargestMask, PicksMaximalArea) {
  std::vector<ObjectMask> masks{square_mask(20, 0, 0, 2), square_mask(20, 0, 0, 4), square_mask(20, 0, 0, 3)};
  masks[0].bits[100] = 1;  // areas 5, 16, 9
  EXPECT_EQ(select_largest_mask(masks, "box"), 1u);
  EXPECT_EQ(select_largest_mask(std::span(masks).first(1), "box"), 0u);
  EXPECT_EQ(select_largest_mask(masks, "disc"), std::nullopt);
}

TEST(SelectLargestMask, TieGoesToLowestIndex) {
  std::vector<ObjectMask> masks{square_mask(10, 0, 0, 3), square_mask(10, 5, 5, 3)};
  EXPECT_EQ(select_largest_mask(masks, "box"), 0u);
  EXPECT_EQ(select_largest_mask(masks, ""), 0u);
}

TEST(SelectLargestMask, ResultDominatesCandidates) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ObjectMask> masks;
    for (std::size_t k = 0; k < 1 + rng.below(6); ++k) masks.push_back(square_mask(12, 0, 0, 1 + rng.below(10)));
    const std::size_t best = *select_largest_mask(masks, "");
    for (const auto& m : masks) EXPECT_GE(masks[best].area(), m.area());
  }
}

TEST(ApplyAffine, IdentityIsExact) {
  Rng rng(2);
  const RasterImage img = random_image(24, 24, rng);
  const ObjectMask mask = square_mask(24, 5, 7, 9);
  const auto out = apply_affine(img, mask, AffineParams{});
  EXPECT_EQ(out.image, img);
  EXPECT_EQ(out.mask, mask);
}

TEST(ApplyAffine, ScaleTwoQuadruplesArea) {
  const RasterImage img(64, 64);
  const ObjectMask mask = square_mask(64, 27, 27, 10);
  const auto out = apply_affine(img, mask, AffineParams{0, 2, 0, 0, false});
  const double ratio = static_cast<double>(out.mask.area()) / 100.0;
  EXPECT_GE(ratio, 3.5);
  EXPECT_LE(ratio, 4.5);
}

TEST(ApplyAffine, FullTurnPreservesArea) {
  const RasterImage img(48, 48);
  ObjectMask disc(48, 48, "disc");
  for (std::size_t y = 0; y < 48; ++y) {
    for (std::size_t x = 0; x < 48; ++x) disc.at(x, y) = std::hypot(x - 23.0, y - 20.0) <= 9.0;
  }
  const auto out = apply_affine(img, disc, AffineParams{360, 1, 0, 0, false});
  const double a = static_cast<double>(disc.area()), b = static_cast<double>(out.mask.area());
  EXPECT_LE(std::abs(b - a) / a, 0.02);
}

TEST(ApplyAffine, LeavingFrameSignalsRetry) {
  const RasterImage img(16, 16);
  EXPECT_THROW(apply_affine(img, square_mask(16, 2, 2, 4), AffineParams{0, 1, 40, 0, false}), RetrySignal);
  EXPECT_THROW(apply_affine(img, square_mask(16, 2, 2, 4), AffineParams{0, 0, 0, 0, false}), UsageError);
}

TEST(AlphaBlend, AlphaOneCopiesForegroundInsideMask) {
  Rng rng(4);
  const RasterImage f = random_image(16, 16, rng), b = random_image(16, 16, rng);
  const ObjectMask m = square_mask(16, 3, 3, 6);
  const RasterImage out = alpha_blend(f, b, m, BlendParams{1.0, 0});
  for (std::size_t i = 0; i < m.bits.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_EQ(out.data[i * 3 + c], (m.bits[i] ? f : b).data[i * 3 + c]);
    }
  }
}

TEST(AlphaBlend, AlphaZeroIsBackground) {
  Rng rng(5);
  const RasterImage f = random_image(16, 16, rng), b = random_image(16, 16, rng);
  EXPECT_EQ(alpha_blend(f, b, square_mask(16, 0, 0, 16), BlendParams{0.0, 2}), b);
}

TEST(AlphaBlend, HalfAlphaMidpoint) {
  RasterImage f(1, 1), b(1, 1);
  f.data = {200, 200, 200};
  b.data = {100, 100, 100};
  const RasterImage out = alpha_blend(f, b, square_mask(1, 0, 0, 1), BlendParams{0.5, 0});
  EXPECT_EQ(out.data, (std::vector<std::uint8_t>{150, 150, 150}));
}

TEST(AlphaBlend, BoundedAndBackgroundOutsideMask) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const RasterImage f = random_image(20, 20, rng), b = random_image(20, 20, rng);
    const ObjectMask m = square_mask(20, rng.below(8), rng.below(8), 4 + rng.below(8));
    const RasterImage out = alpha_blend(f, b, m, BlendParams{rng.uniform(), static_cast<int>(rng.below(4))});
    for (std::size_t i = 0; i < m.bits.size(); ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        const int o = out.data[i * 3 + c], fv = f.data[i * 3 + c], bv = b.data[i * 3 + c];
        if (!m.bits[i]) {
          EXPECT_EQ(o, bv);
        } else {
          EXPECT_GE(o, std::min(fv, bv) - 1);
          EXPECT_LE(o, std::max(fv, bv) + 1);
        }
      }
    }
  }
}

TEST(AlphaBlend, RejectsMismatchAndBadAlpha) {
  EXPECT_THROW(alpha_blend(RasterImage(4, 4), RasterImage(4, 5), ObjectMask(4, 4), {}), UsageError);
  EXPECT_THROW(alpha_blend(RasterImage(4, 4), RasterImage(4, 4), ObjectMask(4, 4), {1.5, 0}), UsageError);
}

TEST(FeatherWeights, RampsInward) {
  const auto w = feather_weights(square_mask(12, 2, 2, 8), 2);
  EXPECT_DOUBLE_EQ(w[2 * 12 + 2], 1.0 / 3);   // edge
  EXPECT_DOUBLE_EQ(w[3 * 12 + 3], 2.0 / 3);   // one in
  EXPECT_DOUBLE_EQ(w[5 * 12 + 5], 1.0);       // deep
  EXPECT_DOUBLE_EQ(w[0], 0.0);
  EXPECT_THROW(feather_weights(ObjectMask(2, 2), -1), UsageError);
}

class CorpusTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { coco_ = new image::CocoDataset(image::load_coco(kCorpus / "annotations.json")); }
  static void TearDownTestSuite() { delete coco_; }
  static image::RasterImage load(std::size_t k) {
    return image::read_image(kCorpus / coco_->images[k % coco_->images.size()].file_name);
  }
  static image::CocoDataset* coco_;
};
image::CocoDataset* CorpusTest::coco_ = nullptr;

TEST_F(CorpusTest, CorpusMasksAreUsable) {
  ASSERT_GE(coco_->images.size(), 50u);
  for (const auto& im : coco_->images) {
    const auto masks = coco_->masks_for(im);
    ASSERT_FALSE(masks.empty());
    for (const auto& m : masks) EXPECT_GT(m.area(), 0u);
  }
}

TEST_F(CorpusTest, CopyMoveIsDeterministic) {
  const RasterImage img = load(0);
  const auto masks = coco_->masks_for(coco_->images[0]);
  const auto a = make_copy_move_pair(img, masks, "", 78, "toy_000.png");
  const auto b = make_copy_move_pair(img, masks, "", 78, "toy_000.png");
  EXPECT_EQ(a.forged, b.forged);
  EXPECT_EQ(a.provenance, b.provenance);
  EXPECT_EQ(a.authentic, img);
  EXPECT_NE(a.forged, img);
}

TEST_F(CorpusTest, ExhaustedRetryBudgetIsSkip) {
  const auto masks = coco_->masks_for(coco_->images[0]);
  EXPECT_THROW(make_copy_move_pair(load(0), masks, "", 77, "toy_000.png"), GenerationSkip);
}

TEST_F(CorpusTest, ForcedZeroAlphaIsDegenerate) {
  const RasterImage img = load(1);
  const auto masks = coco_->masks_for(coco_->images[1]);
  CopyMoveOptions opt;
  opt.forced_alpha = 0.0;
  EXPECT_THROW(make_copy_move_pair(img, masks, "", 1, "", opt), DegenerateBlendError);
  EXPECT_EQ(alpha_blend(img, img, masks[0], BlendParams{0.0, 0}), img);
}

TEST_F(CorpusTest, MissingCategoryIsSkip) {
  const auto masks = coco_->masks_for(coco_->images[0]);
  EXPECT_THROW(make_copy_move_pair(load(0), masks, "giraffe", 1), GenerationSkip);
}

// Oracle: re-derive the pasted support from the recorded parameters and check
// every changed pixel lies inside it; then re-render from provenance alone.
TEST_F(CorpusTest, HundredPairsDifferOnlyInsidePaste) {
  std::size_t made = 0;
  for (std::size_t k = 0; made < 100 && k < 400; ++k) {
    const RasterImage img = load(k);
    const auto masks = coco_->masks_for(coco_->images[k % coco_->images.size()]);
    ForgeryPair pair;
    try {
      pair = make_copy_move_pair(img, masks, "", hash_combine(123, k), "x");
    } catch (const GenerationSkip&) {
      continue;
    }
    ++made;
    const auto moved = apply_affine(img, masks[pair.provenance.mask_index], pair.provenance.affine);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < moved.mask.bits.size(); ++i) {
      const bool differs = pair.forged.data[i * 3] != img.data[i * 3] ||
                           pair.forged.data[i * 3 + 1] != img.data[i * 3 + 1] ||
                           pair.forged.data[i * 3 + 2] != img.data[i * 3 + 2];
      changed += differs;
      if (differs) {
        ASSERT_TRUE(moved.mask.bits[i]) << "pair " << k << " pixel " << i;
      }
    }
    EXPECT_GT(changed, 0u);
    EXPECT_EQ(regenerate(img, masks, pair.provenance), pair.forged);
  }
  EXPECT_EQ(made, 100u);
}

TEST(Provenance, JsonRoundTrip) {
  ForgeryProvenance p;
  p.source_id = "a.png";
  p.category = "disc";
  p.mask_index = 2;
  p.affine = {12.5, 1.1, -3.25, 4.0, true};
  p.blend = {0.9, 2};
  p.seed = 0xFFFFFFFFFFFFFFFFULL;
  EXPECT_EQ(provenance_from_json(to_json(p)), p);
  ForgeryProvenance q;
  q.method = ForgeryMethod::kInpaint;
  q.inpaint_iterations = 400;
  EXPECT_EQ(provenance_from_json(to_json(q)), q);
  EXPECT_THROW(provenance_from_json(nlohmann::json{{"method", "splice"}}), DataError);
}

TEST(SimpleInpaint, EmptyMaskIsIdentity) {
  Rng rng(8);
  const RasterImage img = random_image(10, 10, rng);
  EXPECT_EQ(simple_inpaint(img, ObjectMask(10, 10), 50), img);
}

TEST(SimpleInpaint, ConstantImageUnchanged) {
  RasterImage img(20, 20);
  for (auto& v : img.data) v = 93;
  EXPECT_EQ(simple_inpaint(img, square_mask(20, 4, 6, 7), 30), img);
}

TEST(SimpleInpaint, LinearGradientRecovered) {
  RasterImage img(64, 64);
  for (std::size_t y = 0; y < 64; ++y) {
    for (std::size_t x = 0; x < 64; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(x * 4);
    }
  }
  const ObjectMask m = square_mask(64, 26, 26, 12);
  const RasterImage out = simple_inpaint(img, m, 500);
  int worst = 0;
  for (std::size_t i = 0; i < img.data.size(); ++i) worst = std::max(worst, std::abs(out.data[i] - img.data[i]));
  EXPECT_LE(worst, 8);
  for (std::size_t i = 0; i < m.bits.size(); ++i) {
    if (!m.bits[i]) {
      EXPECT_EQ(out.data[i * 3], img.data[i * 3]);
    }
  }
}

TEST(SimpleInpaint, FullMaskIsUsageError) {
  EXPECT_THROW(simple_inpaint(RasterImage(4, 4), square_mask(4, 0, 0, 4), 10), UsageError);
}

TEST(GenerateDataset, CountTenGivesFiveAndFive) {
  GenerateConfig cfg;
  cfg.corpus_dir = kCorpus;
  cfg.annotations = kCorpus / "annotations.json";
  cfg.out_dir = fresh_dir("cmfda_gen10");
  cfg.count = 10;
  cfg.seed = 42;
  const auto res = generate_dataset(cfg);
  ASSERT_EQ(res.manifest.size(), 10u);
  std::size_t forged = 0;
  for (const auto& r : res.manifest.records) {
    forged += r.class_label == data::ClassLabel::kForged;
    EXPECT_TRUE(std::filesystem::exists(res.manifest.resolve(r)));
    EXPECT_EQ(r.provenance.has_value(), r.class_label == data::ClassLabel::kForged);
  }
  EXPECT_EQ(forged, 5u);
  const auto reread = data::read_manifest(cfg.out_dir / "manifest.jsonl");
  EXPECT_EQ(reread.records, res.manifest.records);
}

TEST(GenerateDataset, SameSeedIsByteIdenticalAcrossThreadCounts) {
  GenerateConfig cfg;
  cfg.corpus_dir = kCorpus;
  cfg.annotations = kCorpus / "annotations.json";
  cfg.count = 12;
  cfg.seed = 5;
  cfg.out_dir = fresh_dir("cmfda_gen_a");
  generate_dataset(cfg);
  cfg.out_dir = fresh_dir("cmfda_gen_b");
  cfg.threads = 3;
  generate_dataset(cfg);
  const auto a = std::filesystem::temp_directory_path() / "cmfda_gen_a";
  const auto b = std::filesystem::temp_directory_path() / "cmfda_gen_b";
  EXPECT_EQ(read_file(a / "manifest.jsonl"), read_file(b / "manifest.jsonl"));
  for (const auto& e : std::filesystem::directory_iterator(a / "images")) {
    EXPECT_EQ(read_file(e.path()), read_file(b / "images" / e.path().filename())) << e.path();
  }
}

TEST(GenerateDataset, MixThreeToOne) {
  GenerateConfig cfg;
  cfg.corpus_dir = kCorpus;
  cfg.annotations = kCorpus / "annotations.json";
  cfg.out_dir = fresh_dir("cmfda_gen40");
  cfg.count = 40;
  cfg.inpaint_iterations = 100;
  const auto res = generate_dataset(cfg);
  // Each pair's method is recorded on its forged half; ids share the pair prefix.
  std::map<std::string, ForgeryMethod> method_of_pair;
  for (const auto& r : res.manifest.records) {
    if (r.provenance) method_of_pair[r.id.substr(0, 6)] = r.provenance->method;
  }
  std::size_t cmf = 0, inp = 0;
  for (const auto& r : res.manifest.records) {
    (method_of_pair.at(r.id.substr(0, 6)) == ForgeryMethod::kCopyMove ? cmf : inp) += 1;
  }
  EXPECT_EQ(cmf, 30u);
  EXPECT_EQ(inp, 10u);
  EXPECT_EQ(copy_move_pair_count(20, 3, 1), 15u);
  EXPECT_THROW(copy_move_pair_count(20, 0, 0), ConfigError);
}

TEST(GenerateDataset, RejectsOddCountAndMissingCorpus) {
  GenerateConfig cfg;
  cfg.corpus_dir = kCorpus;
  cfg.annotations = kCorpus / "annotations.json";
  cfg.out_dir = fresh_dir("cmfda_gen_bad");
  cfg.count = 7;
  EXPECT_THROW(generate_dataset(cfg), ConfigError);
  cfg.count = 4;
  cfg.annotations = kCorpus / "missing.json";
  EXPECT_THROW(generate_dataset(cfg), DataError);
}

}  // namespace
}  // namespace cmfda::synth
