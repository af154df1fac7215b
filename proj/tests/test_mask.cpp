// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "segbench/image.hpp"
#include "segbench/mask.hpp"

namespace sb = segbench;

namespace {

sb::Image gray(std::size_t h, std::size_t w, std::vector<std::uint8_t> px) {
  return sb::Image{h, w, 1, false, std::move(px)};
}

sb::BinaryMask random_mask(std::mt19937_64& rng, std::size_t h, std::size_t w, double p) {
  std::bernoulli_distribution fg(p);
  sb::BinaryMask m(h, w);
  for (std::size_t i = 0; i < h * w; ++i) m.set_index(i, fg(rng));
  return m;
}

std::vector<sb::Pixel> pixels(const sb::BinaryMask& m) { return sb::foreground_pixels(m); }

}  // namespace

TEST(BinaryMask, RejectsZeroDimensions) {
  EXPECT_THROW(sb::BinaryMask(0, 3), sb::DomainError);
  EXPECT_THROW(sb::BinaryMask(3, 0), sb::DomainError);
}

TEST(BinaryMask, FromBytesChecksLength) {
  const std::vector<std::uint8_t> bytes{0, 1, 0};
  EXPECT_THROW(sb::BinaryMask::from_bytes(2, 2, bytes), sb::DomainError);
  const auto m = sb::BinaryMask::from_bytes(1, 3, bytes);
  EXPECT_EQ(m.area(), 1u);
  EXPECT_TRUE(m.get(0, 1));
}

TEST(DecodeMask, ThresholdExamples) {
  const auto zero = sb::decode_mask(sb::encode_png(gray(4, 4, std::vector<std::uint8_t>(16, 0))));
  EXPECT_EQ(zero.area(), 0u);
  EXPECT_EQ(zero.height(), 4u);

  const auto full = sb::decode_mask(sb::encode_png(gray(2, 3, std::vector<std::uint8_t>(6, 255))));
  EXPECT_EQ(full.area(), 6u);

  const auto mixed = sb::decode_mask(sb::encode_png(gray(2, 2, {0, 200, 100, 130})), 128);
  EXPECT_EQ(pixels(mixed), (std::vector<sb::Pixel>{{0, 1}, {1, 1}}));
}

TEST(DecodeMask, ValueEqualToThresholdIsForeground) {
  const auto m = sb::decode_mask(sb::encode_png(gray(1, 3, {127, 128, 129})), 128);
  EXPECT_EQ(pixels(m), (std::vector<sb::Pixel>{{0, 1}, {0, 2}}));
}

TEST(DecodeMask, GarbageBytesAreFormatErrors) {
  const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_THROW(sb::decode_mask(junk), sb::FormatError);
  auto png = sb::encode_png(gray(4, 4, std::vector<std::uint8_t>(16, 7)));
  png.resize(png.size() / 2);
  EXPECT_THROW(sb::decode_mask(png), sb::FormatError);
}

TEST(DecodeMask, RgbIsConvertedToGray) {
  sb::Image rgb{1, 2, 3, false, {255, 255, 255, 10, 10, 10}};
  const auto m = sb::decode_mask(sb::encode_png(rgb));
  EXPECT_EQ(pixels(m), (std::vector<sb::Pixel>{{0, 0}}));
}

TEST(DecodeMask, RaisingThresholdNeverAddsForeground) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> value(0, 255);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint8_t> px(12 * 9);
    for (auto& p : px) p = static_cast<std::uint8_t>(value(rng));
    const auto bytes = sb::encode_png(gray(12, 9, px));
    sb::BinaryMask previous = sb::decode_mask(bytes, 0);
    for (int t = 1; t <= 255; t += 7) {
      const auto next = sb::decode_mask(bytes, static_cast<std::uint8_t>(t));
      for (std::size_t i = 0; i < next.size(); ++i) {
        ASSERT_TRUE(!next.get_index(i) || previous.get_index(i));
      }
      previous = next;
    }
  }
}

TEST(SplitMulticlass, SingleLabelFillsItsClass) {
  const sb::ClassColorMap map({{"liver", std::uint8_t{3}}});
  const auto masks = sb::split_multiclass(gray(2, 2, {3, 3, 3, 3}), map);
  EXPECT_EQ(masks.at("liver").area(), 4u);
}

TEST(SplitMulticlass, HalvesAreDisjointAndCover) {
  const sb::ClassColorMap map(
      {{"fat", std::uint8_t{10}}, {"liver", std::uint8_t{20}}, {"spleen", std::uint8_t{30}}});
  const auto masks = sb::split_multiclass(gray(2, 4, {10, 10, 20, 20, 10, 10, 20, 20}), map);
  const auto& a = masks.at("fat");
  const auto& b = masks.at("liver");
  EXPECT_EQ(a.area(), 4u);
  EXPECT_EQ(b.area(), 4u);
  EXPECT_EQ(masks.at("spleen").area(), 0u);
  const auto c = sb::pixel_counts(a, b);
  EXPECT_EQ(c.intersection, 0u);
  EXPECT_EQ(c.union_, 8u);
}

TEST(SplitMulticlass, RgbMapOnGrayImageIsFormatError) {
  const sb::ClassColorMap map({{"liver", sb::Rgb{255, 0, 0}}});
  EXPECT_THROW(sb::split_multiclass(gray(1, 1, {0}), map), sb::FormatError);
}

TEST(SplitMulticlass, RgbExactMatchOnly) {
  const sb::ClassColorMap map({{"a", sb::Rgb{255, 0, 0}}, {"b", sb::Rgb{0, 255, 0}}});
  sb::Image img{1, 3, 3, false, {255, 0, 0, 254, 0, 0, 0, 255, 0}};
  const auto masks = sb::split_multiclass(sb::encode_png(img), map);
  EXPECT_EQ(pixels(masks.at("a")), (std::vector<sb::Pixel>{{0, 0}}));
  EXPECT_EQ(pixels(masks.at("b")), (std::vector<sb::Pixel>{{0, 2}}));
}

TEST(SplitMulticlass, PalettedPngMatchesIndices) {
  const sb::ClassColorMap map({{"a", std::uint8_t{1}}, {"b", std::uint8_t{2}}});
  sb::Image img{2, 2, 1, true, {0, 1, 2, 1}};
  const std::vector<sb::Rgb> palette{{0, 0, 0}, {10, 20, 30}, {40, 50, 60}};
  const auto masks = sb::split_multiclass(sb::encode_png(img, palette), map);
  EXPECT_EQ(masks.at("a").area(), 2u);
  EXPECT_EQ(pixels(masks.at("b")), (std::vector<sb::Pixel>{{1, 0}}));
}

TEST(SplitMulticlass, RandomLabelImagesGiveDisjointMasks) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> label(0, 5);
  const sb::ClassColorMap map({{"c1", std::uint8_t{1}},
                               {"c2", std::uint8_t{2}},
                               {"c3", std::uint8_t{3}},
                               {"c4", std::uint8_t{4}}});
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint8_t> px(7 * 5);
    for (auto& p : px) p = static_cast<std::uint8_t>(label(rng));
    const auto masks = sb::split_multiclass(gray(7, 5, px), map);
    for (const auto& [a, ma] : masks) {
      for (const auto& [b, mb] : masks) {
        if (a < b) {
          ASSERT_EQ(sb::pixel_counts(ma, mb).intersection, 0u);
        }
      }
    }
  }
}

TEST(ClassColorMap, DuplicateEncodingRejected) {
  EXPECT_THROW(sb::ClassColorMap({{"a", std::uint8_t{1}}, {"b", std::uint8_t{1}}}),
               sb::DuplicateKeyError);
  const auto j = nlohmann::json::parse(R"({"a": [1, 2, 3], "b": [1, 2, 3]})");
  EXPECT_THROW(sb::class_color_map_from_json(j), sb::DuplicateKeyError);
}

TEST(ClassColorMap, JsonRoundTrip) {
  const sb::ClassColorMap map({{"a", sb::Rgb{1, 2, 3}}, {"b", std::uint8_t{9}}});
  EXPECT_EQ(sb::class_color_map_from_json(sb::class_color_map_to_json(map)), map);
}

TEST(Rle, EncodeExamples) {
  sb::BinaryMask m(2, 2);
  m.set(0, 1);
  EXPECT_EQ(sb::encode_rle(m).counts, (std::vector<std::uint64_t>{2, 1, 1}));
  EXPECT_EQ(sb::encode_rle(sb::BinaryMask(3, 3)).counts, (std::vector<std::uint64_t>{9}));
  sb::BinaryMask full(3, 3);
  for (std::size_t i = 0; i < 9; ++i) full.set_index(i, true);
  EXPECT_EQ(sb::encode_rle(full).counts, (std::vector<std::uint64_t>{0, 9}));
}

TEST(Rle, DecodeExamples) {
  EXPECT_EQ(sb::decode_rle({3, 3, {9}}).area(), 0u);
  EXPECT_EQ(sb::decode_rle({3, 3, {0, 9}}).area(), 9u);
  EXPECT_EQ(pixels(sb::decode_rle({2, 2, {2, 1, 1}})), (std::vector<sb::Pixel>{{0, 1}}));
}

TEST(Rle, CorruptCountsRejected) {
  EXPECT_THROW(sb::decode_rle({3, 3, {8}}), sb::CorruptionError);
  EXPECT_THROW(sb::decode_rle({3, 3, {5, 5}}), sb::CorruptionError);
  EXPECT_THROW(sb::decode_rle({3, 3, {4, 0, 5}}), sb::CorruptionError);
}

TEST(Rle, RoundTripProperty) {
  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<std::size_t> dim(1, 64);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  for (int trial = 0; trial < 1200; ++trial) {
    const std::size_t h = dim(rng), w = dim(rng);
    const auto m = random_mask(rng, h, w, density(rng));
    const auto rle = sb::encode_rle(m);
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < rle.counts.size(); ++i) {
      if (i > 0) {
        ASSERT_GT(rle.counts[i], 0u);
      }
      sum += rle.counts[i];
    }
    ASSERT_EQ(sum, h * w);
    ASSERT_EQ(sb::decode_rle(rle), m) << h << "x" << w;
    ASSERT_EQ(sb::rle_from_json(sb::rle_to_json(rle)), rle);
  }
}

TEST(Rle, JsonShape) {
  const auto j = sb::rle_to_json({2, 3, {1, 5}});
  EXPECT_EQ(j.dump(), R"({"counts":[1,5],"size":[2,3]})");
  EXPECT_THROW(sb::rle_from_json(nlohmann::json::parse(R"({"size":[2],"counts":[2]})")),
               sb::ParseError);
}

TEST(PixelCounts, Examples) {
  sb::BinaryMask gt(4, 4), pred(4, 4);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 2; ++c) {
      gt.set(r, c);
      pred.set(r + 1, c + 1);
    }
  }
  const auto c = sb::pixel_counts(pred, gt);
  EXPECT_EQ(c.intersection, 1u);
  EXPECT_EQ(c.union_, 7u);
  EXPECT_EQ(c.predicted_sum, 4u);
  EXPECT_EQ(c.ground_truth_sum, 4u);

  const auto same = sb::pixel_counts(gt, gt);
  EXPECT_EQ(same.intersection, 4u);
  EXPECT_EQ(same.union_, 4u);

  const auto empty = sb::pixel_counts(sb::BinaryMask(3, 3), sb::BinaryMask(3, 3));
  EXPECT_EQ(empty.intersection + empty.union_ + empty.predicted_sum + empty.ground_truth_sum,
            0u);
  EXPECT_THROW(sb::pixel_counts(sb::BinaryMask(3, 3), sb::BinaryMask(3, 4)), sb::DomainError);
}

TEST(PixelCounts, InclusionExclusionProperty) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> dim(1, 40);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t h = dim(rng), w = dim(rng);
    const auto a = random_mask(rng, h, w, 0.3);
    const auto b = random_mask(rng, h, w, 0.6);
    const auto c = sb::pixel_counts(a, b);
    ASSERT_LE(c.intersection, std::min(c.predicted_sum, c.ground_truth_sum));
    ASSERT_LE(std::max(c.predicted_sum, c.ground_truth_sum), c.union_);
    ASSERT_EQ(c.union_, c.predicted_sum + c.ground_truth_sum - c.intersection);
  }
}

TEST(ForegroundPixels, Examples) {
  EXPECT_TRUE(pixels(sb::BinaryMask(3, 3)).empty());
  sb::BinaryMask full(2, 2);
  for (std::size_t i = 0; i < 4; ++i) full.set_index(i, true);
  EXPECT_EQ(pixels(full), (std::vector<sb::Pixel>{{0, 0}, {0, 1}, {1, 0}, {1, 1}}));
  sb::BinaryMask m(2, 4);
  m.set(1, 3);
  m.set(0, 2);
  EXPECT_EQ(pixels(m), (std::vector<sb::Pixel>{{0, 2}, {1, 3}}));
}

TEST(ForegroundPixels, StrictlyIncreasingRowMajor) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_mask(rng, 1 + trial % 17, 1 + trial % 70, 0.4);
    const auto px = pixels(m);
    ASSERT_EQ(px.size(), m.area());
    for (std::size_t i = 1; i < px.size(); ++i) {
      ASSERT_LT(px[i - 1].row * m.width() + px[i - 1].col, px[i].row * m.width() + px[i].col);
    }
  }
}

TEST(Png, EncodeDecodeRoundTrip) {
  sb::Image img{3, 5, 3, false, {}};
  for (std::size_t i = 0; i < 45; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 5));
  const auto back = sb::decode_png(sb::encode_png(img));
  EXPECT_EQ(back.height, 3u);
  EXPECT_EQ(back.width, 5u);
  EXPECT_EQ(back.channels, 3u);
  EXPECT_EQ(back.pixels, img.pixels);
}

TEST(Png, MaskPngRoundTrip) {
  std::mt19937_64 rng(8);
  const auto m = random_mask(rng, 13, 21, 0.5);
  EXPECT_EQ(sb::decode_mask(sb::encode_mask_png(m)), m);
}
