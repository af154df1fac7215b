// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <unordered_set>

#include "segbench/prompts.hpp"

namespace sb = segbench;

namespace {

// Textbook FNV-1a 64, kept separate from the library version on purpose.
std::uint64_t fnv_reference(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

sb::BinaryMask random_mask(std::mt19937_64& rng, std::size_t h, std::size_t w, double p) {
  std::bernoulli_distribution fg(p);
  sb::BinaryMask m(h, w);
  for (std::size_t i = 0; i < h * w; ++i) m.set_index(i, fg(rng));
  return m;
}

}  // namespace

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(sb::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(sb::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(sb::fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(DeriveSeed, MatchesHashOfJoinedKey) {
  EXPECT_EQ(sb::derive_seed(0, "a", "b", "c"), fnv_reference("0|a|b|c"));
  EXPECT_EQ(sb::derive_seed(18446744073709551615ULL, "ds", "img.png", "liver"),
            fnv_reference("18446744073709551615|ds|img.png|liver"));
  EXPECT_EQ(sb::derive_seed(7, "a", "b", "c"), sb::derive_seed(7, "a", "b", "c"));
}

TEST(DeriveSeed, NoCollisionsOverManyIds) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> ch('a', 'z');
  std::unordered_set<std::uint64_t> seen;
  std::set<std::string> ids;
  while (ids.size() < 100000) {
    std::string id(12, ' ');
    for (auto& c : id) c = static_cast<char>(ch(rng));
    ids.insert(id);
  }
  for (const auto& id : ids) seen.insert(sb::derive_seed(42, "dresden", id, "liver"));
  EXPECT_EQ(seen.size(), ids.size());
  // Changing only the class or dataset also moves the seed.
  EXPECT_NE(sb::derive_seed(42, "dresden", "x", "liver"), sb::derive_seed(42, "dresden", "x", "livers"));
  EXPECT_NE(sb::derive_seed(42, "dresden", "x", "liver"), sb::derive_seed(43, "dresden", "x", "liver"));
}

TEST(SplitMix64, ReferenceSequence) {
  // First outputs for seed 1234567 from the reference C implementation.
  sb::SplitMix64 rng(1234567);
  EXPECT_EQ(rng.next(), 6457827717110365317ULL);
  EXPECT_EQ(rng.next(), 3203168211198807973ULL);
  EXPECT_EQ(rng.next(), 9817491932198370423ULL);
  EXPECT_EQ(rng.next(), 4593380528125082431ULL);
  EXPECT_EQ(rng.next(), 16408922859458223821ULL);
}

TEST(SamplePoints, SinglePixel) {
  sb::BinaryMask m(5, 5);
  m.set(2, 3);
  for (std::uint64_t s : {0ULL, 1ULL, 99ULL}) {
    const auto p = sb::sample_points(m, 1, s);
    ASSERT_EQ(p.points.size(), 1u);
    EXPECT_EQ(p.points[0].x, 3u);
    EXPECT_EQ(p.points[0].y, 2u);
    EXPECT_EQ(p.points[0].label, 1);
  }
}

TEST(SamplePoints, ShortfallOnSmallMask) {
  sb::BinaryMask m(4, 4);
  m.set(0, 0);
  m.set(1, 2);
  m.set(3, 1);
  m.set(3, 3);
  const auto p = sb::sample_points(m, 10, 5);
  EXPECT_EQ(p.points.size(), 4u);
  EXPECT_TRUE(p.shortfall());
  std::set<std::pair<std::size_t, std::size_t>> got;
  for (const auto& pt : p.points) got.insert({pt.y, pt.x});
  EXPECT_EQ(got, (std::set<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 2}, {3, 1}, {3, 3}}));
}

TEST(SamplePoints, Errors) {
  sb::BinaryMask m(3, 3);
  EXPECT_THROW(sb::sample_points(m, 1, 0), sb::EmptyPoolError);
  m.set(1, 1);
  EXPECT_THROW(sb::sample_points(m, 0, 0), sb::DomainError);
}

TEST(SamplePoints, HandComputedDraw) {
  // Pool is the 4 pixels of a 2x2 block in row-major order; indices come
  // from the first two splitmix64 outputs for seed 1234567.
  sb::BinaryMask m(2, 2);
  for (std::size_t i = 0; i < 4; ++i) m.set_index(i, true);
  const auto p = sb::sample_points(m, 2, 1234567);
  // 6457827717110365317 % 4 = 1 -> (0,1); remaining [(0,0),(1,0),(1,1)],
  // 3203168211198807973 % 3 = 1 -> (1,0).
  ASSERT_EQ(p.points.size(), 2u);
  EXPECT_EQ(p.points[0], (sb::PromptPoint{1, 0, 1}));
  EXPECT_EQ(p.points[1], (sb::PromptPoint{0, 1, 1}));
}

TEST(SamplePoints, MembershipDeterminismAndPrefix) {
  std::mt19937_64 rng(1000);
  std::uniform_int_distribution<std::size_t> dim(1, 48);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto m = random_mask(rng, dim(rng), dim(rng), 0.05 + 0.9 * (trial % 10) / 10.0);
    if (m.area() == 0) continue;
    const std::uint64_t seed = sb::derive_seed(trial, "ds", "img" + std::to_string(trial), "c");
    const auto ten = sb::sample_points(m, 10, seed);
    ASSERT_EQ(ten, sb::sample_points(m, 10, seed));
    std::set<std::pair<std::size_t, std::size_t>> distinct;
    for (const auto& pt : ten.points) {
      ASSERT_TRUE(m.get(pt.y, pt.x));
      distinct.insert({pt.y, pt.x});
    }
    ASSERT_EQ(distinct.size(), ten.points.size());
    for (std::size_t k : {1u, 2u, 4u, 6u, 8u}) {
      const auto some = sb::sample_points(m, k, seed);
      ASSERT_EQ(some.points.size(), std::min(k, m.area()));
      ASSERT_TRUE(std::equal(some.points.begin(), some.points.end(), ten.points.begin()));
    }
    const auto four = sb::sample_points(m, 4, seed);
    const auto six = sb::sample_points(m, 6, seed);
    ASSERT_TRUE(std::equal(four.points.begin(), four.points.end(), six.points.begin()));
  }
}

TEST(SamplePoints, SingleDrawIsUniform) {
  sb::BinaryMask m(10, 10);
  for (std::size_t i = 0; i < 100; ++i) m.set_index(i, true);
  std::vector<int> hits(100, 0);
  const int draws = 100000;
  for (int d = 0; d < draws; ++d) {
    const auto p = sb::sample_points(m, 1, sb::derive_seed(d, "u", "u", "u"));
    ++hits[p.points[0].y * 10 + p.points[0].x];
  }
  const double expected = draws / 100.0;
  const double sigma = std::sqrt(draws * 0.01 * 0.99);
  for (int h : hits) EXPECT_LT(std::abs(h - expected), 5 * sigma);
}

TEST(PromptJson, WireShapeAndRoundTrip) {
  sb::PromptSet p;
  p.points = {{3, 2, 1}, {0, 7, 1}};
  p.requested = 2;
  const auto j = sb::to_json(p);
  EXPECT_EQ(j.dump(), R"({"points":[{"label":1,"x":3,"y":2},{"label":1,"x":0,"y":7}]})");
  EXPECT_EQ(sb::prompt_set_from_json(j).points, p.points);
  EXPECT_THROW(sb::prompt_set_from_json(nlohmann::json::parse(R"({"points":[{"x":1}]})")),
               sb::ParseError);
}
