// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

// Reproducible point-prompt sampling. Every step is pinned (hash, PRNG,
// candidate order, index reduction, removal rule) so another implementation
// following the same recipe emits bit-identical prompts.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "segbench/errors.hpp"
#include "segbench/json_util.hpp"
#include "segbench/mask.hpp"

namespace segbench {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t hash = kFnvOffsetBasis) noexcept {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= kFnvPrime;
  }
  return hash;
}

/// splitmix64: state advances by the golden-ratio increment, output is the
/// 30/27/31 xor-shift-multiply finalizer of the new state.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t state) noexcept : state_(state) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  constexpr std::uint64_t operator()() noexcept { return next(); }

  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

  constexpr std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// FNV-1a 64 over "run_seed|dataset_id|image_id|class_id" with run_seed in
/// decimal.
inline std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view dataset_id,
                                 std::string_view image_id,
                                 std::string_view class_id) {
  std::string key = std::to_string(run_seed);
  key.append("|").append(dataset_id).append("|").append(image_id).append("|").append(
      class_id);
  return fnv1a64(key);
}

struct PromptPoint {
  std::size_t x = 0;  // column
  std::size_t y = 0;  // row
  int label = 1;      // positive prompts only

  friend bool operator==(const PromptPoint&, const PromptPoint&) = default;
};

struct PromptSet {
  std::vector<PromptPoint> points;
  std::size_t requested = 0;
  std::uint64_t state = 0;

  /// Fewer points than requested because the mask is smaller than k.
  bool shortfall() const noexcept { return points.size() < requested; }

  friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

/// Draws min(k, area) distinct foreground points without replacement. At
/// step t the index is next() mod (pool - t) into the remaining row-major
/// pool, and the chosen entry is erased in place (order of the rest kept).
inline PromptSet sample_points(const BinaryMask& mask, std::size_t k,
                               std::uint64_t state) {
  if (k == 0) throw DomainError("sample_points needs k >= 1");
  std::vector<Pixel> pool = foreground_pixels(mask);
  if (pool.empty()) {
    throw EmptyPoolError("cannot sample prompts from an empty mask");
  }
  PromptSet out;
  out.requested = k;
  out.state = state;
  SplitMix64 rng(state);
  const std::size_t take = std::min(k, pool.size());
  out.points.reserve(take);
  for (std::size_t t = 0; t < take; ++t) {
    const std::uint64_t index = rng.next() % pool.size();
    const Pixel p = pool[index];
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(index));
    out.points.push_back({p.col, p.row, 1});
  }
  return out;
}

/// Wire form embedded in predictor requests.
inline nlohmann::json to_json(const PromptSet& prompts) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : prompts.points) {
    points.push_back({{"x", p.x}, {"y", p.y}, {"label", p.label}});
  }
  return {{"points", std::move(points)}};
}

inline PromptSet prompt_set_from_json(const nlohmann::json& j) {
  PromptSet out;
  try {
    for (const auto& p : j.at("points")) {
      out.points.push_back({unsigned_at(p, "x"), unsigned_at(p, "y"), p.value("label", 1)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed prompts: ") + e.what());
  }
  out.requested = out.points.size();
  return out;
}

}  // namespace segbench
