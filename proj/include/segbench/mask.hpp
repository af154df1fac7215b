// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "segbench/errors.hpp"

namespace segbench {

struct Pixel {
  std::size_t row = 0;
  std::size_t col = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Per-class foreground bitmap for one image or frame.
///
/// Pixels are packed row-major into 64-bit words; bits past height*width in
/// the last word are always zero so word-wise popcounts are exact.
class BinaryMask {
 public:
  BinaryMask(std::size_t height, std::size_t width)
      : height_(height), width_(width) {
    if (height == 0 || width == 0) {
      throw DomainError("mask dimensions must be at least 1x1, got " +
                        std::to_string(height) + "x" + std::to_string(width));
    }
    words_.assign((height * width + 63) / 64, 0);
  }

  /// Builds a mask from one byte per pixel, row-major; nonzero is foreground.
  static BinaryMask from_bytes(std::size_t height, std::size_t width,
                               std::span<const std::uint8_t> bytes) {
    BinaryMask mask(height, width);
    if (bytes.size() != height * width) {
      throw DomainError("mask byte count " + std::to_string(bytes.size()) +
                        " != " + std::to_string(height * width));
    }
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      if (bytes[i] != 0) mask.set_index(i, true);
    }
    return mask;
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return height_ * width_; }

  bool get(std::size_t row, std::size_t col) const {
    return get_index(row * width_ + col);
  }
  void set(std::size_t row, std::size_t col, bool value = true) {
    set_index(row * width_ + col, value);
  }

  bool get_index(std::size_t i) const {
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }
  void set_index(std::size_t i, bool value) {
    const std::uint64_t bit = std::uint64_t{1} << (i & 63);
    if (value) {
      words_[i >> 6] |= bit;
    } else {
      words_[i >> 6] &= ~bit;
    }
  }

  std::size_t area() const noexcept {
    std::size_t total = 0;
    for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
    return total;
  }

  bool same_shape(const BinaryMask& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  std::span<const std::uint64_t> words() const noexcept { return words_; }

  /// One byte per pixel (0 or 1), row-major.
  std::vector<std::uint8_t> to_bytes() const {
    std::vector<std::uint8_t> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_index(i) ? 1 : 0;
    return out;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<std::uint64_t> words_;
};

/// Run-length encoded mask: column-major scan, runs alternate
/// background/foreground and always start with background.
struct RleMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint64_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

inline RleMask encode_rle(const BinaryMask& mask) {
  RleMask rle{mask.height(), mask.width(), {}};
  bool current = false;
  std::uint64_t run = 0;
  for (std::size_t col = 0; col < mask.width(); ++col) {
    for (std::size_t row = 0; row < mask.height(); ++row) {
      const bool bit = mask.get(row, col);
      if (bit != current) {
        rle.counts.push_back(run);
        run = 0;
        current = bit;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

inline BinaryMask decode_rle(const RleMask& rle) {
  BinaryMask mask(rle.height, rle.width);
  const std::uint64_t total = rle.height * rle.width;
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    if (rle.counts[i] == 0 && i != 0) {
      throw CorruptionError("zero-length run at position " + std::to_string(i));
    }
    sum += rle.counts[i];
    if (sum > total) break;
  }
  if (sum != total) {
    throw CorruptionError("RLE counts sum to " + std::to_string(sum) +
                          ", expected " + std::to_string(total));
  }
  std::uint64_t pos = 0;
  bool fg = false;
  for (auto run : rle.counts) {
    if (fg) {
      for (std::uint64_t k = pos; k < pos + run; ++k) {
        mask.set(static_cast<std::size_t>(k % rle.height),
                 static_cast<std::size_t>(k / rle.height));
      }
    }
    pos += run;
    fg = !fg;
  }
  return mask;
}

inline nlohmann::json rle_to_json(const RleMask& rle) {
  return {{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

inline RleMask rle_from_json(const nlohmann::json& j) {
  try {
    const auto& size = j.at("size");
    if (!size.is_array() || size.size() != 2) {
      throw ParseError("RLE \"size\" must be [h, w]");
    }
    RleMask rle;
    for (const auto& v : size) {
      if (!v.is_number_unsigned()) throw ParseError("RLE size must be non-negative integers");
    }
    rle.height = size[0].get<std::size_t>();
    rle.width = size[1].get<std::size_t>();
    const auto& counts = j.at("counts");
    if (!counts.is_array()) throw ParseError("RLE \"counts\" must be an array");
    for (const auto& c : counts) {
      if (!c.is_number_unsigned()) throw ParseError("RLE counts must be non-negative integers");
      rle.counts.push_back(c.get<std::uint64_t>());
    }
    return rle;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed RLE: ") + e.what());
  }
}

/// Pixel counts shared by all four overlap metrics.
struct PixelCounts {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
  std::uint64_t predicted_sum = 0;
  std::uint64_t ground_truth_sum = 0;

  friend bool operator==(const PixelCounts&, const PixelCounts&) = default;
};

inline PixelCounts pixel_counts(const BinaryMask& pred, const BinaryMask& gt) {
  if (!pred.same_shape(gt)) {
    throw DomainError("prediction is " + std::to_string(pred.height()) + "x" +
                      std::to_string(pred.width()) + " but ground truth is " +
                      std::to_string(gt.height()) + "x" +
                      std::to_string(gt.width()));
  }
  PixelCounts c;
  const auto p = pred.words();
  const auto g = gt.words();
  for (std::size_t i = 0; i < p.size(); ++i) {
    c.intersection += static_cast<std::uint64_t>(std::popcount(p[i] & g[i]));
    c.union_ += static_cast<std::uint64_t>(std::popcount(p[i] | g[i]));
    c.predicted_sum += static_cast<std::uint64_t>(std::popcount(p[i]));
    c.ground_truth_sum += static_cast<std::uint64_t>(std::popcount(g[i]));
  }
  return c;
}

/// Foreground coordinates in strictly increasing row-major order.
inline std::vector<Pixel> foreground_pixels(const BinaryMask& mask) {
  std::vector<Pixel> out;
  out.reserve(mask.area());
  const auto words = mask.words();
  for (std::size_t w = 0; w < words.size(); ++w) {
    std::uint64_t bits = words[w];
    while (bits != 0) {
      const auto i = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
      out.push_back({i / mask.width(), i % mask.width()});
      bits &= bits - 1;
    }
  }
  return out;
}

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend auto operator<=>(const Rgb&, const Rgb&) = default;
};

/// A class is stored either as a single 8-bit label (gray or palette index)
/// or as an RGB color.
using LabelEncoding = std::variant<std::uint8_t, Rgb>;

class ClassColorMap {
 public:
  ClassColorMap() = default;

  explicit ClassColorMap(std::map<std::string, LabelEncoding> entries)
      : entries_(std::move(entries)) {
    std::vector<LabelEncoding> seen;
    for (const auto& [cls, enc] : entries_) {
      if (std::find(seen.begin(), seen.end(), enc) != seen.end()) {
        throw DuplicateKeyError("class '" + cls +
                                "' reuses a label encoding already taken");
      }
      seen.push_back(enc);
    }
  }

  const std::map<std::string, LabelEncoding>& entries() const noexcept {
    return entries_;
  }
  bool empty() const noexcept { return entries_.empty(); }

  friend bool operator==(const ClassColorMap&, const ClassColorMap&) = default;

 private:
  std::map<std::string, LabelEncoding> entries_;
};

/// Accepts {"cls": 3} or {"cls": [r, g, b]}.
inline ClassColorMap class_color_map_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("class color map must be an object");
  std::map<std::string, LabelEncoding> entries;
  for (const auto& [cls, v] : j.items()) {
    if (v.is_number_unsigned() && v.get<unsigned>() <= 255) {
      entries.emplace(cls, static_cast<std::uint8_t>(v.get<unsigned>()));
    } else if (v.is_array() && v.size() == 3 &&
               std::all_of(v.begin(), v.end(), [](const auto& c) {
                 return c.is_number_unsigned() && c.template get<unsigned>() <= 255;
               })) {
      entries.emplace(cls, Rgb{v[0].get<std::uint8_t>(), v[1].get<std::uint8_t>(),
                               v[2].get<std::uint8_t>()});
    } else {
      throw ParseError("class '" + cls +
                       "': encoding must be 0..255 or [r, g, b]");
    }
  }
  return ClassColorMap(std::move(entries));
}

inline nlohmann::json class_color_map_to_json(const ClassColorMap& map) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [cls, enc] : map.entries()) {
    if (const auto* label = std::get_if<std::uint8_t>(&enc)) {
      j[cls] = *label;
    } else {
      const auto& c = std::get<Rgb>(enc);
      j[cls] = {c.r, c.g, c.b};
    }
  }
  return j;
}

}  // namespace segbench
