// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

// Small generated datasets with known answers, used by the test suite and
// the `synth` CLI command.

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "segbench/dataset.hpp"
#include "segbench/image.hpp"
#include "segbench/mask.hpp"
#include "segbench/prompts.hpp"
#include "segbench/video.hpp"

namespace segbench {

struct SyntheticOptions {
  std::string dataset_id = "synthetic";
  std::vector<std::string> classes{"gallbladder", "liver", "fat"};
  std::size_t images_per_class = 20;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t images_per_patient = 4;
  Split split = Split::val;
  std::uint64_t seed = 7;
};

inline Image gray_image(const BinaryMask& mask, std::uint8_t fg, std::uint8_t bg) {
  Image img{mask.height(), mask.width(), 1, false, {}};
  img.pixels.resize(mask.height() * mask.width());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = mask.get_index(i) ? fg : bg;
  return img;
}

inline BinaryMask rectangle(std::size_t h, std::size_t w, std::size_t top, std::size_t left,
                            std::size_t rows, std::size_t cols) {
  BinaryMask m(h, w);
  for (std::size_t r = top; r < top + rows && r < h; ++r) {
    for (std::size_t c = left; c < left + cols && c < w; ++c) m.set(r, c, true);
  }
  return m;
}

/// Writes images/, masks/ and a manifest (manifest.json + records.jsonl)
/// under `dir`. Each image shows one bright rectangle on a dark background
/// and its mask is that rectangle, so thresholding the image recovers the
/// ground truth. Returns the manifest header path.
inline std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir,
                                                     const SyntheticOptions& o = {}) {
  DatasetManifest m;
  m.base_dir = dir;
  SplitMix64 rng(o.seed);
  for (const auto& cls : o.classes) {
    for (std::size_t i = 0; i < o.images_per_class; ++i) {
      const std::size_t rows = 6 + rng.next() % 6;
      const std::size_t cols = 6 + rng.next() % 6;
      const std::size_t top = rng.next() % (o.height - rows);
      const std::size_t left = rng.next() % (o.width - cols);
      const BinaryMask mask = rectangle(o.height, o.width, top, left, rows, cols);
      char stem[64];
      std::snprintf(stem, sizeof(stem), "%s_%02zu.png", cls.c_str(), i);
      const std::string image_ref = std::string("images/") + stem;
      const std::string mask_ref = std::string("masks/") + stem;
      write_file(dir / image_ref, encode_png(gray_image(mask, 200, 40)));
      write_file(dir / mask_ref, encode_mask_png(mask));
      m.records.push_back({o.dataset_id, image_ref, mask_ref, cls,
                           "p" + std::to_string(i / o.images_per_patient), o.split});
    }
  }
  m.split_ratios[o.dataset_id] = SplitRatios{SplitRatios::Unit::fraction, {0.6, 0.2, 0.2}};
  return write_manifest(dir / "manifest.json", m);
}

/// Writes a clip whose masks are given per frame; frames are the masks
/// rendered as gray images.
inline ClipRecord write_clip(const std::filesystem::path& dir, const std::string& clip_id,
                             const std::string& class_id, const std::vector<BinaryMask>& masks,
                             double fps = 16.0) {
  ClipRecord clip{clip_id, class_id, {}, {}, fps};
  for (std::size_t f = 0; f < masks.size(); ++f) {
    const std::string name = clip_id + "_f" + std::to_string(f) + ".png";
    clip.frames.push_back(dir / "frames" / name);
    clip.masks.push_back(dir / "masks" / name);
    write_file(clip.frames.back(), encode_png(gray_image(masks[f], 200, 40)));
    write_file(clip.masks.back(), encode_mask_png(masks[f]));
  }
  return clip;
}

/// 6x6 frames, a 2x4 block starting at (2, 0) that moves one column right
/// per frame.
inline std::vector<BinaryMask> translating_block_masks(std::size_t frames = 3) {
  std::vector<BinaryMask> masks;
  for (std::size_t f = 0; f < frames; ++f) masks.push_back(rectangle(6, 6, 2, f, 2, 4));
  return masks;
}

inline std::vector<BinaryMask> static_block_masks(std::size_t frames = 3) {
  return std::vector<BinaryMask>(frames, rectangle(6, 6, 2, 0, 2, 4));
}

}  // namespace segbench
