// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

// PNG decoding/encoding on top of libpng, and the mask-producing decoders
// (thresholded binary masks, multi-class label splitting).

#pragma once

#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <png.h>

#include "segbench/errors.hpp"
#include "segbench/mask.hpp"

namespace segbench {

/// 8-bit image, interleaved channels, row-major. channels is 1 or 3.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  bool paletted = false;  // channels == 1 and pixels are palette indices
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return pixels[(row * width + col) * channels + ch];
  }
};

enum class PaletteMode {
  expand,   // palette entries become RGB triples
  indices,  // keep raw palette indices as single-channel labels
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

namespace detail {

struct PngReader {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
  char message[256] = {};
};

inline void png_read_from_span(png_structp png, png_bytep out, png_size_t n) {
  auto* reader = static_cast<PngReader*>(png_get_io_ptr(png));
  if (reader->offset + n > reader->data.size()) {
    png_error(png, "truncated PNG data");
  }
  std::memcpy(out, reader->data.data() + reader->offset, n);
  reader->offset += n;
}

inline void png_error_to_buffer(png_structp png, png_const_charp msg) {
  auto* reader = static_cast<PngReader*>(png_get_error_ptr(png));
  std::strncpy(reader->message, msg, sizeof(reader->message) - 1);
  png_longjmp(png, 1);
}

inline void png_ignore_warning(png_structp, png_const_charp) {}

// The two functions below are the only places that call setjmp. They hold
// no C++ objects with destructors, so a longjmp out of libpng is safe.
struct PngHeader {
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  std::size_t channels = 0, rowbytes = 0;
  bool keep_indices = false;
};

inline bool png_read_header(png_structp png, png_infop info, bool want_indices,
                            PngHeader* h) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_info(png, info);
  png_get_IHDR(png, info, &h->width, &h->height, &h->bit_depth, &h->color_type, nullptr,
               nullptr, nullptr);
  h->keep_indices = h->color_type == PNG_COLOR_TYPE_PALETTE && want_indices;
  if (h->bit_depth == 16) png_set_strip_16(png);
  if (h->color_type == PNG_COLOR_TYPE_PALETTE) {
    if (h->keep_indices) {
      png_set_packing(png);
    } else {
      png_set_palette_to_rgb(png);
    }
  }
  if (h->color_type == PNG_COLOR_TYPE_GRAY && h->bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (!h->keep_indices) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  h->channels = png_get_channels(png, info);
  h->rowbytes = png_get_rowbytes(png, info);
  return true;
}

inline bool png_read_rows(png_structp png, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows);
  return true;
}

}  // namespace detail

/// Decodes an 8-bit (or narrower/16-bit, normalized to 8-bit) PNG. Alpha is
/// dropped; gray stays 1 channel, color becomes 3 channels.
inline Image decode_png(std::span<const std::uint8_t> bytes,
                        PaletteMode palette = PaletteMode::expand) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw FormatError("not a PNG stream");
  }
  detail::PngReader reader{bytes, 0, {}};
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &reader,
                                           detail::png_error_to_buffer,
                                           detail::png_ignore_warning);
  if (png == nullptr) throw FormatError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError("png_create_info_struct failed");
  }
  png_set_read_fn(png, &reader, detail::png_read_from_span);

  auto fail = [&]() -> FormatError {
    png_destroy_read_struct(&png, &info, nullptr);
    return FormatError(std::string("PNG decode failed: ") + reader.message);
  };
  detail::PngHeader h;
  if (!detail::png_read_header(png, info, palette == PaletteMode::indices, &h)) throw fail();

  Image img;
  img.height = h.height;
  img.width = h.width;
  img.channels = h.channels;
  img.paletted = h.keep_indices;
  std::vector<std::uint8_t> raw(h.rowbytes * h.height);
  std::vector<png_bytep> rows(h.height);
  for (std::size_t r = 0; r < h.height; ++r) rows[r] = raw.data() + r * h.rowbytes;
  if (!detail::png_read_rows(png, rows.data())) throw fail();
  png_destroy_read_struct(&png, &info, nullptr);

  if (h.channels != 1 && h.channels != 3) {
    throw FormatError("unsupported PNG channel layout (" + std::to_string(h.channels) +
                      " channels)");
  }
  img.pixels = std::move(raw);
  return img;
}

/// Encodes gray (1 channel) or RGB (3 channel) 8-bit PNG. If `palette` is
/// given, the image must be single-channel and is written as indexed color.
inline std::vector<std::uint8_t> encode_png(
    const Image& img, std::optional<std::vector<Rgb>> palette = std::nullopt) {
  if (img.height == 0 || img.width == 0) {
    throw DomainError("cannot encode an empty image");
  }
  if (img.pixels.size() != img.height * img.width * img.channels) {
    throw DomainError("pixel buffer does not match image dimensions");
  }
  png_image desc;
  std::memset(&desc, 0, sizeof(desc));
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(img.width);
  desc.height = static_cast<png_uint_32>(img.height);
  std::vector<std::uint8_t> colormap;
  if (palette) {
    if (img.channels != 1) throw DomainError("paletted PNG needs 1 channel");
    desc.format = PNG_FORMAT_RGB_COLORMAP;
    desc.colormap_entries = static_cast<png_uint_32>(palette->size());
    for (const auto& c : *palette) {
      colormap.insert(colormap.end(), {c.r, c.g, c.b});
    }
  } else if (img.channels == 1) {
    desc.format = PNG_FORMAT_GRAY;
  } else if (img.channels == 3) {
    desc.format = PNG_FORMAT_RGB;
  } else {
    throw DomainError("encode_png supports 1 or 3 channels");
  }
  png_alloc_size_t size = 0;
  const void* cmap = palette ? colormap.data() : nullptr;
  if (!png_image_write_to_memory(&desc, nullptr, &size, 0, img.pixels.data(), 0,
                                 cmap)) {
    throw FormatError(std::string("PNG encode failed: ") + desc.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&desc, out.data(), &size, 0, img.pixels.data(),
                                 0, cmap)) {
    throw FormatError(std::string("PNG encode failed: ") + desc.message);
  }
  out.resize(size);
  return out;
}

/// Gray = BT.601 luma with integer rounding.
inline Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  Image out{img.height, img.width, 1, false, {}};
  out.pixels.resize(img.height * img.width);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const unsigned r = img.pixels[i * 3], g = img.pixels[i * 3 + 1],
                   b = img.pixels[i * 3 + 2];
    out.pixels[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
  }
  return out;
}

/// Pixels with value >= threshold become foreground.
inline BinaryMask binarize(const Image& img, std::uint8_t threshold = 128) {
  if (img.height == 0 || img.width == 0) {
    throw DomainError("image has zero dimension");
  }
  const Image gray = to_gray(img);
  BinaryMask mask(gray.height, gray.width);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
    if (gray.pixels[i] >= threshold) mask.set_index(i, true);
  }
  return mask;
}

inline BinaryMask decode_mask(std::span<const std::uint8_t> image_bytes,
                              std::uint8_t threshold = 128) {
  return binarize(decode_png(image_bytes, PaletteMode::expand), threshold);
}

inline BinaryMask load_mask(const std::filesystem::path& path,
                            std::uint8_t threshold = 128) {
  return decode_mask(read_file(path), threshold);
}

/// Dimensions without keeping pixel data around.
inline std::pair<std::size_t, std::size_t> image_dimensions(
    const std::filesystem::path& path) {
  const Image img = decode_png(read_file(path));
  return {img.height, img.width};
}

/// PNG with 0 for background and 255 for foreground.
inline std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask) {
  Image img{mask.height(), mask.width(), 1, false, mask.to_bytes()};
  for (auto& p : img.pixels) p = p ? 255 : 0;
  return encode_png(img);
}

/// Splits a label image into one binary mask per class in `map`. Matching is
/// exact: a pixel belongs to a class only if it equals the class encoding.
inline std::map<std::string, BinaryMask> split_multiclass(const Image& img,
                                                          const ClassColorMap& map) {
  if (img.height == 0 || img.width == 0) {
    throw DomainError("label image has zero dimension");
  }
  for (const auto& [cls, enc] : map.entries()) {
    const bool is_label = std::holds_alternative<std::uint8_t>(enc);
    if (is_label && img.channels != 1) {
      throw FormatError("class '" + cls +
                        "' uses a label value but the image is RGB");
    }
    if (!is_label && img.channels != 3) {
      throw FormatError("class '" + cls +
                        "' uses an RGB color but the image is single-channel");
    }
  }
  std::map<std::string, BinaryMask> out;
  for (const auto& [cls, enc] : map.entries()) {
    BinaryMask mask(img.height, img.width);
    const std::size_t n = img.height * img.width;
    if (const auto* label = std::get_if<std::uint8_t>(&enc)) {
      for (std::size_t i = 0; i < n; ++i) {
        if (img.pixels[i] == *label) mask.set_index(i, true);
      }
    } else {
      const auto& c = std::get<Rgb>(enc);
      for (std::size_t i = 0; i < n; ++i) {
        if (img.pixels[i * 3] == c.r && img.pixels[i * 3 + 1] == c.g &&
            img.pixels[i * 3 + 2] == c.b) {
          mask.set_index(i, true);
        }
      }
    }
    out.emplace(cls, std::move(mask));
  }
  return out;
}

inline std::map<std::string, BinaryMask> split_multiclass(
    std::span<const std::uint8_t> label_image, const ClassColorMap& map) {
  return split_multiclass(decode_png(label_image, PaletteMode::indices), map);
}

}  // namespace segbench
