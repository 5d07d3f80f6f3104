#pragma once

// 8-bit PNG codec for mattes, three-valued maps and RGB images.
//
// Byte conventions:
//   matte    v -> v/255 on decode, round-half-up(v*255) on encode
//   trimap   {0, 128, 255} <-> {background, unknown, foreground}
//   image    8-bit RGB, same per-channel rule as mattes
//
// Decoding goes through the low-level libpng API without transforms, so
// gamma or colour-space chunks in the input never alter sample values.

#include <png.h>

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <system_error>
#include <vector>

#include "matteforge/error.hpp"
#include "matteforge/raster.hpp"

namespace matteforge {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kTrimapBackgroundByte = 0;
inline constexpr std::uint8_t kTrimapUnknownByte = 128;
inline constexpr std::uint8_t kTrimapForegroundByte = 255;

namespace detail {

struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  Bytes samples;
};

struct PngReadCursor {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + n > cur->size) {
    png_error(png, "truncated PNG stream");
  }
  std::memcpy(out, cur->data + cur->pos, n);
  cur->pos += n;
}

inline void png_write_to_vector(png_structp png, png_bytep in, png_size_t n) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + n);
}

inline void png_flush_noop(png_structp) {}

inline void png_warning_silent(png_structp, png_const_charp) {}

// Checks the signature and IHDR, returning the declared colour type.
inline int peek_png_header(std::span<const std::uint8_t> bytes, int& bit_depth) {
  if (bytes.size() < 33 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw FormatError("not a PNG stream");
  }
  if (std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) {
    throw FormatError("PNG stream does not start with IHDR");
  }
  bit_depth = bytes[24];
  return bytes[25];
}

// All locals that outlive a longjmp are declared before setjmp.
inline bool decode_raw(std::span<const std::uint8_t> bytes, RawPng& out, char* err,
                       std::size_t err_len) {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngReadCursor cursor{bytes.data(), bytes.size(), 0};
  std::vector<png_bytep> rows;

  png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_silent);
  if (png == nullptr) {
    std::snprintf(err, err_len, "libpng initialisation failed");
    return false;
  }
  info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    std::snprintf(err, err_len, "libpng initialisation failed");
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    std::snprintf(err, err_len, "corrupt PNG stream");
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &cursor, png_read_from_memory);
  png_read_info(png, info);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.samples.assign(stride * static_cast<std::size_t>(out.height), 0);
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) {
    rows[static_cast<std::size_t>(y)] = out.samples.data() + stride * static_cast<std::size_t>(y);
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline RawPng decode_checked(std::span<const std::uint8_t> bytes, int want_color_type,
                             const char* what) {
  int bit_depth = 0;
  const int color_type = peek_png_header(bytes, bit_depth);
  if (bit_depth != 8) {
    throw FormatError(std::string(what) + " PNG must be 8-bit, found bit depth " +
                      std::to_string(bit_depth));
  }
  if (color_type != want_color_type) {
    throw FormatError(std::string(what) + " PNG has colour type " + std::to_string(color_type) +
                      ", expected " + std::to_string(want_color_type));
  }
  RawPng raw;
  char err[128] = {0};
  if (!decode_raw(bytes, raw, err, sizeof err)) {
    throw FormatError(err);
  }
  return raw;
}

inline bool encode_raw(const std::uint8_t* samples, int width, int height, int color_type,
                       int channels, Bytes& out, char* err, std::size_t err_len) {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  const std::size_t stride = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(samples + stride * static_cast<std::size_t>(y));
  }

  png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_silent);
  if (png == nullptr) {
    std::snprintf(err, err_len, "libpng initialisation failed");
    return false;
  }
  info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    std::snprintf(err, err_len, "libpng initialisation failed");
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    std::snprintf(err, err_len, "PNG encoding failed");
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

inline Bytes encode_checked(const Bytes& samples, Size size, int color_type, int channels) {
  if (size.width <= 0 || size.height <= 0) {
    throw DimensionError("cannot encode an empty raster as PNG");
  }
  Bytes out;
  char err[128] = {0};
  if (!encode_raw(samples.data(), size.width, size.height, color_type, channels, out, err,
                  sizeof err)) {
    throw FormatError(err);
  }
  return out;
}

}  // namespace detail

inline AlphaMatte decode_alpha(std::span<const std::uint8_t> bytes) {
  const auto raw = detail::decode_checked(bytes, PNG_COLOR_TYPE_GRAY, "matte");
  std::vector<double> values(raw.samples.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = from_byte(raw.samples[i]);
  }
  return AlphaMatte({raw.width, raw.height}, std::move(values));
}

// Palette is {0, 128, 255}; anything else raises PaletteError at the first
// offending pixel in scan order.
inline Trimap decode_trimap(std::span<const std::uint8_t> bytes) {
  const auto raw = detail::decode_checked(bytes, PNG_COLOR_TYPE_GRAY, "trimap");
  std::vector<Label> labels(raw.samples.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    switch (raw.samples[i]) {
      case kTrimapBackgroundByte: labels[i] = Label::Background; break;
      case kTrimapUnknownByte: labels[i] = Label::Unknown; break;
      case kTrimapForegroundByte: labels[i] = Label::Foreground; break;
      default: {
        const int x = static_cast<int>(i % static_cast<std::size_t>(raw.width));
        const int y = static_cast<int>(i / static_cast<std::size_t>(raw.width));
        throw PaletteError("trimap byte " + std::to_string(raw.samples[i]) + " at (" +
                               std::to_string(x) + ", " + std::to_string(y) +
                               ") is not in {0, 128, 255}",
                           x, y);
      }
    }
  }
  return Trimap({raw.width, raw.height}, std::move(labels));
}

inline ImageRGB decode_rgb(std::span<const std::uint8_t> bytes) {
  const auto raw = detail::decode_checked(bytes, PNG_COLOR_TYPE_RGB, "image");
  std::vector<Rgb> pixels(static_cast<std::size_t>(raw.width) *
                          static_cast<std::size_t>(raw.height));
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = Rgb{from_byte(raw.samples[3 * i]), from_byte(raw.samples[3 * i + 1]),
                    from_byte(raw.samples[3 * i + 2])};
  }
  return ImageRGB({raw.width, raw.height}, std::move(pixels));
}

inline Bytes encode_map(const AlphaMatte& alpha) {
  Bytes samples(alpha.pixel_count());
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = to_byte(alpha[i]);
  return detail::encode_checked(samples, alpha.size(), PNG_COLOR_TYPE_GRAY, 1);
}

inline Bytes encode_map(const Trimap& map) {
  Bytes samples(map.pixel_count());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    switch (map[i]) {
      case Label::Background: samples[i] = kTrimapBackgroundByte; break;
      case Label::Unknown: samples[i] = kTrimapUnknownByte; break;
      case Label::Foreground: samples[i] = kTrimapForegroundByte; break;
    }
  }
  return detail::encode_checked(samples, map.size(), PNG_COLOR_TYPE_GRAY, 1);
}

inline Bytes encode_map(const BinaryMask& mask) {
  Bytes samples(mask.pixel_count());
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = mask.test(i) ? 255 : 0;
  return detail::encode_checked(samples, mask.size(), PNG_COLOR_TYPE_GRAY, 1);
}

inline Bytes encode_rgb(const ImageRGB& image) {
  Bytes samples(image.pixel_count() * 3);
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    samples[3 * i] = to_byte(image[i].r);
    samples[3 * i + 1] = to_byte(image[i].g);
    samples[3 * i + 2] = to_byte(image[i].b);
  }
  return detail::encode_checked(samples, image.size(), PNG_COLOR_TYPE_RGB, 3);
}

// ---------------------------------------------------------------------------
// Files

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open " + path.string());
  }
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Writes to a sibling temporary and renames over the target, so readers never
// observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw FormatError("cannot write " + tmp.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw FormatError("short write to " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw FormatError("cannot rename " + tmp.string() + ": " + ec.message());
  }
}

inline void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline AlphaMatte load_alpha(const std::filesystem::path& path) { return decode_alpha(read_file(path)); }
inline Trimap load_trimap(const std::filesystem::path& path) { return decode_trimap(read_file(path)); }
inline ImageRGB load_rgb(const std::filesystem::path& path) { return decode_rgb(read_file(path)); }

}  // namespace matteforge
