#include <filesystem>

#include <gtest/gtest.h>
#include <png.h>

#include "matteforge/png_io.hpp"
#include "matteforge/rng.hpp"

using namespace matteforge;
namespace fs = std::filesystem;

namespace {

// Encodes raw samples with an arbitrary libpng configuration, bypassing the
// library's own encoder.
Bytes raw_png(int w, int h, int color_type, int bit_depth, const std::vector<std::uint8_t>& samples) {
  Bytes out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep d, png_size_t n) {
        auto* v = static_cast<Bytes*>(png_get_io_ptr(p));
        v->insert(v->end(), d, d + n);
      },
      [](png_structp) {});
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t row = samples.size() / static_cast<std::size_t>(h);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(samples.data() + row * static_cast<std::size_t>(y)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

TEST(Png, AlphaRoundTripOnByteGrid) {
  Rng rng(1);
  std::vector<double> v(37 * 19);
  for (auto& x : v) x = from_byte(static_cast<std::uint8_t>(rng.below(256)));
  const AlphaMatte a(Size{37, 19}, v);
  EXPECT_EQ(decode_alpha(encode_map(a)), a);
}

TEST(Png, AlphaQuantizesRoundHalfUp) {
  const AlphaMatte a(Size{2, 1}, std::vector<double>{0.5, 1.0 / 510.0});
  const AlphaMatte back = decode_alpha(encode_map(a));
  EXPECT_EQ(back[0], 128.0 / 255.0);
  EXPECT_EQ(back[1], 1.0 / 255.0);
}

TEST(Png, TrimapRoundTrip) {
  Trimap t(Size{4, 3}, Label::Unknown);
  t(0, 0) = Label::Foreground;
  t(3, 2) = Label::Background;
  EXPECT_EQ(decode_trimap(encode_map(t)), t);
}

TEST(Png, TrimapPaletteErrorCarriesCoordinates) {
  std::vector<std::uint8_t> s{0, 128, 255, 255, 0, 128, 128, 7, 0};
  const Bytes bytes = raw_png(3, 3, PNG_COLOR_TYPE_GRAY, 8, s);
  try {
    decode_trimap(bytes);
    FAIL() << "expected PaletteError";
  } catch (const PaletteError& e) {
    EXPECT_EQ(e.x(), 1);
    EXPECT_EQ(e.y(), 2);
  }
}

TEST(Png, RgbRoundTrip) {
  std::vector<Rgb> px;
  for (int i = 0; i < 6; ++i) px.push_back({from_byte(static_cast<std::uint8_t>(i * 40)), 1.0, 0.0});
  const ImageRGB img(Size{3, 2}, px);
  EXPECT_EQ(decode_rgb(encode_rgb(img)), img);
}

TEST(Png, RejectsWrongFormats) {
  EXPECT_THROW(decode_alpha(Bytes{1, 2, 3}), FormatError);
  const Bytes rgb = raw_png(2, 2, PNG_COLOR_TYPE_RGB, 8, std::vector<std::uint8_t>(12, 9));
  EXPECT_THROW(decode_alpha(rgb), FormatError);
  const Bytes gray = raw_png(2, 2, PNG_COLOR_TYPE_GRAY, 8, std::vector<std::uint8_t>(4, 9));
  EXPECT_THROW(decode_rgb(gray), FormatError);
  const Bytes deep = raw_png(2, 2, PNG_COLOR_TYPE_GRAY, 16, std::vector<std::uint8_t>(8, 9));
  EXPECT_THROW(decode_alpha(deep), FormatError);
  Bytes truncated = encode_map(AlphaMatte(Size{16, 16}, 0.25));
  truncated.resize(truncated.size() / 2);
  EXPECT_THROW(decode_alpha(truncated), FormatError);
}

TEST(Png, EncodingIsDeterministic) {
  const AlphaMatte a(Size{9, 9}, 0.4);
  EXPECT_EQ(encode_map(a), encode_map(a));
}

TEST(Files, AtomicWriteLeavesNoTemporary) {
  const fs::path dir = fs::temp_directory_path() / "matteforge_png_io_test";
  fs::remove_all(dir);
  const fs::path target = dir / "nested" / "a.png";
  write_file_atomic(target, encode_map(AlphaMatte(Size{3, 3}, 1.0)));
  EXPECT_TRUE(fs::exists(target));
  EXPECT_FALSE(fs::exists(dir / "nested" / "a.png.tmp"));
  EXPECT_EQ(load_alpha(target), AlphaMatte(Size{3, 3}, 1.0));
  EXPECT_THROW(read_file(dir / "missing.png"), FormatError);
  fs::remove_all(dir);
}
