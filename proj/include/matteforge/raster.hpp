#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "matteforge/error.hpp"

namespace matteforge {

struct Size {
  int width = 0;
  int height = 0;

  std::size_t area() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool operator==(const Size&) const = default;
};

inline std::string to_string(Size s) {
  return std::to_string(s.width) + "x" + std::to_string(s.height);
}

// Row-major 2-D container. The typed rasters below wrap it and add the
// value-domain invariants.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(Size size, T fill = T{}) : size_(checked(size)), data_(size.area(), fill) {}

  Grid(Size size, std::vector<T> values) : size_(checked(size)), data_(std::move(values)) {
    if (data_.size() != size_.area()) {
      throw DimensionError("grid data length " + std::to_string(data_.size()) +
                           " does not match " + to_string(size_));
    }
  }

  int width() const noexcept { return size_.width; }
  int height() const noexcept { return size_.height; }
  Size size() const noexcept { return size_; }
  std::size_t pixel_count() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < size_.width && y < size_.height;
  }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(size_.width) +
           static_cast<std::size_t>(x);
  }

  const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }
  T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }

  // Replicate-border read: out-of-range coordinates take the nearest edge pixel.
  const T& clamped(int x, int y) const noexcept {
    return (*this)(std::clamp(x, 0, size_.width - 1), std::clamp(y, 0, size_.height - 1));
  }

  std::span<const T> values() const noexcept { return data_; }
  std::span<T> values() noexcept { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  static Size checked(Size s) {
    if (s.width < 0 || s.height < 0) {
      throw DimensionError("negative raster size " + to_string(s));
    }
    return s;
  }

  Size size_{};
  std::vector<T> data_;
};

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  bool operator==(const Rgb&) const = default;
};

namespace detail {

inline bool in_unit(double v) noexcept { return v >= 0.0 && v <= 1.0; }

template <typename Fn>
void check_unit_range(std::size_t n, const char* what, Fn&& value_at) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_unit(value_at(i))) {
      throw ContractError(std::string(what) + " value outside [0,1] at flat index " +
                          std::to_string(i));
    }
  }
}

}  // namespace detail

// Single-channel opacity map, every value in [0,1].
class AlphaMatte {
 public:
  AlphaMatte() = default;
  AlphaMatte(Size size, double fill) : grid_(size, fill) {
    detail::check_unit_range(1, "alpha", [&](std::size_t) { return fill; });
  }
  AlphaMatte(Size size, std::vector<double> values) : grid_(size, std::move(values)) {
    detail::check_unit_range(grid_.pixel_count(), "alpha",
                             [&](std::size_t i) { return grid_[i]; });
  }

  int width() const noexcept { return grid_.width(); }
  int height() const noexcept { return grid_.height(); }
  Size size() const noexcept { return grid_.size(); }
  std::size_t pixel_count() const noexcept { return grid_.pixel_count(); }
  double operator()(int x, int y) const noexcept { return grid_(x, y); }
  double operator[](std::size_t i) const noexcept { return grid_[i]; }
  double clamped(int x, int y) const noexcept { return grid_.clamped(x, y); }
  std::span<const double> values() const noexcept { return grid_.values(); }
  const Grid<double>& grid() const noexcept { return grid_; }

  bool operator==(const AlphaMatte&) const = default;

 private:
  Grid<double> grid_;
};

// Three-channel color image, every channel value in [0,1].
class ImageRGB {
 public:
  ImageRGB() = default;
  ImageRGB(Size size, Rgb fill) : grid_(size, fill) { validate(); }
  ImageRGB(Size size, std::vector<Rgb> values) : grid_(size, std::move(values)) { validate(); }

  int width() const noexcept { return grid_.width(); }
  int height() const noexcept { return grid_.height(); }
  Size size() const noexcept { return grid_.size(); }
  std::size_t pixel_count() const noexcept { return grid_.pixel_count(); }
  const Rgb& operator()(int x, int y) const noexcept { return grid_(x, y); }
  const Rgb& operator[](std::size_t i) const noexcept { return grid_[i]; }
  std::span<const Rgb> values() const noexcept { return grid_.values(); }

  bool operator==(const ImageRGB&) const = default;

 private:
  void validate() const {
    for (std::size_t i = 0; i < grid_.pixel_count(); ++i) {
      const Rgb& p = grid_[i];
      if (!detail::in_unit(p.r) || !detail::in_unit(p.g) || !detail::in_unit(p.b)) {
        throw ContractError("image channel value outside [0,1] at flat index " +
                            std::to_string(i));
      }
    }
  }

  Grid<Rgb> grid_;
};

// Hard 0/1 mask. Stored as bytes; any nonzero write is normalized to 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(Size size, bool fill = false) : grid_(size, fill ? 1 : 0) {}
  BinaryMask(Size size, std::vector<std::uint8_t> values) : grid_(size, std::move(values)) {
    for (std::size_t i = 0; i < grid_.pixel_count(); ++i) {
      if (grid_[i] > 1) {
        throw ContractError("binary mask value " + std::to_string(grid_[i]) +
                            " at flat index " + std::to_string(i));
      }
    }
  }

  int width() const noexcept { return grid_.width(); }
  int height() const noexcept { return grid_.height(); }
  Size size() const noexcept { return grid_.size(); }
  std::size_t pixel_count() const noexcept { return grid_.pixel_count(); }
  bool contains(int x, int y) const noexcept { return grid_.contains(x, y); }

  bool test(int x, int y) const noexcept { return grid_(x, y) != 0; }
  bool test(std::size_t i) const noexcept { return grid_[i] != 0; }
  void set(int x, int y, bool on = true) noexcept { grid_(x, y) = on ? 1 : 0; }
  void set(std::size_t i, bool on = true) noexcept { grid_[i] = on ? 1 : 0; }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(grid_.values().begin(), grid_.values().end(),
                                                std::uint8_t{1}));
  }
  bool none() const noexcept { return count() == 0; }
  std::span<const std::uint8_t> values() const noexcept { return grid_.values(); }

  bool operator==(const BinaryMask&) const = default;

 private:
  Grid<std::uint8_t> grid_;
};

enum class Label : std::uint8_t { Background = 0, Unknown = 1, Foreground = 2 };

inline double label_value(Label l) noexcept { return 0.5 * static_cast<int>(l); }

// Maps an exact palette value {0, 0.5, 1} to its label.
inline bool label_from_value(double v, Label& out) noexcept {
  if (v == 0.0) {
    out = Label::Background;
  } else if (v == 0.5) {
    out = Label::Unknown;
  } else if (v == 1.0) {
    out = Label::Foreground;
  } else {
    return false;
  }
  return true;
}

// Three-valued map: background (0), unknown (0.5), foreground (1). Used for
// trimaps as well as every guidance flavour (scribble, click, none).
class Trimap {
 public:
  Trimap() = default;
  Trimap(Size size, Label fill) : grid_(size, fill) {}
  Trimap(Size size, std::vector<Label> labels) : grid_(size, std::move(labels)) {}

  // Throws PaletteError naming the first off-palette pixel in scan order.
  static Trimap from_values(Size size, std::span<const double> values) {
    if (values.size() != size.area()) {
      throw DimensionError("trimap value count does not match " + to_string(size));
    }
    std::vector<Label> labels(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!label_from_value(values[i], labels[i])) {
        const int x = size.width > 0 ? static_cast<int>(i % size.width) : 0;
        const int y = size.width > 0 ? static_cast<int>(i / size.width) : 0;
        throw PaletteError("value " + std::to_string(values[i]) + " at (" + std::to_string(x) +
                               ", " + std::to_string(y) + ") is not in {0, 0.5, 1}",
                           x, y);
      }
    }
    return Trimap(size, std::move(labels));
  }

  int width() const noexcept { return grid_.width(); }
  int height() const noexcept { return grid_.height(); }
  Size size() const noexcept { return grid_.size(); }
  std::size_t pixel_count() const noexcept { return grid_.pixel_count(); }
  Label operator()(int x, int y) const noexcept { return grid_(x, y); }
  Label operator[](std::size_t i) const noexcept { return grid_[i]; }
  Label& operator()(int x, int y) noexcept { return grid_(x, y); }
  Label& operator[](std::size_t i) noexcept { return grid_[i]; }
  double value(std::size_t i) const noexcept { return label_value(grid_[i]); }
  std::span<const Label> labels() const noexcept { return grid_.values(); }

  std::size_t count(Label l) const noexcept {
    return static_cast<std::size_t>(
        std::count(grid_.values().begin(), grid_.values().end(), l));
  }

  bool operator==(const Trimap&) const = default;

 private:
  Grid<Label> grid_;
};

using GuidanceMap = Trimap;

inline void require_same_size(Size a, Size b, const char* a_name, const char* b_name) {
  if (a != b) {
    throw DimensionError(std::string(b_name) + " is " + to_string(b) + " but " + a_name +
                         " is " + to_string(a));
  }
}

namespace detail {

// Error-free transforms (Knuth two-sum, fma two-product).
inline void two_sum(double a, double b, double& s, double& e) noexcept {
  s = a + b;
  const double z = s - a;
  e = (a - (s - z)) + (b - z);
}

inline void two_prod(double a, double b, double& p, double& e) noexcept {
  p = a * b;
  e = std::fma(a, b, -p);
}

}  // namespace detail

// a*f + (1-a)*b evaluated in doubled precision and rounded once, so the
// result is within one ulp of the real-arithmetic value.
inline double blend(double a, double f, double b) noexcept {
  double q, q_err;
  detail::two_sum(1.0, -a, q, q_err);
  double p1, e1, p2, e2;
  detail::two_prod(a, f, p1, e1);
  detail::two_prod(q, b, p2, e2);
  double s, e3;
  detail::two_sum(p1, p2, s, e3);
  return s + (e1 + e2 + e3 + q_err * b);
}

// I = alpha*F + (1-alpha)*B, per pixel and channel, clamped to [0,1].
inline ImageRGB composite(const ImageRGB& fg, const ImageRGB& bg, const AlphaMatte& alpha) {
  require_same_size(alpha.size(), fg.size(), "alpha", "fg");
  require_same_size(alpha.size(), bg.size(), "alpha", "bg");
  std::vector<Rgb> out(alpha.pixel_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = alpha[i];
    const Rgb& f = fg[i];
    const Rgb& b = bg[i];
    out[i] = Rgb{std::clamp(blend(a, f.r, b.r), 0.0, 1.0),
                 std::clamp(blend(a, f.g, b.g), 0.0, 1.0),
                 std::clamp(blend(a, f.b, b.b), 0.0, 1.0)};
  }
  return ImageRGB(alpha.size(), std::move(out));
}

// Quantizes to the 8-bit grid with round-half-up.
inline std::uint8_t to_byte(double v) noexcept {
  const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(scaled);
}

inline double from_byte(std::uint8_t b) noexcept { return b / 255.0; }

}  // namespace matteforge
