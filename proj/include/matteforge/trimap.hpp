#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "matteforge/raster.hpp"

namespace matteforge {

// Threshold separating "pure" alpha from the transition band. Chosen so that
// 8-bit quantized mattes classify cleanly.
inline constexpr double kPureAlphaEpsilon = 1.0 / 255.0;

struct RegionPartition {
  BinaryMask known;       // foreground or background
  BinaryMask transition;  // unknown band
};

struct RegionMasks {
  BinaryMask fg;
  BinaryMask bg;
};

// Erosion by a Euclidean disk {(dx,dy) : dx^2 + dy^2 <= r^2} with replicate
// borders. Out-of-range taps read the nearest edge pixel, which is the same
// as intersecting the disk with the image, so the test reduces to: every
// in-image pixel within the disk is set.
//
// Cost is O(W*H*r): per row we precompute the distance to the nearest unset
// pixel on each side, then each disk row is one comparison.
inline BinaryMask erode_disk(const BinaryMask& in, int radius) {
  if (radius < 0) {
    throw ContractError("erosion radius must be non-negative");
  }
  const int w = in.width();
  const int h = in.height();
  if (radius == 0 || w == 0 || h == 0) {
    return in;
  }

  // gap[y][x]: min horizontal distance from x to an unset pixel in row y.
  constexpr int kFar = std::numeric_limits<int>::max() / 2;
  std::vector<int> gap(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    int* row = gap.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(w);
    int last = -kFar;
    for (int x = 0; x < w; ++x) {
      if (!in.test(x, y)) last = x;
      row[x] = x - last;
    }
    last = kFar;
    for (int x = w - 1; x >= 0; --x) {
      if (!in.test(x, y)) last = x;
      row[x] = std::min(row[x], last - x);
    }
  }

  std::vector<int> half_width(static_cast<std::size_t>(radius) + 1);
  for (int dy = 0; dy <= radius; ++dy) {
    // Largest dx with dx^2 + dy^2 <= r^2, computed in integers.
    int dx = static_cast<int>(std::sqrt(static_cast<double>(radius * radius - dy * dy)));
    while ((dx + 1) * (dx + 1) + dy * dy <= radius * radius) ++dx;
    while (dx > 0 && dx * dx + dy * dy > radius * radius) --dx;
    half_width[static_cast<std::size_t>(dy)] = dx;
  }

  BinaryMask out(in.size());
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius);
    const int y1 = std::min(h - 1, y + radius);
    for (int x = 0; x < w; ++x) {
      if (!in.test(x, y)) continue;
      bool keep = true;
      for (int yy = y0; yy <= y1 && keep; ++yy) {
        const int hw = half_width[static_cast<std::size_t>(std::abs(yy - y))];
        keep = gap[static_cast<std::size_t>(yy) * static_cast<std::size_t>(w) +
                   static_cast<std::size_t>(x)] > hw;
      }
      if (keep) out.set(x, y);
    }
  }
  return out;
}

// Dual of erode_disk: dilation of a set is the complement of the eroded
// complement.
inline BinaryMask dilate_disk(const BinaryMask& in, int radius) {
  BinaryMask inverted(in.size());
  for (std::size_t i = 0; i < in.pixel_count(); ++i) inverted.set(i, !in.test(i));
  const BinaryMask eroded = erode_disk(inverted, radius);
  BinaryMask out(in.size());
  for (std::size_t i = 0; i < in.pixel_count(); ++i) out.set(i, !eroded.test(i));
  return out;
}

inline BinaryMask threshold_at_least(const AlphaMatte& alpha, double level) {
  BinaryMask out(alpha.size());
  for (std::size_t i = 0; i < alpha.pixel_count(); ++i) out.set(i, alpha[i] >= level);
  return out;
}

inline BinaryMask threshold_at_most(const AlphaMatte& alpha, double level) {
  BinaryMask out(alpha.size());
  for (std::size_t i = 0; i < alpha.pixel_count(); ++i) out.set(i, alpha[i] <= level);
  return out;
}

// Foreground = {alpha >= 1-eps} eroded by fg_shrink, background =
// {alpha <= eps} eroded by bg_shrink, everything else unknown.
inline Trimap make_trimap(const AlphaMatte& alpha, int fg_shrink, int bg_shrink) {
  if (fg_shrink < 0 || bg_shrink < 0) {
    throw ContractError("trimap radii must be non-negative");
  }
  const BinaryMask fg = erode_disk(threshold_at_least(alpha, 1.0 - kPureAlphaEpsilon), fg_shrink);
  const BinaryMask bg = erode_disk(threshold_at_most(alpha, kPureAlphaEpsilon), bg_shrink);
  std::vector<Label> labels(alpha.pixel_count(), Label::Unknown);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (fg.test(i)) {
      labels[i] = Label::Foreground;
    } else if (bg.test(i)) {
      labels[i] = Label::Background;
    }
  }
  return Trimap(alpha.size(), std::move(labels));
}

inline RegionPartition partition(const Trimap& trimap) {
  RegionPartition p{BinaryMask(trimap.size()), BinaryMask(trimap.size())};
  for (std::size_t i = 0; i < trimap.pixel_count(); ++i) {
    const bool unknown = trimap[i] == Label::Unknown;
    p.known.set(i, !unknown);
    p.transition.set(i, unknown);
  }
  return p;
}

// Three-valued maps given as reals are validated against the palette first.
inline RegionPartition partition(Size size, std::span<const double> values) {
  return partition(Trimap::from_values(size, values));
}

inline RegionMasks masks(const Trimap& trimap) {
  RegionMasks m{BinaryMask(trimap.size()), BinaryMask(trimap.size())};
  for (std::size_t i = 0; i < trimap.pixel_count(); ++i) {
    m.fg.set(i, trimap[i] == Label::Foreground);
    m.bg.set(i, trimap[i] == Label::Background);
  }
  return m;
}

inline RegionMasks masks(Size size, std::span<const double> values) {
  return masks(Trimap::from_values(size, values));
}

}  // namespace matteforge
