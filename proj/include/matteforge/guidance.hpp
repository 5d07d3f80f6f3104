#pragma once

// Guidance synthesis: shrinks a trimap into scribbles by sampling anchor
// points in each known region, fitting short cubic curves through them,
// stamping the curves with a thick round brush and clipping the result back
// to the region it came from. Thickness decays over training steps so that
// early guidance looks like the trimap and late guidance like scribbles.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "matteforge/raster.hpp"
#include "matteforge/rng.hpp"
#include "matteforge/trimap.hpp"

namespace matteforge {

inline constexpr int kMaxPointsPerRegion = 10;
inline constexpr double kMinPointDistance = 50.0;
inline constexpr int kAttemptsPerPoint = 100;
inline constexpr int kClickDiameter = 40;
// Arc-length spacing between consecutive brush stamps along a curve.
inline constexpr double kStampSpacing = 0.5;

enum class Region : std::uint8_t { Foreground, Background };

struct Point {
  int x = 0;
  int y = 0;
  bool operator==(const Point&) const = default;
};

struct PointSet {
  std::vector<Point> points;
  Region region = Region::Foreground;
};

using ScribbleMask = BinaryMask;

inline double distance(Point a, Point b) noexcept {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

// Rejection sampling of up to max_points mask pixels with pairwise distance
// >= min_dist. Each point gets kAttemptsPerPoint draws; the first slot that
// exhausts its budget ends sampling.
inline PointSet sample_points(const BinaryMask& mask, int max_points, double min_dist, Rng& rng,
                              Region region = Region::Foreground) {
  if (max_points < 0 || min_dist < 0.0) {
    throw ContractError("sample_points requires max_points >= 0 and min_dist >= 0");
  }
  PointSet out;
  out.region = region;
  std::vector<Point> candidates;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.test(x, y)) candidates.push_back({x, y});
    }
  }
  if (candidates.empty()) return out;

  const double min_sq = min_dist * min_dist;
  while (static_cast<int>(out.points.size()) < max_points) {
    bool placed = false;
    for (int attempt = 0; attempt < kAttemptsPerPoint && !placed; ++attempt) {
      const Point p = candidates[static_cast<std::size_t>(rng.below(candidates.size()))];
      bool far_enough = true;
      for (const Point& q : out.points) {
        const double dx = p.x - q.x;
        const double dy = p.y - q.y;
        if (dx * dx + dy * dy < min_sq) {
          far_enough = false;
          break;
        }
      }
      if (far_enough) {
        out.points.push_back(p);
        placed = true;
      }
    }
    if (!placed) break;
  }
  return out;
}

// Accumulates filled disks and rasterizes their union.
//
// A pixel (px, py) is covered by a disk iff (px-cx)^2 + (py-cy)^2 <= r^2.
// Each disk contributes one horizontal span per row into a difference array,
// so the cost per disk is O(rows) regardless of radius.
class DiskCanvas {
 public:
  explicit DiskCanvas(Size size)
      : size_(size), diff_((static_cast<std::size_t>(size.width) + 1) * size.height, 0) {}

  void add_disk(double cx, double cy, double radius) {
    if (radius < 0.0 || size_.width == 0 || size_.height == 0) return;
    const double r2 = radius * radius;
    const int y0 = std::max(0, static_cast<int>(std::ceil(cy - radius)) - 1);
    const int y1 = std::min(size_.height - 1, static_cast<int>(std::floor(cy + radius)) + 1);
    for (int py = y0; py <= y1; ++py) {
      const double dy = py - cy;
      const double rem = r2 - dy * dy;
      if (rem < 0.0) continue;
      const auto inside = [&](int px) {
        const double dx = px - cx;
        return dx * dx + dy * dy <= r2;
      };
      const double half = std::sqrt(rem);
      int left = static_cast<int>(std::ceil(cx - half));
      while (inside(left - 1)) --left;
      while (left <= cx && !inside(left)) ++left;
      int right = static_cast<int>(std::floor(cx + half));
      while (inside(right + 1)) ++right;
      while (right >= cx && !inside(right)) --right;
      if (left > right) continue;
      left = std::max(left, 0);
      right = std::min(right, size_.width - 1);
      if (left > right) continue;
      int* row = diff_.data() + static_cast<std::size_t>(py) * (size_.width + 1);
      row[left] += 1;
      row[right + 1] -= 1;
    }
  }

  BinaryMask rasterize() const {
    BinaryMask out(size_);
    for (int y = 0; y < size_.height; ++y) {
      const int* row = diff_.data() + static_cast<std::size_t>(y) * (size_.width + 1);
      int run = 0;
      for (int x = 0; x < size_.width; ++x) {
        run += row[x];
        if (run > 0) out.set(x, y);
      }
    }
    return out;
  }

 private:
  Size size_;
  std::vector<int> diff_;
};

namespace detail {

// Minimum-norm coefficients (c3, c2, c1, c0) of v(t) = c3 t^3 + c2 t^2 + c1 t
// + c0 interpolating three points with distinct t. Solves
// a = V^T (V V^T)^-1 v with V rows [t^3, t^2, t, 1].
inline std::array<double, 4> min_norm_cubic(const std::array<double, 3>& t,
                                            const std::array<double, 3>& v) {
  std::array<std::array<double, 4>, 3> rows{};
  for (int i = 0; i < 3; ++i) {
    rows[i] = {t[i] * t[i] * t[i], t[i] * t[i], t[i], 1.0};
  }
  // Gram matrix augmented with v; Gaussian elimination with partial pivoting.
  double g[3][4];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += rows[i][k] * rows[j][k];
      g[i][j] = acc;
    }
    g[i][3] = v[i];
  }
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(g[r][col]) > std::abs(g[pivot][col])) pivot = r;
    }
    if (pivot != col) {
      for (int k = 0; k < 4; ++k) std::swap(g[col][k], g[pivot][k]);
    }
    for (int r = col + 1; r < 3; ++r) {
      const double f = g[r][col] / g[col][col];
      for (int k = col; k < 4; ++k) g[r][k] -= f * g[col][k];
    }
  }
  double lambda[3];
  for (int i = 2; i >= 0; --i) {
    double acc = g[i][3];
    for (int k = i + 1; k < 3; ++k) acc -= g[i][k] * lambda[k];
    lambda[i] = acc / g[i][i];
  }
  std::array<double, 4> a{};
  for (int k = 0; k < 4; ++k) {
    for (int i = 0; i < 3; ++i) a[k] += rows[i][k] * lambda[i];
  }
  return a;
}

inline bool distinct3(double a, double b, double c) noexcept { return a != b && b != c && a != c; }

// Cap on stamps for a single curve; a cubic through three on-canvas points
// with normalized abscissa stays far below it.
inline constexpr int kMaxStampsPerCurve = 1 << 22;

}  // namespace detail

// Samples of the curve fitted through one triple, in drawing order. Exposed
// so tests can reason about the curve independently of the brush.
struct CurveSamples {
  std::vector<std::array<double, 2>> xy;
  bool fitted_cubic = false;  // false: polyline fallback
};

// Fits v = cubic(u) through the triple, where (u, v) = (x, y) unless two
// points share an x, in which case (u, v) = (y, x). The abscissa is mapped
// to t in [-1, 1] before solving so the minimum-norm solution does not depend
// on where the triple sits on the canvas. If both axes have repeats the
// triple is drawn as a polyline in sampled order.
inline CurveSamples fit_triple(const std::array<Point, 3>& pts) {
  CurveSamples out;
  std::array<double, 3> xs{double(pts[0].x), double(pts[1].x), double(pts[2].x)};
  std::array<double, 3> ys{double(pts[0].y), double(pts[1].y), double(pts[2].y)};
  bool swapped = false;
  if (!detail::distinct3(xs[0], xs[1], xs[2])) {
    if (!detail::distinct3(ys[0], ys[1], ys[2])) {
      for (int i = 0; i < 2; ++i) {
        const double len = std::hypot(xs[i + 1] - xs[i], ys[i + 1] - ys[i]);
        const int steps = std::max(1, static_cast<int>(std::ceil(len / kStampSpacing)));
        for (int k = (i == 0 ? 0 : 1); k <= steps; ++k) {
          const double s = static_cast<double>(k) / steps;
          out.xy.push_back({xs[i] + s * (xs[i + 1] - xs[i]), ys[i] + s * (ys[i + 1] - ys[i])});
        }
      }
      return out;
    }
    std::swap(xs, ys);
    swapped = true;
  }
  out.fitted_cubic = true;

  const double lo = std::min({xs[0], xs[1], xs[2]});
  const double hi = std::max({xs[0], xs[1], xs[2]});
  const double centre = 0.5 * (lo + hi);
  const double scale = 0.5 * (hi - lo);
  std::array<double, 3> t{};
  for (int i = 0; i < 3; ++i) t[i] = (xs[i] - centre) / scale;
  const auto c = detail::min_norm_cubic(t, ys);
  const auto value = [&](double tt) { return ((c[0] * tt + c[1]) * tt + c[2]) * tt + c[3]; };
  const auto slope = [&](double tt) { return (3.0 * c[0] * tt + 2.0 * c[1]) * tt + c[2]; };

  const auto emit = [&](double tt) {
    const double u = centre + scale * tt;
    const double v = value(tt);
    if (swapped) {
      out.xy.push_back({v, u});
    } else {
      out.xy.push_back({u, v});
    }
  };
  double tt = -1.0;
  for (int n = 0; tt < 1.0 && n < detail::kMaxStampsPerCurve; ++n) {
    emit(tt);
    // dv/du = slope(t) / scale. The first-order step can overshoot on curved
    // stretches, so it is shrunk until the chord is within the spacing.
    const double dvdu = slope(tt) / scale;
    double dt = kStampSpacing / std::sqrt(1.0 + dvdu * dvdu) / scale;
    while (dt > 1e-12) {
      const double next = std::min(tt + dt, 1.0);
      const double du = scale * (next - tt);
      const double dv = value(next) - value(tt);
      if (du * du + dv * dv <= kStampSpacing * kStampSpacing) break;
      dt *= 0.9;
    }
    tt += dt;
  }
  emit(1.0);
  return out;
}

// Draws a thick scribble through the points: each consecutive disjoint triple
// becomes a fitted curve, any 1-2 leftover points become single disks of the
// brush diameter.
inline ScribbleMask fit_scribble(const PointSet& points, double thickness, Size canvas) {
  if (!(thickness >= 1.0)) {
    throw ContractError("scribble thickness must be >= 1");
  }
  DiskCanvas brush(canvas);
  const double radius = 0.5 * thickness;
  const auto& p = points.points;
  std::size_t i = 0;
  for (; i + 3 <= p.size(); i += 3) {
    const CurveSamples curve = fit_triple({p[i], p[i + 1], p[i + 2]});
    for (const auto& s : curve.xy) brush.add_disk(s[0], s[1], radius);
  }
  for (; i < p.size(); ++i) brush.add_disk(p[i].x, p[i].y, radius);
  return brush.rasterize();
}

inline BinaryMask clip_scribble(const ScribbleMask& s, const BinaryMask& region_mask) {
  require_same_size(s.size(), region_mask.size(), "scribble", "region mask");
  BinaryMask out(s.size());
  for (std::size_t i = 0; i < s.pixel_count(); ++i) out.set(i, s.test(i) && region_mask.test(i));
  return out;
}

// G = 0.5 + 0.5*P_fg - 0.5*P_bg over disjoint scribble masks.
inline GuidanceMap compose_guidance(const BinaryMask& p_fg, const BinaryMask& p_bg) {
  require_same_size(p_fg.size(), p_bg.size(), "foreground scribbles", "background scribbles");
  std::vector<Label> labels(p_fg.pixel_count(), Label::Unknown);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (p_fg.test(i) && p_bg.test(i)) {
      throw ContractError("foreground and background scribbles overlap at flat index " +
                          std::to_string(i));
    }
    if (p_fg.test(i)) {
      labels[i] = Label::Foreground;
    } else if (p_bg.test(i)) {
      labels[i] = Label::Background;
    }
  }
  return GuidanceMap(p_fg.size(), std::move(labels));
}

struct ThicknessSchedule {
  double t_start = 800.0;
  double t_end = 40.0;
  std::int64_t decay_steps = 530'000;
  std::int64_t hold_steps = 70'000;

  void validate() const {
    if (!(t_end > 0.0) || !(t_start >= t_end)) {
      throw ContractError("thickness schedule needs t_start >= t_end > 0");
    }
    if (decay_steps <= 0 || hold_steps < 0) {
      throw ContractError("thickness schedule needs decay_steps > 0 and hold_steps >= 0");
    }
  }

  std::int64_t total_steps() const noexcept { return decay_steps + hold_steps; }
};

// Exponential decay t_start * (t_end/t_start)^(step/decay_steps), rounded
// half-up to whole pixels, then held at t_end.
inline int thickness_at(std::int64_t step, const ThicknessSchedule& sched) {
  sched.validate();
  if (step < 0) {
    throw ContractError("step must be non-negative");
  }
  if (step >= sched.decay_steps) {
    return static_cast<int>(std::floor(sched.t_end + 0.5));
  }
  const double progress = static_cast<double>(step) / static_cast<double>(sched.decay_steps);
  const double t = sched.t_start * std::pow(sched.t_end / sched.t_start, progress);
  return static_cast<int>(std::floor(t + 0.5));
}

inline GuidanceMap no_guidance(Size size) { return GuidanceMap(size, Label::Unknown); }

namespace detail {

inline BinaryMask stamp_points(const PointSet& pts, double diameter, Size canvas) {
  DiskCanvas brush(canvas);
  for (const Point& p : pts.points) brush.add_disk(p.x, p.y, 0.5 * diameter);
  return brush.rasterize();
}

}  // namespace detail

// Click guidance on a blank canvas. Pixels claimed by both a foreground and a
// background disk stay unknown.
inline GuidanceMap make_clickmap(const PointSet& fg_pts, const PointSet& bg_pts, double diameter,
                                 Size canvas) {
  if (!(diameter >= 1.0)) {
    throw ContractError("click diameter must be >= 1");
  }
  BinaryMask fg = detail::stamp_points(fg_pts, diameter, canvas);
  BinaryMask bg = detail::stamp_points(bg_pts, diameter, canvas);
  for (std::size_t i = 0; i < fg.pixel_count(); ++i) {
    if (fg.test(i) && bg.test(i)) {
      fg.set(i, false);
      bg.set(i, false);
    }
  }
  return compose_guidance(fg, bg);
}

// Click guidance clipped to the trimap's own foreground/background regions.
inline GuidanceMap make_clickmap(const PointSet& fg_pts, const PointSet& bg_pts, double diameter,
                                 const Trimap& regions) {
  if (!(diameter >= 1.0)) {
    throw ContractError("click diameter must be >= 1");
  }
  const RegionMasks m = masks(regions);
  return compose_guidance(
      clip_scribble(detail::stamp_points(fg_pts, diameter, regions.size()), m.fg),
      clip_scribble(detail::stamp_points(bg_pts, diameter, regions.size()), m.bg));
}

// Samples click points per region the same way scribble anchors are sampled,
// then draws clipped clicks.
inline GuidanceMap sample_clickmap(const Trimap& trimap, double diameter, Rng& rng) {
  const RegionMasks m = masks(trimap);
  const PointSet fg = sample_points(m.fg, kMaxPointsPerRegion, kMinPointDistance, rng,
                                    Region::Foreground);
  const PointSet bg = sample_points(m.bg, kMaxPointsPerRegion, kMinPointDistance, rng,
                                    Region::Background);
  return make_clickmap(fg, bg, diameter, trimap);
}

// One deformation at a fixed brush thickness. Foreground anchors are drawn
// from the rng before background anchors; sampling never depends on the
// thickness, so for a fixed seed thinner brushes give subsets of thicker ones.
inline GuidanceMap deform_at_thickness(const Trimap& trimap, double thickness, Rng& rng) {
  const RegionMasks m = masks(trimap);
  const PointSet fg = sample_points(m.fg, kMaxPointsPerRegion, kMinPointDistance, rng,
                                    Region::Foreground);
  const PointSet bg = sample_points(m.bg, kMaxPointsPerRegion, kMinPointDistance, rng,
                                    Region::Background);
  const BinaryMask p_fg = clip_scribble(fit_scribble(fg, thickness, trimap.size()), m.fg);
  const BinaryMask p_bg = clip_scribble(fit_scribble(bg, thickness, trimap.size()), m.bg);
  return compose_guidance(p_fg, p_bg);
}

inline GuidanceMap deform(const Trimap& trimap, std::int64_t step, const ThicknessSchedule& sched,
                          Rng& rng) {
  return deform_at_thickness(trimap, thickness_at(step, sched), rng);
}

}  // namespace matteforge
