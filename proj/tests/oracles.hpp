#pragma once

// Slow, direct reference implementations used to check the library. They
// share no code with it beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "matteforge/raster.hpp"
#include "matteforge/rng.hpp"
#include "matteforge/sfm.hpp"

namespace oracle {

using matteforge::AlphaMatte;
using matteforge::BinaryMask;
using matteforge::Label;
using matteforge::Size;
using matteforge::Trimap;

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Erosion by {(dx,dy): dx^2+dy^2 <= r^2}, reading out-of-range pixels from the
// nearest border pixel.
inline BinaryMask erode(const BinaryMask& in, int r) {
  BinaryMask out(in.size());
  const int w = in.width();
  const int h = in.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool all = true;
      for (int dy = -r; dy <= r && all; ++dy) {
        for (int dx = -r; dx <= r && all; ++dx) {
          if (dx * dx + dy * dy > r * r) continue;
          if (!in.test(clampi(x + dx, 0, w - 1), clampi(y + dy, 0, h - 1))) all = false;
        }
      }
      out.set(x, y, all);
    }
  }
  return out;
}

inline BinaryMask dilate(const BinaryMask& in, int r) {
  BinaryMask out(in.size());
  const int w = in.width();
  const int h = in.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool any = false;
      for (int dy = -r; dy <= r && !any; ++dy) {
        for (int dx = -r; dx <= r && !any; ++dx) {
          if (dx * dx + dy * dy > r * r) continue;
          if (in.test(clampi(x + dx, 0, w - 1), clampi(y + dy, 0, h - 1))) any = true;
        }
      }
      out.set(x, y, any);
    }
  }
  return out;
}

inline Trimap trimap(const AlphaMatte& a, int r_fg, int r_bg) {
  BinaryMask fg(a.size());
  BinaryMask bg(a.size());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      fg.set(x, y, a(x, y) >= 1.0 - 1.0 / 255.0);
      bg.set(x, y, a(x, y) <= 1.0 / 255.0);
    }
  }
  const BinaryMask efg = erode(fg, r_fg);
  const BinaryMask ebg = erode(bg, r_bg);
  Trimap t(a.size(), Label::Unknown);
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (efg.test(x, y)) {
        t(x, y) = Label::Foreground;
      } else if (ebg.test(x, y)) {
        t(x, y) = Label::Background;
      }
    }
  }
  return t;
}

// 1-D Gaussian and first-derivative taps at sigma, support chosen so the
// truncated Gaussian tail falls below 1% of the peak density.
struct Taps {
  int radius;
  std::vector<double> g;
  std::vector<double> dg;
};

inline Taps gaussian_taps(double sigma) {
  const double pi = 3.14159265358979323846;
  const double tail = std::sqrt(-2.0 * std::log(0.01 * sigma * std::sqrt(2.0 * pi)));
  const int r = std::max(1, static_cast<int>(std::ceil(sigma * tail)));
  Taps t{r, {}, {}};
  double s0 = 0.0;
  double s2 = 0.0;
  for (int k = -r; k <= r; ++k) {
    const double v = std::exp(-0.5 * k * k / (sigma * sigma));
    t.g.push_back(v);
    t.dg.push_back(k * v);
    s0 += v;
    s2 += k * k * v;
  }
  for (auto& v : t.g) v /= s0;
  for (auto& v : t.dg) v /= s2;
  return t;
}

// Gradient magnitude from dense 2-D correlation with the outer-product
// kernels dg(u) g(v) and g(u) dg(v), replicate borders.
inline std::vector<double> gradient_magnitude(const AlphaMatte& a, double sigma) {
  const Taps t = gaussian_taps(sigma);
  const int r = t.radius;
  const int w = a.width();
  const int h = a.height();
  std::vector<double> out(a.pixel_count());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double gx = 0.0;
      double gy = 0.0;
      for (int v = -r; v <= r; ++v) {
        for (int u = -r; u <= r; ++u) {
          const double p = a(clampi(x + u, 0, w - 1), clampi(y + v, 0, h - 1));
          gx += t.dg[static_cast<std::size_t>(u + r)] * t.g[static_cast<std::size_t>(v + r)] * p;
          gy += t.g[static_cast<std::size_t>(u + r)] * t.dg[static_cast<std::size_t>(v + r)] * p;
        }
      }
      out[static_cast<std::size_t>(y * w + x)] = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

inline double sad(const AlphaMatte& p, const AlphaMatte& g, const BinaryMask& m) {
  double s = 0.0;
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x)
      if (m.test(x, y)) s += std::fabs(p(x, y) - g(x, y));
  return s / 1000.0;
}

inline double mse(const AlphaMatte& p, const AlphaMatte& g, const BinaryMask& m) {
  double s = 0.0;
  int n = 0;
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x)
      if (m.test(x, y)) {
        s += (p(x, y) - g(x, y)) * (p(x, y) - g(x, y));
        ++n;
      }
  return s / n;
}

inline double grad(const AlphaMatte& p, const AlphaMatte& g, const BinaryMask& m, double sigma) {
  const auto mp = gradient_magnitude(p, sigma);
  const auto mg = gradient_magnitude(g, sigma);
  double s = 0.0;
  for (std::size_t i = 0; i < mp.size(); ++i)
    if (m.test(i)) s += (mp[i] - mg[i]) * (mp[i] - mg[i]);
  return s / 1000.0;
}

// Union-find labelling of 4-connected components; returns the mask of the
// largest one, ties to the component containing the earliest scan pixel.
inline std::vector<bool> largest_component(const std::vector<bool>& on, int w, int h) {
  const int n = w * h;
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int i) {
    while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)];
    return i;
  };
  const auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      if (!on[static_cast<std::size_t>(i)]) continue;
      if (x + 1 < w && on[static_cast<std::size_t>(i + 1)]) unite(i, i + 1);
      if (y + 1 < h && on[static_cast<std::size_t>(i + w)]) unite(i, i + w);
    }
  }
  std::vector<int> size(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i)
    if (on[static_cast<std::size_t>(i)]) ++size[static_cast<std::size_t>(find(i))];
  int best = -1;
  for (int i = 0; i < n; ++i) {
    // roots are the minimum index of their component, so scan order gives the tie rule
    if (size[static_cast<std::size_t>(i)] > (best < 0 ? 0 : size[static_cast<std::size_t>(best)])) best = i;
  }
  std::vector<bool> out(static_cast<std::size_t>(n), false);
  if (best < 0) return out;
  for (int i = 0; i < n; ++i)
    if (on[static_cast<std::size_t>(i)] && find(i) == best) out[static_cast<std::size_t>(i)] = true;
  return out;
}

inline double conn(const AlphaMatte& p, const AlphaMatte& g, const BinaryMask& m, double theta,
                   int levels) {
  const int w = p.width();
  const int h = p.height();
  const std::size_t n = p.pixel_count();
  std::vector<std::vector<bool>> omega;
  for (int k = 1; k <= levels; ++k) {
    const double th = static_cast<double>(k) / levels;
    std::vector<bool> on(n);
    for (std::size_t i = 0; i < n; ++i) on[i] = p[i] >= th && g[i] >= th;
    omega.push_back(largest_component(on, w, h));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!m.test(i)) continue;
    double l = 1.0;
    for (int k = 1; k <= levels; ++k) {
      if (!omega[static_cast<std::size_t>(k - 1)][i]) {
        l = static_cast<double>(k - 1) / levels;
        break;
      }
    }
    const double dp = p[i] - l;
    const double dg = g[i] - l;
    const double phip = dp >= theta ? 1.0 - dp : 1.0;
    const double phig = dg >= theta ? 1.0 - dg : 1.0;
    s += std::fabs(phip - phig);
  }
  return s / 1000.0;
}

// Loss by direct summation over the regions, gradient term from the dense
// magnitude oracle.
inline double loss(const AlphaMatte& p, const AlphaMatte& g, const BinaryMask& known,
                   const BinaryMask& trans, double sigma) {
  double l2 = 0.0, l1 = 0.0;
  int nk = 0, nt = 0;
  for (std::size_t i = 0; i < p.pixel_count(); ++i) {
    const double d = p[i] - g[i];
    if (known.test(i)) {
      l2 += d * d;
      ++nk;
    }
    if (trans.test(i)) {
      l1 += std::fabs(d);
      ++nt;
    }
  }
  const auto mp = gradient_magnitude(p, sigma);
  const auto mg = gradient_magnitude(g, sigma);
  double lg = 0.0;
  for (std::size_t i = 0; i < mp.size(); ++i) lg += std::fabs(mp[i] - mg[i]);
  return (nk ? l2 / nk : 0.0) + (nt ? l1 / nt : 0.0) + lg / static_cast<double>(p.pixel_count());
}

// Separable convolution written as one dense loop nest per output element:
// out[o,y,x] = relu(scale[o] * sum_c pw[o,c] sum_{ky,kx} dw[c,ky,kx] in[c, clamp(..), clamp(..)] + bias[o]).
inline matteforge::sfm::FeatureMap sep_conv(const matteforge::sfm::FeatureMap& in,
                                            const matteforge::sfm::SepConvWeights& wt, int dil,
                                            int stride) {
  const int oh = (in.height() + stride - 1) / stride;
  const int ow = (in.width() + stride - 1) / stride;
  matteforge::sfm::FeatureMap out(wt.out_channels, oh, ow);
  for (int o = 0; o < wt.out_channels; ++o) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int c = 0; c < wt.in_channels; ++c) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const int sy = clampi(y * stride + (ky - 1) * dil, 0, in.height() - 1);
              const int sx = clampi(x * stride + (kx - 1) * dil, 0, in.width() - 1);
              acc += wt.pointwise[static_cast<std::size_t>(o * wt.in_channels + c)] *
                     wt.depthwise[static_cast<std::size_t>(c * 9 + ky * 3 + kx)] * in.at(c, sy, sx);
            }
          }
        }
        const double v = wt.scale[static_cast<std::size_t>(o)] * acc + wt.bias[static_cast<std::size_t>(o)];
        out.at(o, y, x) = v > 0.0 ? v : 0.0;
      }
    }
  }
  return out;
}

inline double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

inline AlphaMatte random_alpha(Size s, matteforge::Rng& rng) {
  std::vector<double> v(s.area());
  for (auto& x : v) x = rng.uniform();
  return AlphaMatte(s, std::move(v));
}

inline BinaryMask random_mask(Size s, matteforge::Rng& rng, double p = 0.5) {
  BinaryMask m(s);
  for (std::size_t i = 0; i < s.area(); ++i) m.set(i, rng.uniform() < p);
  return m;
}

// Central finite difference of f at pixel i with step h.
template <typename F>
double central_difference(const AlphaMatte& a, std::size_t i, double h, F&& f) {
  std::vector<double> v(a.values().begin(), a.values().end());
  v[i] = a[i] + h;
  const double up = f(AlphaMatte(a.size(), v));
  v[i] = a[i] - h;
  const double down = f(AlphaMatte(a.size(), v));
  return (up - down) / (2.0 * h);
}

// A loss instance where every absolute value and the gradient-magnitude
// square root stay at least `margin` away from their kinks, so the loss is
// differentiable at pred and in a neighbourhood of it.
struct LossInstance {
  AlphaMatte pred, gt;
  BinaryMask known, transition;
};

inline LossInstance kink_free_instance(matteforge::Rng& rng, Size s, double margin, double sigma) {
  for (;;) {
    std::vector<double> p(s.area()), g(s.area());
    for (auto& x : p) x = rng.uniform(0.05, 0.95);
    for (auto& x : g) x = rng.uniform(0.0, 1.0);
    LossInstance in{AlphaMatte(s, p), AlphaMatte(s, g), BinaryMask(s), BinaryMask(s)};
    for (std::size_t i = 0; i < s.area(); ++i) {
      const bool t = rng.uniform() < 0.5;
      in.transition.set(i, t);
      in.known.set(i, !t);
    }
    const auto mp = gradient_magnitude(in.pred, sigma);
    const auto mg = gradient_magnitude(in.gt, sigma);
    bool ok = true;
    for (std::size_t i = 0; i < s.area() && ok; ++i) {
      if (std::fabs(p[i] - g[i]) < margin) ok = false;
      if (mp[i] < margin || std::fabs(mp[i] - mg[i]) < margin) ok = false;
    }
    if (ok) return in;
  }
}

}  // namespace oracle
