#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "matteforge/raster.hpp"

namespace matteforge {

inline constexpr double kDefaultGradientSigma = 1.4;

// 1-D taps of a Gaussian and of its first derivative, sampled at integer
// offsets -radius..radius.
//
// Support follows the matting benchmark convention
//   radius = ceil(sigma * sqrt(-2 ln(sqrt(2 pi) sigma 0.01))),
// which gives radius 4 at sigma = 1.4. The smoothing taps are normalized to
// sum to 1; the derivative taps are normalized so that correlating them with
// the ramp f(x) = x returns exactly 1.
struct GaussianDerivativeKernel {
  double sigma = kDefaultGradientSigma;
  int radius = 0;
  std::vector<double> smooth;  // length 2*radius+1, index k+radius
  std::vector<double> deriv;

  static GaussianDerivativeKernel make(double sigma) {
    if (!(sigma > 0.0)) {
      throw ContractError("Gaussian sigma must be positive");
    }
    GaussianDerivativeKernel k;
    k.sigma = sigma;
    const double arg = -2.0 * std::log(std::sqrt(2.0 * std::numbers::pi) * sigma * 0.01);
    k.radius = arg > 0.0 ? static_cast<int>(std::ceil(sigma * std::sqrt(arg))) : 1;
    k.radius = std::max(k.radius, 1);
    const int n = 2 * k.radius + 1;
    k.smooth.resize(static_cast<std::size_t>(n));
    k.deriv.resize(static_cast<std::size_t>(n));
    double sum = 0.0;
    double moment = 0.0;
    for (int t = -k.radius; t <= k.radius; ++t) {
      const double g = std::exp(-(t * t) / (2.0 * sigma * sigma));
      k.smooth[static_cast<std::size_t>(t + k.radius)] = g;
      k.deriv[static_cast<std::size_t>(t + k.radius)] = t * g;
      sum += g;
      moment += t * t * g;
    }
    // After scaling, sum_t deriv[t] * t == 1.
    for (auto& v : k.smooth) v /= sum;
    for (auto& v : k.deriv) v /= moment;
    return k;
  }

  double smooth_at(int t) const { return smooth[static_cast<std::size_t>(t + radius)]; }
  double deriv_at(int t) const { return deriv[static_cast<std::size_t>(t + radius)]; }
};

namespace detail {

// out(x,y) = sum_t taps[t] * in(clamp(x+t), y)
//
// Taps are accumulated in +t/-t pairs so that antisymmetric kernels give an
// exact zero on constant input.
inline Grid<double> correlate_rows(const Grid<double>& in, const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size() / 2);
  const auto tap = [&](int t) { return taps[static_cast<std::size_t>(t + r)]; };
  Grid<double> out(in.size());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      double acc = tap(0) * in(x, y);
      for (int t = 1; t <= r; ++t) {
        acc += tap(t) * in.clamped(x + t, y) + tap(-t) * in.clamped(x - t, y);
      }
      out(x, y) = acc;
    }
  }
  return out;
}

inline Grid<double> correlate_cols(const Grid<double>& in, const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size() / 2);
  const auto tap = [&](int t) { return taps[static_cast<std::size_t>(t + r)]; };
  Grid<double> out(in.size());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      double acc = tap(0) * in(x, y);
      for (int t = 1; t <= r; ++t) {
        acc += tap(t) * in.clamped(x, y + t) + tap(-t) * in.clamped(x, y - t);
      }
      out(x, y) = acc;
    }
  }
  return out;
}

// Adjoints of the replicate-border correlations above: each input sample is
// scattered back to every clamped tap position it was read from.
inline Grid<double> correlate_rows_adjoint(const Grid<double>& in, const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size() / 2);
  const int w = in.width();
  Grid<double> out(in.size());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = in(x, y);
      for (int t = -r; t <= r; ++t) {
        out(std::clamp(x + t, 0, w - 1), y) += taps[static_cast<std::size_t>(t + r)] * v;
      }
    }
  }
  return out;
}

inline Grid<double> correlate_cols_adjoint(const Grid<double>& in, const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size() / 2);
  const int h = in.height();
  Grid<double> out(in.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < in.width(); ++x) {
      const double v = in(x, y);
      for (int t = -r; t <= r; ++t) {
        out(x, std::clamp(y + t, 0, h - 1)) += taps[static_cast<std::size_t>(t + r)] * v;
      }
    }
  }
  return out;
}

}  // namespace detail

struct GradientField {
  Grid<double> dx;
  Grid<double> dy;
  Grid<double> magnitude;
};

// Gaussian-derivative gradient with replicate borders:
//   dx = deriv along x, smooth along y
//   dy = smooth along x, deriv along y
inline GradientField gaussian_gradient(const Grid<double>& image, const GaussianDerivativeKernel& k) {
  GradientField g;
  g.dx = detail::correlate_cols(detail::correlate_rows(image, k.deriv), k.smooth);
  g.dy = detail::correlate_cols(detail::correlate_rows(image, k.smooth), k.deriv);
  g.magnitude = Grid<double>(image.size());
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    g.magnitude[i] = std::sqrt(g.dx[i] * g.dx[i] + g.dy[i] * g.dy[i]);
  }
  return g;
}

inline GradientField gaussian_gradient(const AlphaMatte& alpha, const GaussianDerivativeKernel& k) {
  return gaussian_gradient(alpha.grid(), k);
}

// Normalized Gaussian blur with replicate borders (support 3 sigma).
inline Grid<double> gaussian_blur(const Grid<double>& image, double sigma) {
  if (!(sigma > 0.0)) return image;
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> taps(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int t = -r; t <= r; ++t) {
    taps[static_cast<std::size_t>(t + r)] = std::exp(-(t * t) / (2.0 * sigma * sigma));
    sum += taps[static_cast<std::size_t>(t + r)];
  }
  for (auto& v : taps) v /= sum;
  return detail::correlate_cols(detail::correlate_rows(image, taps), taps);
}

}  // namespace matteforge
