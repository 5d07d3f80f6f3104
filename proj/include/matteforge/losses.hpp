#pragma once

#include <cmath>

#include "matteforge/filters.hpp"
#include "matteforge/raster.hpp"
#include "matteforge/trimap.hpp"

namespace matteforge {

struct LossBreakdown {
  double l2_known = 0.0;       // mean squared error over K
  double l1_transition = 0.0;  // mean absolute error over T
  double grad_term = 0.0;      // mean |grad pred| - |grad gt| difference over the image
  double total = 0.0;
};

namespace detail {

inline void check_loss_inputs(const AlphaMatte& pred, const AlphaMatte& gt) {
  require_same_size(gt.size(), pred.size(), "ground truth", "prediction");
}

inline double sign_or_zero(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

// Mean over every pixel of | |grad pred| - |grad gt| |, gradients from the
// shared Gaussian-derivative kernel.
inline double grad_loss(const AlphaMatte& pred, const AlphaMatte& gt,
                        double sigma = kDefaultGradientSigma) {
  detail::check_loss_inputs(pred, gt);
  if (pred.pixel_count() == 0) return 0.0;
  const auto kernel = GaussianDerivativeKernel::make(sigma);
  const auto gp = gaussian_gradient(pred, kernel);
  const auto gg = gaussian_gradient(gt, kernel);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
    acc += std::abs(gp.magnitude[i] - gg.magnitude[i]);
  }
  return acc / static_cast<double>(pred.pixel_count());
}

// l2 over known pixels + l1 over transition pixels + gradient term, with no
// weights. An empty K or T contributes 0 for its term.
inline LossBreakdown matting_loss(const AlphaMatte& pred, const AlphaMatte& gt,
                                  const RegionPartition& part,
                                  double sigma = kDefaultGradientSigma) {
  detail::check_loss_inputs(pred, gt);
  require_same_size(gt.size(), part.known.size(), "ground truth", "known mask");
  require_same_size(gt.size(), part.transition.size(), "ground truth", "transition mask");
  double l2 = 0.0;
  double l1 = 0.0;
  std::size_t n_known = 0;
  std::size_t n_trans = 0;
  for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
    const double d = pred[i] - gt[i];
    if (part.known.test(i)) {
      l2 += d * d;
      ++n_known;
    }
    if (part.transition.test(i)) {
      l1 += std::abs(d);
      ++n_trans;
    }
  }
  if (n_known == 0 && n_trans == 0) {
    throw ContractError("matting loss needs a non-empty known or transition region");
  }
  LossBreakdown out;
  out.l2_known = n_known ? l2 / static_cast<double>(n_known) : 0.0;
  out.l1_transition = n_trans ? l1 / static_cast<double>(n_trans) : 0.0;
  out.grad_term = grad_loss(pred, gt, sigma);
  out.total = out.l2_known + out.l1_transition + out.grad_term;
  return out;
}

// d(total)/d(pred) per pixel. Every l1 kink (pred == gt on T, equal gradient
// magnitudes, zero predicted gradient) takes subgradient 0.
inline Grid<double> loss_gradient(const AlphaMatte& pred, const AlphaMatte& gt,
                                  const RegionPartition& part,
                                  double sigma = kDefaultGradientSigma) {
  detail::check_loss_inputs(pred, gt);
  require_same_size(gt.size(), part.known.size(), "ground truth", "known mask");
  require_same_size(gt.size(), part.transition.size(), "ground truth", "transition mask");
  const std::size_t n = pred.pixel_count();
  const std::size_t n_known = part.known.count();
  const std::size_t n_trans = part.transition.count();

  Grid<double> out(pred.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred[i] - gt[i];
    if (part.known.test(i) && n_known) out[i] += 2.0 * d / static_cast<double>(n_known);
    if (part.transition.test(i) && n_trans) {
      out[i] += detail::sign_or_zero(d) / static_cast<double>(n_trans);
    }
  }
  if (n == 0) return out;

  // Gradient term: chain rule through m = sqrt(gx^2 + gy^2), then the adjoint
  // of each separable correlation.
  const auto kernel = GaussianDerivativeKernel::make(sigma);
  const auto gp = gaussian_gradient(pred, kernel);
  const auto gg = gaussian_gradient(gt, kernel);
  Grid<double> wx(pred.size());
  Grid<double> wy(pred.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double m = gp.magnitude[i];
    if (m == 0.0) continue;
    const double s = detail::sign_or_zero(m - gg.magnitude[i]) / (static_cast<double>(n) * m);
    wx[i] = s * gp.dx[i];
    wy[i] = s * gp.dy[i];
  }
  const Grid<double> back_x = detail::correlate_rows_adjoint(
      detail::correlate_cols_adjoint(wx, kernel.smooth), kernel.deriv);
  const Grid<double> back_y = detail::correlate_rows_adjoint(
      detail::correlate_cols_adjoint(wy, kernel.deriv), kernel.smooth);
  for (std::size_t i = 0; i < n; ++i) out[i] += back_x[i] + back_y[i];
  return out;
}

}  // namespace matteforge
