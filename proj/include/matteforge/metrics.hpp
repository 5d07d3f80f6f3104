#pragma once

// The four standard matting error measures, evaluated over the unknown band
// of an evaluation trimap. SAD, Grad and Conn are reported in thousands;
// MSE is the plain mean over the band.

#include <cmath>
#include <cstdio>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "matteforge/filters.hpp"
#include "matteforge/raster.hpp"
#include "matteforge/trimap.hpp"

namespace matteforge {

struct MetricParams {
  double sigma = kDefaultGradientSigma;  // Gaussian-derivative scale for Grad
  double theta = 0.15;                   // Conn: degradation below theta is ignored
  int levels = 10;                       // Conn: thresholds k/levels, k = 1..levels
};

struct MetricReport {
  double sad = 0.0;
  double mse = 0.0;
  double grad = 0.0;
  double conn = 0.0;
  std::size_t pixels_T = 0;
  bool empty_region = false;
};

namespace detail {

inline void check_metric_inputs(const AlphaMatte& pred, const AlphaMatte& gt, const BinaryMask& region) {
  require_same_size(gt.size(), pred.size(), "ground truth", "prediction");
  require_same_size(gt.size(), region.size(), "ground truth", "region");
}

}  // namespace detail

inline double sad(const AlphaMatte& pred, const AlphaMatte& gt, const BinaryMask& region) {
  detail::check_metric_inputs(pred, gt, region);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
    if (region.test(i)) acc += std::abs(pred[i] - gt[i]);
  }
  return acc / 1000.0;
}

inline double mse(const AlphaMatte& pred, const AlphaMatte& gt, const BinaryMask& region) {
  detail::check_metric_inputs(pred, gt, region);
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
    if (region.test(i)) {
      const double d = pred[i] - gt[i];
      acc += d * d;
      ++n;
    }
  }
  if (n == 0) {
    throw UndefinedMetricError("MSE is undefined over an empty region");
  }
  return acc / static_cast<double>(n);
}

// Squared difference of Gaussian-derivative gradient magnitudes over the
// region. Gradients are taken over the whole image (replicate borders).
inline double grad_metric(const AlphaMatte& pred, const AlphaMatte& gt, const BinaryMask& region,
                          double sigma = kDefaultGradientSigma) {
  detail::check_metric_inputs(pred, gt, region);
  const auto kernel = GaussianDerivativeKernel::make(sigma);
  const auto gp = gaussian_gradient(pred, kernel);
  const auto gg = gaussian_gradient(gt, kernel);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
    if (region.test(i)) {
      const double d = gp.magnitude[i] - gg.magnitude[i];
      acc += d * d;
    }
  }
  return acc / 1000.0;
}

namespace detail {

// Largest 4-connected component of `on`. Ties go to the component holding
// the earliest pixel in row-major order.
inline BinaryMask largest_component(const BinaryMask& on) {
  const int w = on.width();
  const int h = on.height();
  std::vector<int> label(on.pixel_count(), -1);
  std::vector<std::size_t> sizes;
  std::deque<std::size_t> queue;
  for (std::size_t seed = 0; seed < on.pixel_count(); ++seed) {
    if (!on.test(seed) || label[seed] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    std::size_t count = 0;
    label[seed] = id;
    queue.push_back(seed);
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      ++count;
      const int x = static_cast<int>(i % static_cast<std::size_t>(w));
      const int y = static_cast<int>(i / static_cast<std::size_t>(w));
      const auto visit = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
        const std::size_t j = static_cast<std::size_t>(ny) * static_cast<std::size_t>(w) +
                              static_cast<std::size_t>(nx);
        if (on.test(j) && label[j] < 0) {
          label[j] = id;
          queue.push_back(j);
        }
      };
      visit(x - 1, y);
      visit(x + 1, y);
      visit(x, y - 1);
      visit(x, y + 1);
    }
    sizes.push_back(count);
  }
  BinaryMask out(on.size());
  if (sizes.empty()) return out;
  int best = 0;
  for (int i = 1; i < static_cast<int>(sizes.size()); ++i) {
    if (sizes[static_cast<std::size_t>(i)] > sizes[static_cast<std::size_t>(best)]) best = i;
  }
  for (std::size_t i = 0; i < label.size(); ++i) out.set(i, label[i] == best);
  return out;
}

}  // namespace detail

// Per-pixel connectivity level shared by both mattes: the largest threshold
// l at which the pixel still belongs to the dominant component of
// (pred >= l) & (gt >= l). Pixels never dropped get 1.
inline Grid<double> connectivity_levels(const AlphaMatte& pred, const AlphaMatte& gt, int levels) {
  require_same_size(gt.size(), pred.size(), "ground truth", "prediction");
  if (levels < 1) {
    throw ContractError("connectivity needs at least one level");
  }
  Grid<double> level(pred.size(), -1.0);
  for (int k = 1; k <= levels; ++k) {
    const double th = static_cast<double>(k) / levels;
    BinaryMask joint(pred.size());
    for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
      joint.set(i, pred[i] >= th && gt[i] >= th);
    }
    const BinaryMask omega = detail::largest_component(joint);
    const double previous = static_cast<double>(k - 1) / levels;
    for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
      if (level[i] < 0.0 && !omega.test(i)) level[i] = previous;
    }
  }
  for (std::size_t i = 0; i < level.pixel_count(); ++i) {
    if (level[i] < 0.0) level[i] = 1.0;
  }
  return level;
}

inline double conn_metric(const AlphaMatte& pred, const AlphaMatte& gt, const BinaryMask& region,
                          double theta = 0.15, int levels = 10) {
  detail::check_metric_inputs(pred, gt, region);
  const Grid<double> level = connectivity_levels(pred, gt, levels);
  const auto phi = [&](double alpha, double l) {
    const double d = alpha - l;
    return d >= theta ? 1.0 - d : 1.0;
  };
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
    if (region.test(i)) acc += std::abs(phi(pred[i], level[i]) - phi(gt[i], level[i]));
  }
  return acc / 1000.0;
}

// All four metrics over the eval trimap's unknown band. An empty band makes
// MSE undefined, which is raised rather than masked.
inline MetricReport evaluate(const AlphaMatte& pred, const AlphaMatte& gt, const Trimap& eval_trimap,
                             const MetricParams& params = {}) {
  require_same_size(gt.size(), eval_trimap.size(), "ground truth", "trimap");
  const BinaryMask region = partition(eval_trimap).transition;
  MetricReport r;
  r.pixels_T = region.count();
  r.empty_region = r.pixels_T == 0;
  r.sad = sad(pred, gt, region);
  r.mse = mse(pred, gt, region);
  r.grad = grad_metric(pred, gt, region, params.sigma);
  r.conn = conn_metric(pred, gt, region, params.theta, params.levels);
  return r;
}

// ---------------------------------------------------------------------------
// Report serialization: one row per image, columns id,sad,mse,grad,conn,pixels_T.
// Rows that failed carry an error message and empty metric fields.

struct MetricRow {
  std::string id;
  std::optional<MetricReport> report;
  std::string error;
};

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "id,sad,mse,grad,conn,pixels_T\n";
  for (const auto& row : rows) {
    out += row.id;
    if (row.report) {
      const MetricReport& r = *row.report;
      out += "," + format_real(r.sad) + "," + format_real(r.mse) + "," + format_real(r.grad) +
             "," + format_real(r.conn) + "," + std::to_string(r.pixels_T);
    } else {
      out += ",,,,,";
    }
    out += "\n";
  }
  return out;
}

inline nlohmann::ordered_json metrics_json(const MetricRow& row) {
  nlohmann::ordered_json j;
  j["image_id"] = row.id;
  if (row.report) {
    const MetricReport& r = *row.report;
    j["sad"] = r.sad;
    j["mse"] = r.mse;
    j["grad"] = r.grad;
    j["conn"] = r.conn;
    j["pixels_T"] = r.pixels_T;
  } else {
    j["error"] = row.error;
  }
  return j;
}

inline nlohmann::ordered_json metrics_json(const std::vector<MetricRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& row : rows) arr.push_back(metrics_json(row));
  return arr;
}

}  // namespace matteforge
