#pragma once

// Desk-scale dataset and benchmark harness.
//
// On-disk layout under a root directory:
//   image/<id>.png     composited RGB input
//   alpha/<id>.png     ground-truth matte
//   trimap/<id>.png    evaluation trimap
//   guidance/<id>.png  guidance test set (one kind per root)
//   pred/<id>.png      predictions
//   manifest.json      {kind, seed, entries: [{id, guidance}]}
//
// Every per-scene random draw is seeded from (global seed, scene id), so
// output bytes never depend on ordering or on the worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "matteforge/filters.hpp"
#include "matteforge/guidance.hpp"
#include "matteforge/metrics.hpp"
#include "matteforge/parallel.hpp"
#include "matteforge/png_io.hpp"
#include "matteforge/raster.hpp"
#include "matteforge/rng.hpp"
#include "matteforge/trimap.hpp"

namespace matteforge::harness {

namespace fs = std::filesystem;

struct Scene {
  std::string id;
  ImageRGB fg;  // empty when loaded from disk
  ImageRGB bg;  // empty when loaded from disk
  ImageRGB image;
  AlphaMatte alpha;
  Trimap trimap;  // evaluation trimap
};

enum class GuidanceKind { Trimap, Scribblemap, Clickmap, NoGuidance };

inline std::string to_string(GuidanceKind k) {
  switch (k) {
    case GuidanceKind::Trimap: return "trimap";
    case GuidanceKind::Scribblemap: return "scribblemap";
    case GuidanceKind::Clickmap: return "clickmap";
    case GuidanceKind::NoGuidance: return "no_guidance";
  }
  return "?";
}

inline std::optional<GuidanceKind> parse_kind(std::string_view s) {
  for (auto k : {GuidanceKind::Trimap, GuidanceKind::Scribblemap, GuidanceKind::Clickmap,
                 GuidanceKind::NoGuidance}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Scene synthesis

inline constexpr int kMinSceneSize = 64;
// Evaluation trimap radii are drawn from [5, 30] px at 512 px and scaled.
inline constexpr int kTrimapRadiusMin = 5;
inline constexpr int kTrimapRadiusMax = 30;
inline constexpr int kReferenceSize = 512;

namespace detail {

inline double quantize(double v) { return from_byte(to_byte(v)); }

inline Rgb random_color(Rng& rng) {
  return Rgb{quantize(rng.uniform()), quantize(rng.uniform()), quantize(rng.uniform())};
}

inline Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  return Rgb{a.r + t * (b.r - a.r), a.g + t * (b.g - a.g), a.b + t * (b.b - a.b)};
}

// Bilinear blend of four corner colours, optionally modulated by a checker
// pattern. Polynomial arithmetic only, then quantized to the 8-bit grid.
inline ImageRGB procedural_layer(int size, Rng& rng, bool checker) {
  const Rgb c00 = random_color(rng), c10 = random_color(rng);
  const Rgb c01 = random_color(rng), c11 = random_color(rng);
  const int cell = rng.uniform_int(4, std::max(5, size / 4));
  const double contrast = checker ? rng.uniform(0.1, 0.4) : 0.0;
  std::vector<Rgb> px(static_cast<std::size_t>(size) * static_cast<std::size_t>(size));
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = static_cast<double>(x) / (size - 1);
      const double v = static_cast<double>(y) / (size - 1);
      Rgb c = lerp(lerp(c00, c10, u), lerp(c01, c11, u), v);
      if (((x / cell) + (y / cell)) % 2 == 1) {
        c = lerp(c, Rgb{1.0 - c.r, 1.0 - c.g, 1.0 - c.b}, contrast);
      }
      px[static_cast<std::size_t>(y) * size + x] =
          Rgb{quantize(c.r), quantize(c.g), quantize(c.b)};
    }
  }
  return ImageRGB({size, size}, std::move(px));
}

struct Polygon {
  std::vector<std::array<double, 2>> v;

  // Even-odd crossing rule.
  bool contains(double x, double y) const {
    bool in = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
      const auto& a = v[i];
      const auto& b = v[j];
      if ((a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0]) {
        in = !in;
      }
    }
    return in;
  }
};

// Binomial taps C(2r, k) / 4^r: a discrete Gaussian whose weights are dyadic,
// so flat regions stay exactly 0 or 1 after blurring.
inline std::vector<double> binomial_taps(int radius) {
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1), 1.0);
  for (int k = 1; k <= 2 * radius; ++k) {
    taps[static_cast<std::size_t>(k)] = taps[static_cast<std::size_t>(k - 1)] * (2 * radius - k + 1) / k;
  }
  const double norm = std::ldexp(1.0, 2 * radius);
  for (auto& t : taps) t /= norm;
  return taps;
}

inline AlphaMatte synth_alpha(int size, Rng& rng) {
  const double lo = size * 0.3;
  const double hi = size * 0.7;
  struct Disk {
    double cx, cy, r;
  };
  std::vector<Disk> disks;
  const int n_disks = rng.uniform_int(1, 3);
  for (int i = 0; i < n_disks; ++i) {
    disks.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(size * 0.1, size * 0.2)});
  }
  // Kite-shaped quadrilateral around a random centre.
  const double cx = rng.uniform(lo, hi);
  const double cy = rng.uniform(lo, hi);
  const double reach = size * 0.2;
  Polygon quad;
  quad.v = {{cx + rng.uniform(-0.2, 0.2) * reach, cy - rng.uniform(0.5, 1.0) * reach},
            {cx + rng.uniform(0.5, 1.0) * reach, cy + rng.uniform(-0.2, 0.2) * reach},
            {cx + rng.uniform(-0.2, 0.2) * reach, cy + rng.uniform(0.5, 1.0) * reach},
            {cx - rng.uniform(0.5, 1.0) * reach, cy + rng.uniform(-0.2, 0.2) * reach}};

  Grid<double> shape({size, size}, 0.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      bool on = quad.contains(x, y);
      for (const Disk& d : disks) {
        on = on || (x - d.cx) * (x - d.cx) + (y - d.cy) * (y - d.cy) <= d.r * d.r;
      }
      shape(x, y) = on ? 1.0 : 0.0;
    }
  }
  const int blur = rng.uniform_int(1, std::max(1, std::min(8, size / 16)));
  const auto taps = binomial_taps(blur);
  const Grid<double> soft =
      ::matteforge::detail::correlate_cols(::matteforge::detail::correlate_rows(shape, taps), taps);
  std::vector<double> values(soft.pixel_count());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = quantize(soft[i]);
  return AlphaMatte({size, size}, std::move(values));
}

inline bool has_pure_regions(const AlphaMatte& a) {
  bool fg = false;
  bool bg = false;
  for (double v : a.values()) {
    fg = fg || v >= 1.0 - kPureAlphaEpsilon;
    bg = bg || v <= kPureAlphaEpsilon;
  }
  return fg && bg;
}

inline int scaled_radius(int radius_at_reference, int size) {
  const double r = static_cast<double>(radius_at_reference) * size / kReferenceSize;
  return std::max(1, static_cast<int>(std::floor(r + 0.5)));
}

}  // namespace detail

inline std::string scene_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04zu", index);
  return buf;
}

// One scene from its own seed: procedural fg/bg, a blurred union of disks and
// a quadrilateral as alpha, the composite image, and a seeded evaluation
// trimap.
inline Scene synth_scene(const std::string& id, int size, std::uint64_t seed) {
  Rng rng(seed);
  Scene s;
  s.id = id;
  s.fg = detail::procedural_layer(size, rng, false);
  s.bg = detail::procedural_layer(size, rng, true);
  s.alpha = detail::synth_alpha(size, rng);
  for (int attempt = 0; !detail::has_pure_regions(s.alpha); ++attempt) {
    if (attempt == 64) throw DataError("could not synthesize a matte with pure regions for " + id);
    s.alpha = detail::synth_alpha(size, rng);
  }
  s.image = composite(s.fg, s.bg, s.alpha);
  const int r_fg = detail::scaled_radius(rng.uniform_int(kTrimapRadiusMin, kTrimapRadiusMax), size);
  const int r_bg = detail::scaled_radius(rng.uniform_int(kTrimapRadiusMin, kTrimapRadiusMax), size);
  s.trimap = make_trimap(s.alpha, r_fg, r_bg);
  return s;
}

inline std::vector<Scene> synth_scenes(int n, int size, Rng& rng, unsigned jobs = 1) {
  if (n < 1) throw ContractError("synth_scenes needs n >= 1");
  if (size < kMinSceneSize) {
    throw ContractError("scene size must be at least " + std::to_string(kMinSceneSize));
  }
  const std::uint64_t base = rng.next_u64();
  std::vector<Scene> scenes(static_cast<std::size_t>(n));
  parallel_for(scenes.size(), jobs, [&](std::size_t i) {
    const std::string id = scene_id(i);
    scenes[i] = synth_scene(id, size, derive_seed(base, id));
  });
  return scenes;
}

// ---------------------------------------------------------------------------
// Guidance test sets

struct TestsetParams {
  double scribble_thickness = 40.0;  // final thickness of the training schedule
  double click_diameter = kClickDiameter;
};

struct ManifestEntry {
  std::string id;
  std::string guidance;  // path relative to the test-set root
};

struct TestSetManifest {
  GuidanceKind kind = GuidanceKind::Trimap;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;
};

struct TestSet {
  TestSetManifest manifest;
  std::vector<GuidanceMap> maps;  // parallel to manifest.entries
};

inline GuidanceMap make_guidance(const Scene& scene, GuidanceKind kind, const TestsetParams& params,
                                 std::uint64_t seed) {
  Rng rng(derive_seed(seed, scene.id));
  switch (kind) {
    case GuidanceKind::Trimap: return scene.trimap;
    case GuidanceKind::Scribblemap:
      return deform_at_thickness(scene.trimap, params.scribble_thickness, rng);
    case GuidanceKind::Clickmap: return sample_clickmap(scene.trimap, params.click_diameter, rng);
    case GuidanceKind::NoGuidance: return no_guidance(scene.trimap.size());
  }
  throw ContractError("unknown guidance kind");
}

inline TestSet build_testset(const std::vector<Scene>& scenes, GuidanceKind kind,
                             const TestsetParams& params, std::uint64_t seed, unsigned jobs = 1) {
  TestSet ts;
  ts.manifest.kind = kind;
  ts.manifest.seed = seed;
  ts.maps.resize(scenes.size());
  std::set<std::string> seen;
  for (const Scene& s : scenes) {
    if (!seen.insert(s.id).second) throw DataError("duplicate scene id " + s.id);
    ts.manifest.entries.push_back({s.id, "guidance/" + s.id + ".png"});
  }
  parallel_for(scenes.size(), jobs,
               [&](std::size_t i) { ts.maps[i] = make_guidance(scenes[i], kind, params, seed); });
  return ts;
}

inline nlohmann::ordered_json manifest_json(const TestSetManifest& m) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(m.kind);
  j["seed"] = m.seed;
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : m.entries) j["entries"].push_back({{"id", e.id}, {"guidance", e.guidance}});
  return j;
}

inline TestSetManifest parse_manifest(const nlohmann::json& j) {
  TestSetManifest m;
  const auto kind = parse_kind(j.at("kind").get<std::string>());
  if (!kind) throw FormatError("manifest has unknown kind");
  m.kind = *kind;
  m.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& e : j.at("entries")) {
    m.entries.push_back({e.at("id").get<std::string>(), e.at("guidance").get<std::string>()});
  }
  return m;
}

// ---------------------------------------------------------------------------
// Disk I/O

// Encodes everything first, then writes; an encoding failure leaves the
// directory untouched.
inline void write_scenes(const fs::path& root, const std::vector<Scene>& scenes, unsigned jobs = 1) {
  struct Encoded {
    Bytes image, alpha, trimap;
  };
  std::vector<Encoded> enc(scenes.size());
  parallel_for(scenes.size(), jobs, [&](std::size_t i) {
    enc[i] = {encode_rgb(scenes[i].image), encode_map(scenes[i].alpha), encode_map(scenes[i].trimap)};
  });
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    write_file_atomic(root / "image" / (scenes[i].id + ".png"), enc[i].image);
    write_file_atomic(root / "alpha" / (scenes[i].id + ".png"), enc[i].alpha);
    write_file_atomic(root / "trimap" / (scenes[i].id + ".png"), enc[i].trimap);
  }
}

inline void write_testset(const fs::path& root, const TestSet& ts, unsigned jobs = 1) {
  std::vector<Bytes> enc(ts.maps.size());
  parallel_for(ts.maps.size(), jobs, [&](std::size_t i) { enc[i] = encode_map(ts.maps[i]); });
  for (std::size_t i = 0; i < enc.size(); ++i) {
    write_file_atomic(root / ts.manifest.entries[i].guidance, enc[i]);
  }
  write_file_atomic(root / "manifest.json", manifest_json(ts.manifest).dump(2) + "\n");
}

inline std::vector<std::string> list_ids(const fs::path& dir) {
  std::vector<std::string> ids;
  if (!fs::is_directory(dir)) return ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Loads image (if present), alpha and trimap for every id in alpha/.
inline std::vector<Scene> load_scenes(const fs::path& root, unsigned jobs = 1) {
  const auto ids = list_ids(root / "alpha");
  if (ids.empty()) throw DataError("no alpha mattes under " + (root / "alpha").string());
  std::vector<Scene> scenes(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) {
    Scene& s = scenes[i];
    s.id = ids[i];
    s.alpha = load_alpha(root / "alpha" / (s.id + ".png"));
    s.trimap = load_trimap(root / "trimap" / (s.id + ".png"));
    const fs::path image = root / "image" / (s.id + ".png");
    if (fs::exists(image)) s.image = load_rgb(image);
    require_same_size(s.alpha.size(), s.trimap.size(), "alpha", "trimap");
  });
  return scenes;
}

// ---------------------------------------------------------------------------
// Evaluation

struct MetricMeans {
  double sad = 0.0;
  double mse = 0.0;
  double grad = 0.0;
  double conn = 0.0;
};

struct EvalReport {
  std::vector<MetricRow> rows;  // one per matched id, sorted by id
  MetricMeans mean;
  std::size_t evaluated = 0;
  std::vector<std::string> missing;  // ground truth without prediction
  std::vector<std::string> extra;    // prediction without ground truth

  bool partial() const {
    return !missing.empty() || !extra.empty() || evaluated != rows.size();
  }
};

inline MetricMeans mean_of(const std::vector<MetricRow>& rows, std::size_t& count) {
  MetricMeans m;
  count = 0;
  for (const auto& row : rows) {
    if (!row.report) continue;
    m.sad += row.report->sad;
    m.mse += row.report->mse;
    m.grad += row.report->grad;
    m.conn += row.report->conn;
    ++count;
  }
  if (count > 0) {
    const double n = static_cast<double>(count);
    m.sad /= n;
    m.mse /= n;
    m.grad /= n;
    m.conn /= n;
  }
  return m;
}

// Unreadable or inconsistent files become per-image error rows; a run with
// no ids common to pred_dir and gt_dir is a DataError.
inline EvalReport run_eval(const fs::path& pred_dir, const fs::path& gt_dir,
                           const fs::path& trimap_dir, const MetricParams& params = {},
                           unsigned jobs = 1) {
  const auto gt_ids = list_ids(gt_dir);
  const auto pred_ids = list_ids(pred_dir);
  EvalReport report;
  std::vector<std::string> matched;
  std::set_intersection(gt_ids.begin(), gt_ids.end(), pred_ids.begin(), pred_ids.end(),
                        std::back_inserter(matched));
  std::set_difference(gt_ids.begin(), gt_ids.end(), pred_ids.begin(), pred_ids.end(),
                      std::back_inserter(report.missing));
  std::set_difference(pred_ids.begin(), pred_ids.end(), gt_ids.begin(), gt_ids.end(),
                      std::back_inserter(report.extra));
  if (matched.empty()) {
    throw DataError("no prediction in " + pred_dir.string() + " matches a ground truth in " +
                    gt_dir.string());
  }
  report.rows.resize(matched.size());
  parallel_for(matched.size(), jobs, [&](std::size_t i) {
    MetricRow& row = report.rows[i];
    row.id = matched[i];
    try {
      const AlphaMatte pred = load_alpha(pred_dir / (row.id + ".png"));
      const AlphaMatte gt = load_alpha(gt_dir / (row.id + ".png"));
      const Trimap tri = load_trimap(trimap_dir / (row.id + ".png"));
      require_same_size(gt.size(), pred.size(), "ground truth", "prediction");
      row.report = evaluate(pred, gt, tri, params);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  report.mean = mean_of(report.rows, report.evaluated);
  return report;
}

inline std::string eval_csv(const EvalReport& r) {
  std::string out = metrics_csv(r.rows);
  out += "mean," + format_real(r.mean.sad) + "," + format_real(r.mean.mse) + "," +
         format_real(r.mean.grad) + "," + format_real(r.mean.conn) + ",\n";
  return out;
}

inline nlohmann::ordered_json means_json(const MetricMeans& m) {
  return {{"sad", m.sad}, {"mse", m.mse}, {"grad", m.grad}, {"conn", m.conn}};
}

inline nlohmann::ordered_json eval_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["rows"] = metrics_json(r.rows);
  j["mean"] = means_json(r.mean);
  j["evaluated"] = r.evaluated;
  j["errors"] = r.rows.size() - r.evaluated;
  j["missing"] = r.missing;
  j["extra"] = r.extra;
  return j;
}

// ---------------------------------------------------------------------------
// Stability across guidance variants

using Predictor = std::function<AlphaMatte(const Scene&, const GuidanceMap&)>;

inline Predictor ground_truth_predictor() {
  return [](const Scene& s, const GuidanceMap&) { return s.alpha; };
}

// Blurs the ground truth, pins pixels the guidance labels to 0/1, then blurs
// once more so the hints bleed into nearby unknown pixels. Output therefore
// depends on the guidance variant, unlike a plain blur of the ground truth.
inline Predictor blur_oracle_predictor(double sigma = 2.0) {
  return [sigma](const Scene& s, const GuidanceMap& g) {
    require_same_size(s.alpha.size(), g.size(), "alpha", "guidance");
    Grid<double> soft = gaussian_blur(s.alpha.grid(), sigma);
    for (std::size_t i = 0; i < soft.pixel_count(); ++i) {
      if (g[i] == Label::Foreground) soft[i] = 1.0;
      if (g[i] == Label::Background) soft[i] = 0.0;
    }
    soft = gaussian_blur(soft, sigma);
    std::vector<double> v(soft.pixel_count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(soft[i], 0.0, 1.0);
    return AlphaMatte(s.alpha.size(), std::move(v));
  };
}

struct StabilityReport {
  GuidanceKind kind = GuidanceKind::Scribblemap;
  std::vector<std::uint64_t> seeds;
  std::vector<MetricMeans> variants;
  MetricMeans mean;
  MetricMeans stddev;  // population standard deviation across variants
};

inline MetricMeans evaluate_variant(const std::vector<Scene>& scenes, const TestSet& ts,
                                    const Predictor& predictor, const MetricParams& params,
                                    unsigned jobs) {
  std::vector<MetricRow> rows(scenes.size());
  parallel_for(scenes.size(), jobs, [&](std::size_t i) {
    rows[i].id = scenes[i].id;
    rows[i].report = evaluate(predictor(scenes[i], ts.maps[i]), scenes[i].alpha, scenes[i].trimap, params);
  });
  std::size_t n = 0;
  return mean_of(rows, n);
}

// Builds one test set per seed, evaluates the predictor on each and reports
// the per-metric mean and population standard deviation across variants.
inline StabilityReport stability_report(const std::vector<Scene>& scenes, GuidanceKind kind,
                                        const std::vector<std::uint64_t>& seeds,
                                        const Predictor& predictor,
                                        const TestsetParams& tparams = {},
                                        const MetricParams& mparams = {}, unsigned jobs = 1) {
  if (seeds.size() < 2) throw ContractError("stability needs at least two variants");
  StabilityReport r;
  r.kind = kind;
  r.seeds = seeds;
  for (std::uint64_t seed : seeds) {
    const TestSet ts = build_testset(scenes, kind, tparams, seed, jobs);
    r.variants.push_back(evaluate_variant(scenes, ts, predictor, mparams, jobs));
  }
  const double n = static_cast<double>(r.variants.size());
  const auto stat = [&](double MetricMeans::*field, double& mean_out, double& sd_out) {
    double sum = 0.0;
    for (const auto& v : r.variants) sum += v.*field;
    mean_out = sum / n;
    double ss = 0.0;
    for (const auto& v : r.variants) ss += (v.*field - mean_out) * (v.*field - mean_out);
    sd_out = std::sqrt(ss / n);
  };
  stat(&MetricMeans::sad, r.mean.sad, r.stddev.sad);
  stat(&MetricMeans::mse, r.mean.mse, r.stddev.mse);
  stat(&MetricMeans::grad, r.mean.grad, r.stddev.grad);
  stat(&MetricMeans::conn, r.mean.conn, r.stddev.conn);
  return r;
}

inline nlohmann::ordered_json stability_json(const StabilityReport& r) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(r.kind);
  j["variants"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.variants.size(); ++i) {
    auto row = means_json(r.variants[i]);
    row["seed"] = r.seeds[i];
    j["variants"].push_back(row);
  }
  j["mean"] = means_json(r.mean);
  j["sigma"] = means_json(r.stddev);
  return j;
}

}  // namespace matteforge::harness
