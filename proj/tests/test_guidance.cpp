#include <cmath>

#include <gtest/gtest.h>

#include "matteforge/guidance.hpp"
#include "matteforge/trimap.hpp"
#include "oracles.hpp"

using namespace matteforge;

namespace {

Trimap disk_trimap(int size, int radius, int band) {
  std::vector<Label> labels(static_cast<std::size_t>(size * size));
  const double c = size / 2.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double d = std::hypot(x - c, y - c);
      labels[static_cast<std::size_t>(y * size + x)] =
          d < radius - band ? Label::Foreground : (d > radius + band ? Label::Background : Label::Unknown);
    }
  }
  return Trimap(Size{size, size}, labels);
}

}  // namespace

TEST(SamplePoints, InsideMaskAndSpaced) {
  Rng rng(3);
  for (int iter = 0; iter < 30; ++iter) {
    const BinaryMask m = oracle::random_mask(Size{200, 150}, rng, rng.uniform(0.05, 0.9));
    const PointSet ps = sample_points(m, kMaxPointsPerRegion, kMinPointDistance, rng);
    EXPECT_LE(ps.points.size(), 10u);
    for (std::size_t i = 0; i < ps.points.size(); ++i) {
      EXPECT_TRUE(m.test(ps.points[i].x, ps.points[i].y));
      for (std::size_t j = 0; j < i; ++j) EXPECT_GE(distance(ps.points[i], ps.points[j]), 50.0);
    }
  }
}

TEST(SamplePoints, EmptyMaskGivesNoPoints) {
  Rng rng(1);
  EXPECT_TRUE(sample_points(BinaryMask(Size{10, 10}), 10, 50, rng).points.empty());
}

TEST(SamplePoints, TinyMaskGivesOnePoint) {
  Rng rng(1);
  BinaryMask m(Size{30, 30});
  m.set(4, 5);
  m.set(5, 5);
  const PointSet ps = sample_points(m, 10, 50, rng);
  ASSERT_EQ(ps.points.size(), 1u);
}

TEST(DiskCanvas, MatchesPerPixelPredicate) {
  Rng rng(9);
  for (int iter = 0; iter < 200; ++iter) {
    const Size s{rng.uniform_int(1, 60), rng.uniform_int(1, 60)};
    DiskCanvas canvas(s);
    std::vector<std::array<double, 3>> disks;
    const int n = rng.uniform_int(1, 4);
    for (int k = 0; k < n; ++k) {
      const double cx = rng.uniform(-10.0, s.width + 10.0);
      const double cy = rng.uniform(-10.0, s.height + 10.0);
      const double r = rng.uniform() < 0.3 ? rng.uniform_int(0, 20) : rng.uniform(0.0, 20.0);
      disks.push_back({cx, cy, r});
      canvas.add_disk(cx, cy, r);
    }
    const BinaryMask got = canvas.rasterize();
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        bool want = false;
        for (const auto& d : disks) {
          const double dx = x - d[0], dy = y - d[1];
          want = want || dx * dx + dy * dy <= d[2] * d[2];
        }
        ASSERT_EQ(got.test(x, y), want) << x << "," << y;
      }
    }
  }
}

TEST(DiskCanvas, IntegerDiameter40Area) {
  DiskCanvas c(Size{100, 100});
  c.add_disk(50, 50, 20);
  const double area = static_cast<double>(c.rasterize().count());
  EXPECT_NEAR(area / (std::acos(-1.0) * 400.0), 1.0, 0.05);
}

TEST(FitTriple, CurvePassesThroughAnchors) {
  Rng rng(12);
  for (int iter = 0; iter < 300; ++iter) {
    std::array<Point, 3> p;
    for (auto& q : p) q = {rng.uniform_int(0, 300), rng.uniform_int(0, 300)};
    const CurveSamples c = fit_triple(p);
    ASSERT_GE(c.xy.size(), 1u);
    for (const Point& q : p) {
      double best = 1e300;
      for (std::size_t i = 0; i + 1 < c.xy.size(); ++i) {
        best = std::min(best, oracle::point_segment_distance(q.x, q.y, c.xy[i][0], c.xy[i][1],
                                                              c.xy[i + 1][0], c.xy[i + 1][1]));
      }
      if (c.xy.size() == 1) best = std::hypot(q.x - c.xy[0][0], q.y - c.xy[0][1]);
      // the middle anchor may fall between samples; the chord sagitta at
      // half-pixel spacing is far below a pixel
      EXPECT_LT(best, 0.01) << q.x << "," << q.y;
    }
    for (std::size_t i = 0; i + 1 < c.xy.size(); ++i) {
      EXPECT_LE(std::hypot(c.xy[i + 1][0] - c.xy[i][0], c.xy[i + 1][1] - c.xy[i][1]),
                kStampSpacing + 1e-9);
    }
  }
}

TEST(FitTriple, RepeatedAbscissaSwapsAxes) {
  const CurveSamples c = fit_triple({Point{5, 0}, Point{5, 20}, Point{9, 40}});
  EXPECT_TRUE(c.fitted_cubic);
  const CurveSamples d = fit_triple({Point{5, 0}, Point{5, 20}, Point{9, 20}});
  EXPECT_FALSE(d.fitted_cubic);
}

TEST(FitScribble, StrokeStaysNearCurve) {
  Rng rng(21);
  for (int iter = 0; iter < 40; ++iter) {
    PointSet ps;
    for (int k = 0; k < 3; ++k) ps.points.push_back({rng.uniform_int(10, 110), rng.uniform_int(10, 110)});
    const double thickness = rng.uniform_int(1, 30);
    const ScribbleMask m = fit_scribble(ps, thickness, Size{120, 120});
    const CurveSamples c = fit_triple({ps.points[0], ps.points[1], ps.points[2]});
    for (int y = 0; y < 120; ++y) {
      for (int x = 0; x < 120; ++x) {
        double best = 1e300;
        for (std::size_t i = 0; i + 1 < c.xy.size(); ++i) {
          best = std::min(best, oracle::point_segment_distance(x, y, c.xy[i][0], c.xy[i][1],
                                                                c.xy[i + 1][0], c.xy[i + 1][1]));
        }
        if (m.test(x, y)) {
          EXPECT_LE(best, thickness / 2 + 1e-9);
        } else {
          // a pixel this deep inside the stroke must be painted
          EXPECT_GT(best, thickness / 2 - kStampSpacing);
        }
      }
    }
    for (const Point& p : ps.points) EXPECT_TRUE(m.test(p.x, p.y));
  }
}

TEST(FitScribble, LeftoverPointsAreDisks) {
  PointSet ps;
  ps.points = {{10, 10}, {60, 60}};
  const ScribbleMask m = fit_scribble(ps, 9, Size{80, 80});
  DiskCanvas c(Size{80, 80});
  c.add_disk(10, 10, 4.5);
  c.add_disk(60, 60, 4.5);
  EXPECT_EQ(m, c.rasterize());
  EXPECT_THROW(fit_scribble(ps, 0.5, Size{80, 80}), ContractError);
}

TEST(ComposeGuidance, PerPixelFormula) {
  Rng rng(6);
  const BinaryMask a = oracle::random_mask(Size{17, 13}, rng, 0.3);
  BinaryMask b = oracle::random_mask(Size{17, 13}, rng, 0.3);
  for (std::size_t i = 0; i < a.pixel_count(); ++i)
    if (a.test(i)) b.set(i, false);
  const GuidanceMap g = compose_guidance(a, b);
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    EXPECT_EQ(g.value(i), 0.5 + 0.5 * a.test(i) - 0.5 * b.test(i));
  }
  b.set(std::size_t{0}, true);
  BinaryMask a2 = a;
  a2.set(std::size_t{0}, true);
  EXPECT_THROW(compose_guidance(a2, b), ContractError);
}

TEST(ComposeGuidance, EmptyScribblesGiveNoGuidance) {
  const BinaryMask e(Size{7, 7});
  EXPECT_EQ(compose_guidance(e, e), no_guidance(Size{7, 7}));
}

TEST(Schedule, Endpoints) {
  const ThicknessSchedule s;
  EXPECT_EQ(thickness_at(0, s), 800);
  EXPECT_EQ(thickness_at(530000, s), 40);
  EXPECT_EQ(thickness_at(265000, s), 179);
  EXPECT_EQ(thickness_at(600000, s), 40);
  EXPECT_EQ(thickness_at(5000000, s), 40);
  int prev = thickness_at(0, s);
  for (std::int64_t step = 0; step <= 600000; step += 1000) {
    const int t = thickness_at(step, s);
    EXPECT_LE(t, prev);
    prev = t;
  }
  EXPECT_THROW(thickness_at(-1, s), ContractError);
  ThicknessSchedule bad;
  bad.t_end = 0.0;
  EXPECT_THROW(thickness_at(0, bad), ContractError);
}

TEST(Clickmap, ClippedToTrimapRegions) {
  const Trimap t = disk_trimap(160, 50, 6);
  const RegionMasks m = masks(t);
  Rng rng(4);
  for (int iter = 0; iter < 10; ++iter) {
    const PointSet fg = sample_points(m.fg, 10, 50, rng, Region::Foreground);
    const PointSet bg = sample_points(m.bg, 10, 50, rng, Region::Background);
    const GuidanceMap g = make_clickmap(fg, bg, 40, t);
    for (std::size_t i = 0; i < g.pixel_count(); ++i) {
      if (g[i] == Label::Foreground) {
        EXPECT_TRUE(m.fg.test(i));
      }
      if (g[i] == Label::Background) {
        EXPECT_TRUE(m.bg.test(i));
      }
    }
  }
}

TEST(Clickmap, UnclippedOverlapStaysUnknown) {
  PointSet fg, bg;
  fg.points = {{20, 20}};
  bg.points = {{30, 20}};
  const GuidanceMap g = make_clickmap(fg, bg, 10, Size{50, 40});
  EXPECT_EQ(g(25, 20), Label::Unknown);
  EXPECT_EQ(g(18, 20), Label::Foreground);
  EXPECT_EQ(g(33, 20), Label::Background);
}

TEST(Deform, ContainmentAndMonotoneUnknown) {
  const Trimap t = disk_trimap(200, 60, 8);
  const RegionMasks m = masks(t);
  const ThicknessSchedule sched;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::size_t prev_unknown = 0;
    for (std::int64_t step : {0, 100000, 265000, 400000, 530000, 600000}) {
      Rng rng(seed);
      const GuidanceMap g = deform(t, step, sched, rng);
      for (std::size_t i = 0; i < g.pixel_count(); ++i) {
        if (g[i] == Label::Foreground) {
          ASSERT_TRUE(m.fg.test(i));
        }
        if (g[i] == Label::Background) {
          ASSERT_TRUE(m.bg.test(i));
        }
      }
      const std::size_t unknown = g.count(Label::Unknown);
      EXPECT_GE(unknown, prev_unknown);
      prev_unknown = unknown;
    }
  }
}

TEST(Deform, StepZeroCoversLargeRegions) {
  const Trimap t = disk_trimap(200, 60, 8);
  Rng rng(1);
  const GuidanceMap g = deform(t, 0, ThicknessSchedule{}, rng);
  // an 800px brush swallows both regions entirely
  EXPECT_EQ(g, t);
}

TEST(Deform, SameSeedSameMap) {
  const Trimap t = disk_trimap(150, 40, 5);
  Rng a(77), b(77);
  EXPECT_EQ(deform(t, 300000, ThicknessSchedule{}, a), deform(t, 300000, ThicknessSchedule{}, b));
}
