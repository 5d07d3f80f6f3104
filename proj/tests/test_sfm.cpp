#include <filesystem>

#include <gtest/gtest.h>

#include "matteforge/sfm.hpp"
#include "oracles.hpp"

using namespace matteforge;
using namespace matteforge::sfm;

namespace {

FeatureMap random_map(int c, int h, int w, Rng& rng, double lo = -1.0, double hi = 1.0) {
  FeatureMap m(c, h, w);
  for (auto& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace

TEST(SepConv, MatchesDenseLoopNest) {
  Rng rng(8);
  for (int dilation : {1, 2, 4, 8}) {
    for (int stride : {1, 2}) {
      for (int iter = 0; iter < 10; ++iter) {
        const int cin = rng.uniform_int(1, 4);
        const int cout = rng.uniform_int(1, 4);
        const FeatureMap x = random_map(cin, rng.uniform_int(1, 8), rng.uniform_int(1, 8), rng);
        const SepConvWeights w = SepConvWeights::random(cin, cout, rng);
        const FeatureMap got = sep_conv(x, w, dilation, stride);
        const FeatureMap want = oracle::sep_conv(x, w, dilation, stride);
        ASSERT_TRUE(got.same_shape(want));
        for (std::size_t i = 0; i < got.volume(); ++i) ASSERT_NEAR(got.values()[i], want.values()[i], 1e-12);
      }
    }
  }
}

TEST(SepConv, IdentityPassesNonNegativeInputThrough) {
  Rng rng(2);
  for (int dilation : {1, 2, 4, 8}) {
    const FeatureMap x = random_map(3, 7, 5, rng, 0.0, 4.0);
    EXPECT_EQ(sep_conv(x, SepConvWeights::identity(3), dilation, 1), x);
  }
}

TEST(SepConv, RejectsBadArguments) {
  const FeatureMap x(2, 4, 4);
  EXPECT_THROW(sep_conv(x, SepConvWeights::identity(3), 1, 1), DimensionError);
  EXPECT_THROW(sep_conv(x, SepConvWeights::identity(2), 0, 1), ContractError);
  EXPECT_THROW(sep_conv(x, SepConvWeights::identity(2), 1, 3), ContractError);
}

TEST(Resize, HalfPixelBilinearTwoToFour) {
  const FeatureMap x(1, 2, 2, std::vector<double>{0, 1, 2, 3});
  const FeatureMap y = resize_bilinear(x, 4, 4);
  const double want[4][4] = {{0, 0.25, 0.75, 1},
                             {0.5, 0.75, 1.25, 1.5},
                             {1.5, 1.75, 2.25, 2.5},
                             {2, 2.25, 2.75, 3}};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(y.at(0, r, c), want[r][c]) << r << "," << c;
}

TEST(Resize, SameSizeIsIdentity) {
  Rng rng(1);
  const FeatureMap x = random_map(2, 5, 3, rng);
  EXPECT_EQ(resize_bilinear(x, 5, 3), x);
}

TEST(Pyramid, ShapeContractsHoldForRandomSizes) {
  Rng rng(13);
  for (int iter = 0; iter < 20; ++iter) {
    const int c = rng.uniform_int(1, 4);
    const int h = rng.uniform_int(1, 24);
    const int w = rng.uniform_int(1, 24);
    const FeaturePyramid p = FeaturePyramid::random(c, h, w, rng);
    const FpemWeights fw = FpemWeights::random(c, rng);
    const FeaturePyramid up = fpem_upscale(p, fw);
    const FeaturePyramid down = fpem_downscale(up, fw);
    EXPECT_TRUE(up.same_shape(p));
    EXPECT_TRUE(down.same_shape(p));
    EXPECT_EQ(up.levels[3], p.levels[3]);
    const JpuWeights jw = JpuWeights::random(c, rng);
    const FeatureMap fused = jpu_fused_input(down, jw);
    EXPECT_EQ(fused.channels(), 4 * c);
    const FeatureMap out = jpu(down, jw);
    EXPECT_EQ(out.channels(), 4 * c);
    EXPECT_EQ(out.height(), h);
    EXPECT_EQ(out.width(), w);
  }
}

TEST(Pyramid, MalformedPyramidRejected) {
  FeaturePyramid p = FeaturePyramid::zeros(2, 8, 8);
  p.levels[2] = FeatureMap(2, 3, 2);
  EXPECT_THROW(p.validate(), DimensionError);
  EXPECT_THROW(fpem(p, FpemWeights::identity(2)), DimensionError);
}

TEST(Fpem, IdentityWeightsFollowClosedForm) {
  // with identity convs on non-negative input each step reduces to the sums
  Rng rng(4);
  const FeaturePyramid p = FeaturePyramid::random(1, 8, 8, rng);
  const FeaturePyramid up = fpem_upscale(p, FpemWeights::identity(1));
  const FeatureMap want2 = add(p.levels[2], resize_bilinear(p.levels[3], 2, 2));
  EXPECT_EQ(up.levels[2], want2);
}

TEST(Sfm, SeededForwardIsStable) {
  Rng rng(123);
  const FeaturePyramid p = FeaturePyramid::random(4, 16, 16, rng);
  const SfmWeights w = SfmWeights::random(4, 2, 456);
  const FeatureMap a = sfm_forward(p, w);
  const FeatureMap b = sfm_forward(p, w);
  EXPECT_EQ(checksum(a), checksum(b));
  EXPECT_EQ(a.channels(), 16);
  EXPECT_EQ(a.height(), 16);
  EXPECT_THROW(sfm_forward(p, w, 3), ContractError);
}

TEST(Sfm, WeightsRoundTripThroughFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "matteforge_sfm_test";
  std::filesystem::remove_all(dir);
  const SfmWeights w = SfmWeights::random(3, 2, 99);
  save_weights(w, dir / "w.bin", dir / "w.json");
  const SfmWeights back = load_weights(dir / "w.bin", dir / "w.json");
  Rng rng(5);
  const FeaturePyramid p = FeaturePyramid::random(3, 9, 11, rng);
  EXPECT_EQ(sfm_forward(p, w), sfm_forward(p, back));
  EXPECT_EQ(std::filesystem::file_size(dir / "w.bin") % 8, 0u);
  std::filesystem::resize_file(dir / "w.bin", 16);
  EXPECT_THROW(load_weights(dir / "w.bin", dir / "w.json"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST(Checksum, KnownValues) {
  EXPECT_EQ(checksum(FeatureMap()), 0xcbf29ce484222325ULL);
  EXPECT_NE(checksum(FeatureMap(1, 1, 1, 0.0)), checksum(FeatureMap(1, 1, 1, -0.0)));
}

TEST(Checksum, ForwardPassIsPinned) {
  Rng rng(2024);
  const auto pyr = FeaturePyramid::random(4, 16, 16, rng);
  const auto w = SfmWeights::random(4, 2, 7);
  EXPECT_EQ(checksum(sfm_forward(pyr, w, 2)), 0x10e59b89621ced0fULL);
}
