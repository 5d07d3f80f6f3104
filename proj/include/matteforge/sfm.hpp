#pragma once

// Forward-only semantic fusion block over a four-level feature pyramid
// (strides 4/8/16/32): cascaded feature-pyramid enhancement stages followed
// by joint pyramid upsampling. Weights are seeded, never trained.
//
// Building block everywhere is a separable convolution:
//   3x3 depthwise (dilated, replicate padding) -> 1x1 pointwise
//   -> per-channel affine (inference-time batch norm) -> ReLU

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "matteforge/error.hpp"
#include "matteforge/png_io.hpp"
#include "matteforge/raster.hpp"
#include "matteforge/rng.hpp"

namespace matteforge::sfm {

class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int channels, int height, int width, double fill = 0.0)
      : channels_(channels), height_(height), width_(width),
        data_(checked_volume(channels, height, width), fill) {}
  FeatureMap(int channels, int height, int width, std::vector<double> data)
      : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != checked_volume(channels, height, width)) {
      throw DimensionError("feature map data length does not match C*H*W");
    }
  }

  int channels() const noexcept { return channels_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t volume() const noexcept { return data_.size(); }

  double& at(int c, int y, int x) noexcept { return data_[offset(c, y, x)]; }
  double at(int c, int y, int x) const noexcept { return data_[offset(c, y, x)]; }
  double clamped(int c, int y, int x) const noexcept {
    return at(c, std::clamp(y, 0, height_ - 1), std::clamp(x, 0, width_ - 1));
  }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  bool same_shape(const FeatureMap& o) const noexcept {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }
  bool operator==(const FeatureMap&) const = default;

 private:
  static std::size_t checked_volume(int c, int h, int w) {
    if (c < 0 || h < 0 || w < 0) throw DimensionError("negative feature map extent");
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t offset(int c, int y, int x) const noexcept {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(height_) +
            static_cast<std::size_t>(y)) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

inline constexpr int kPyramidLevels = 4;

inline int ceil_half(int v) noexcept { return (v + 1) / 2; }

struct FeaturePyramid {
  std::array<FeatureMap, kPyramidLevels> levels;  // strides 4, 8, 16, 32

  int channels() const noexcept { return levels[0].channels(); }

  // Each level halves the previous extent (ceil) and all share a channel count.
  void validate() const {
    for (int i = 1; i < kPyramidLevels; ++i) {
      const FeatureMap& prev = levels[static_cast<std::size_t>(i - 1)];
      const FeatureMap& cur = levels[static_cast<std::size_t>(i)];
      if (cur.channels() != prev.channels() || cur.height() != ceil_half(prev.height()) ||
          cur.width() != ceil_half(prev.width())) {
        throw DimensionError("malformed pyramid at level " + std::to_string(i));
      }
    }
    if (levels[0].channels() <= 0 || levels[0].height() <= 0 || levels[0].width() <= 0) {
      throw DimensionError("pyramid base level is empty");
    }
  }

  bool same_shape(const FeaturePyramid& o) const noexcept {
    for (int i = 0; i < kPyramidLevels; ++i) {
      if (!levels[static_cast<std::size_t>(i)].same_shape(o.levels[static_cast<std::size_t>(i)])) {
        return false;
      }
    }
    return true;
  }
  bool operator==(const FeaturePyramid&) const = default;

  static FeaturePyramid zeros(int channels, int base_height, int base_width) {
    FeaturePyramid p;
    int h = base_height;
    int w = base_width;
    for (auto& level : p.levels) {
      level = FeatureMap(channels, h, w);
      h = ceil_half(h);
      w = ceil_half(w);
    }
    return p;
  }

  // Uniform values in [lo, hi).
  static FeaturePyramid random(int channels, int base_height, int base_width, Rng& rng,
                               double lo = 0.0, double hi = 1.0) {
    FeaturePyramid p = zeros(channels, base_height, base_width);
    for (auto& level : p.levels) {
      for (auto& v : level.values()) v = rng.uniform(lo, hi);
    }
    return p;
  }
};

inline constexpr int kKernel = 3;
inline constexpr int kKernelTaps = kKernel * kKernel;

struct SepConvWeights {
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> depthwise;  // in x 3 x 3
  std::vector<double> pointwise;  // out x in
  std::vector<double> scale;      // out
  std::vector<double> bias;       // out

  double dw(int c, int ky, int kx) const noexcept {
    return depthwise[static_cast<std::size_t>(c * kKernelTaps + ky * kKernel + kx)];
  }
  double pw(int o, int c) const noexcept {
    return pointwise[static_cast<std::size_t>(o * in_channels + c)];
  }

  void validate() const {
    const auto n_in = static_cast<std::size_t>(in_channels);
    const auto n_out = static_cast<std::size_t>(out_channels);
    if (in_channels <= 0 || out_channels <= 0 || depthwise.size() != n_in * kKernelTaps ||
        pointwise.size() != n_out * n_in || scale.size() != n_out || bias.size() != n_out) {
      throw DimensionError("separable convolution weights have inconsistent shapes");
    }
  }

  static SepConvWeights zeros(int in, int out) {
    SepConvWeights w;
    w.in_channels = in;
    w.out_channels = out;
    w.depthwise.assign(static_cast<std::size_t>(in) * kKernelTaps, 0.0);
    w.pointwise.assign(static_cast<std::size_t>(out) * static_cast<std::size_t>(in), 0.0);
    w.scale.assign(static_cast<std::size_t>(out), 0.0);
    w.bias.assign(static_cast<std::size_t>(out), 0.0);
    return w;
  }

  // Centre-tap depthwise, identity pointwise, unit scale, zero bias.
  static SepConvWeights identity(int channels) {
    SepConvWeights w = zeros(channels, channels);
    for (int c = 0; c < channels; ++c) {
      w.depthwise[static_cast<std::size_t>(c * kKernelTaps + 4)] = 1.0;
      w.pointwise[static_cast<std::size_t>(c * channels + c)] = 1.0;
      w.scale[static_cast<std::size_t>(c)] = 1.0;
    }
    return w;
  }

  static SepConvWeights random(int in, int out, Rng& rng) {
    SepConvWeights w = zeros(in, out);
    const double a = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& v : w.depthwise) v = rng.uniform(-0.5, 0.5);
    for (auto& v : w.pointwise) v = rng.uniform(-a, a);
    for (auto& v : w.scale) v = rng.uniform(0.5, 1.5);
    for (auto& v : w.bias) v = rng.uniform(-0.1, 0.1);
    return w;
  }

  void zero_bias() { std::fill(bias.begin(), bias.end(), 0.0); }
};

// Output extent ceil(input / stride). Taps sample
// (y*stride + (ky-1)*dilation, x*stride + (kx-1)*dilation) with replicate
// padding.
inline FeatureMap sep_conv(const FeatureMap& fm, const SepConvWeights& w, int dilation, int stride) {
  w.validate();
  if (fm.channels() != w.in_channels) {
    throw DimensionError("feature map has " + std::to_string(fm.channels()) +
                         " channels but weights expect " + std::to_string(w.in_channels));
  }
  if (dilation < 1) throw ContractError("dilation must be >= 1");
  if (stride != 1 && stride != 2) throw ContractError("stride must be 1 or 2");

  const int oh = (fm.height() + stride - 1) / stride;
  const int ow = (fm.width() + stride - 1) / stride;
  FeatureMap depth(fm.channels(), oh, ow);
  for (int c = 0; c < fm.channels(); ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int ky = 0; ky < kKernel; ++ky) {
          for (int kx = 0; kx < kKernel; ++kx) {
            acc += w.dw(c, ky, kx) * fm.clamped(c, y * stride + (ky - 1) * dilation,
                                                x * stride + (kx - 1) * dilation);
          }
        }
        depth.at(c, y, x) = acc;
      }
    }
  }

  FeatureMap out(w.out_channels, oh, ow);
  for (int o = 0; o < w.out_channels; ++o) {
    const double s = w.scale[static_cast<std::size_t>(o)];
    const double b = w.bias[static_cast<std::size_t>(o)];
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int c = 0; c < w.in_channels; ++c) acc += w.pw(o, c) * depth.at(c, y, x);
        out.at(o, y, x) = std::max(0.0, s * acc + b);
      }
    }
  }
  return out;
}

// Bilinear resampling with the half-pixel (align_corners = false) grid:
// src = (dst + 0.5) * in/out - 0.5, clamped at 0 and at the last sample.
inline FeatureMap resize_bilinear(const FeatureMap& fm, int target_height, int target_width) {
  if (target_height <= 0 || target_width <= 0 || fm.height() <= 0 || fm.width() <= 0) {
    throw DimensionError("bilinear resize needs non-empty source and target");
  }
  struct Tap {
    int i0, i1;
    double frac;
  };
  const auto taps = [](int in, int out) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int d = 0; d < out; ++d) {
      const double src = std::max(0.0, (d + 0.5) * scale - 0.5);
      const int i0 = std::min(static_cast<int>(src), in - 1);
      const int i1 = std::min(i0 + 1, in - 1);
      t[static_cast<std::size_t>(d)] = {i0, i1, src - i0};
    }
    return t;
  };
  const auto ty = taps(fm.height(), target_height);
  const auto tx = taps(fm.width(), target_width);
  FeatureMap out(fm.channels(), target_height, target_width);
  for (int c = 0; c < fm.channels(); ++c) {
    for (int y = 0; y < target_height; ++y) {
      const Tap& a = ty[static_cast<std::size_t>(y)];
      for (int x = 0; x < target_width; ++x) {
        const Tap& b = tx[static_cast<std::size_t>(x)];
        const double top = fm.at(c, a.i0, b.i0) + b.frac * (fm.at(c, a.i0, b.i1) - fm.at(c, a.i0, b.i0));
        const double bot = fm.at(c, a.i1, b.i0) + b.frac * (fm.at(c, a.i1, b.i1) - fm.at(c, a.i1, b.i0));
        out.at(c, y, x) = top + a.frac * (bot - top);
      }
    }
  }
  return out;
}

// Pyramid up-step: the target must be the next-finer level, i.e. its extent
// halves (ceil) to the source extent.
inline FeatureMap upsample2x(const FeatureMap& fm, int target_height, int target_width) {
  if (ceil_half(target_height) != fm.height() || ceil_half(target_width) != fm.width()) {
    throw DimensionError("upsample2x target is not twice the source extent");
  }
  return resize_bilinear(fm, target_height, target_width);
}

inline FeatureMap add(const FeatureMap& a, const FeatureMap& b) {
  if (!a.same_shape(b)) throw DimensionError("feature maps differ in shape");
  FeatureMap out = a;
  auto dst = out.values();
  auto src = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

inline FeatureMap concat_channels(const std::vector<FeatureMap>& parts) {
  if (parts.empty()) throw DimensionError("nothing to concatenate");
  int channels = 0;
  for (const auto& p : parts) {
    if (p.height() != parts[0].height() || p.width() != parts[0].width()) {
      throw DimensionError("concatenated maps differ in spatial extent");
    }
    channels += p.channels();
  }
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(channels) * static_cast<std::size_t>(parts[0].height()) *
               static_cast<std::size_t>(parts[0].width()));
  for (const auto& p : parts) data.insert(data.end(), p.values().begin(), p.values().end());
  return FeatureMap(channels, parts[0].height(), parts[0].width(), std::move(data));
}

// ---------------------------------------------------------------------------
// Feature pyramid enhancement

struct FpemWeights {
  std::array<SepConvWeights, 3> up;      // smoothing at strides 16, 8, 4 (index = level)
  std::array<SepConvWeights, 3> down;    // stride-2 reduction into levels 1..3 (index = level-1)
  std::array<SepConvWeights, 3> smooth;  // smoothing at levels 1..3 (index = level-1)

  static FpemWeights random(int channels, Rng& rng) {
    FpemWeights w;
    for (auto& s : w.up) s = SepConvWeights::random(channels, channels, rng);
    for (auto& s : w.down) s = SepConvWeights::random(channels, channels, rng);
    for (auto& s : w.smooth) s = SepConvWeights::random(channels, channels, rng);
    return w;
  }
  static FpemWeights identity(int channels) {
    FpemWeights w;
    for (auto& s : w.up) s = SepConvWeights::identity(channels);
    for (auto& s : w.down) s = SepConvWeights::identity(channels);
    for (auto& s : w.smooth) s = SepConvWeights::identity(channels);
    return w;
  }
};

// Coarse-to-fine pass: top level unchanged, then
// level_i' = sep_conv(level_i + up(level_{i+1}')).
inline FeaturePyramid fpem_upscale(const FeaturePyramid& pyr, const FpemWeights& w) {
  pyr.validate();
  FeaturePyramid out = pyr;
  for (int i = kPyramidLevels - 2; i >= 0; --i) {
    const auto li = static_cast<std::size_t>(i);
    const FeatureMap& level = pyr.levels[li];
    const FeatureMap up = upsample2x(out.levels[li + 1], level.height(), level.width());
    out.levels[li] = sep_conv(add(level, up), w.up[li], 1, 1);
  }
  return out;
}

// Fine-to-coarse pass over the up-scaled pyramid:
// out_i = sep_conv(level_i' + stride-2 sep_conv(out_{i-1})).
inline FeaturePyramid fpem_downscale(const FeaturePyramid& upscaled, const FpemWeights& w) {
  upscaled.validate();
  FeaturePyramid out = upscaled;
  for (int i = 1; i < kPyramidLevels; ++i) {
    const auto li = static_cast<std::size_t>(i);
    const FeatureMap reduced = sep_conv(out.levels[li - 1], w.down[li - 1], 1, 2);
    out.levels[li] = sep_conv(add(upscaled.levels[li], reduced), w.smooth[li - 1], 1, 1);
  }
  return out;
}

inline FeaturePyramid fpem(const FeaturePyramid& pyr, const FpemWeights& w) {
  return fpem_downscale(fpem_upscale(pyr, w), w);
}

// ---------------------------------------------------------------------------
// Joint pyramid upsampling

inline constexpr std::array<int, 4> kJpuDilations{1, 2, 4, 8};

struct JpuWeights {
  std::array<SepConvWeights, kPyramidLevels> project;  // C -> C per level
  std::array<SepConvWeights, 4> branch;                // 4C -> C per dilation

  static JpuWeights random(int channels, Rng& rng) {
    JpuWeights w;
    for (auto& s : w.project) s = SepConvWeights::random(channels, channels, rng);
    for (auto& s : w.branch) s = SepConvWeights::random(kPyramidLevels * channels, channels, rng);
    return w;
  }
};

// Projected levels resampled to the stride-4 extent and stacked (4C channels).
inline FeatureMap jpu_fused_input(const FeaturePyramid& pyr, const JpuWeights& w) {
  pyr.validate();
  const FeatureMap& base = pyr.levels[0];
  std::vector<FeatureMap> parts;
  for (int i = 0; i < kPyramidLevels; ++i) {
    const auto li = static_cast<std::size_t>(i);
    FeatureMap projected = sep_conv(pyr.levels[li], w.project[li], 1, 1);
    if (i > 0) projected = resize_bilinear(projected, base.height(), base.width());
    parts.push_back(std::move(projected));
  }
  return concat_channels(parts);
}

// Four parallel dilated sep_convs over the fused input, concatenated:
// stride-4 extent, 4C channels.
inline FeatureMap jpu(const FeaturePyramid& pyr, const JpuWeights& w) {
  const FeatureMap fused = jpu_fused_input(pyr, w);
  std::vector<FeatureMap> branches;
  for (std::size_t b = 0; b < kJpuDilations.size(); ++b) {
    branches.push_back(sep_conv(fused, w.branch[b], kJpuDilations[b], 1));
  }
  return concat_channels(branches);
}

// ---------------------------------------------------------------------------
// Full block

struct SfmWeights {
  int channels = 0;
  std::vector<FpemWeights> fpem;
  JpuWeights jpu;

  static SfmWeights random(int channels, int n_fpem, std::uint64_t seed) {
    Rng rng(seed);
    SfmWeights w;
    w.channels = channels;
    for (int i = 0; i < n_fpem; ++i) w.fpem.push_back(FpemWeights::random(channels, rng));
    w.jpu = JpuWeights::random(channels, rng);
    return w;
  }

  // Visits every convolution with a stable dotted name, in file order.
  template <typename Fn>
  void for_each_conv(Fn&& fn) { visit_convs(*this, fn); }
  template <typename Fn>
  void for_each_conv(Fn&& fn) const { visit_convs(*this, fn); }

  void zero_biases() {
    for_each_conv([](const std::string&, SepConvWeights& w) { w.zero_bias(); });
  }

 private:
  template <typename Self, typename Fn>
  static void visit_convs(Self& self, Fn& fn) {
    const auto idx = [](int i) { return static_cast<std::size_t>(i); };
    for (std::size_t s = 0; s < self.fpem.size(); ++s) {
      const std::string p = "fpem" + std::to_string(s) + ".";
      for (int i = 0; i < 3; ++i) fn(p + "up" + std::to_string(i), self.fpem[s].up[idx(i)]);
      for (int i = 0; i < 3; ++i) fn(p + "down" + std::to_string(i), self.fpem[s].down[idx(i)]);
      for (int i = 0; i < 3; ++i) fn(p + "smooth" + std::to_string(i), self.fpem[s].smooth[idx(i)]);
    }
    for (int i = 0; i < kPyramidLevels; ++i) fn("jpu.project" + std::to_string(i), self.jpu.project[idx(i)]);
    for (int i = 0; i < 4; ++i) fn("jpu.branch" + std::to_string(i), self.jpu.branch[idx(i)]);
  }
};

inline FeatureMap sfm_forward(const FeaturePyramid& pyr, const SfmWeights& w, int n_fpem = 2) {
  if (n_fpem < 1) throw ContractError("at least one enhancement stage is required");
  if (static_cast<std::size_t>(n_fpem) > w.fpem.size()) {
    throw ContractError("weights hold " + std::to_string(w.fpem.size()) +
                        " enhancement stages, " + std::to_string(n_fpem) + " requested");
  }
  FeaturePyramid cur = pyr;
  for (int i = 0; i < n_fpem; ++i) cur = fpem(cur, w.fpem[static_cast<std::size_t>(i)]);
  return jpu(cur, w.jpu);
}

// FNV-1a over the little-endian IEEE-754 bytes of every value.
inline std::uint64_t checksum(const FeatureMap& fm) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : fm.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Weight files: a flat little-endian float64 array plus a JSON sidecar that
// names every tensor with its shape and element offset.

inline constexpr const char* kWeightFormat = "matteforge-sfm-weights";

inline void save_weights(const SfmWeights& w, const std::filesystem::path& bin_path,
                         const std::filesystem::path& json_path) {
  Bytes blob;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  const auto put = [&](const std::string& name, const std::vector<double>& v,
                       std::vector<int> shape) {
    tensors.push_back({{"name", name}, {"shape", shape}, {"offset", offset}});
    for (double d : v) {
      const auto bits = std::bit_cast<std::uint64_t>(d);
      for (int b = 0; b < 8; ++b) blob.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xffU));
    }
    offset += v.size();
  };
  w.for_each_conv([&](const std::string& name, const SepConvWeights& c) {
    put(name + ".depthwise", c.depthwise, {c.in_channels, kKernel, kKernel});
    put(name + ".pointwise", c.pointwise, {c.out_channels, c.in_channels});
    put(name + ".scale", c.scale, {c.out_channels});
    put(name + ".bias", c.bias, {c.out_channels});
  });
  nlohmann::ordered_json meta;
  meta["format"] = kWeightFormat;
  meta["version"] = 1;
  meta["dtype"] = "float64";
  meta["byte_order"] = "little-endian";
  meta["channels"] = w.channels;
  meta["n_fpem"] = w.fpem.size();
  meta["elements"] = offset;
  meta["tensors"] = tensors;
  write_file_atomic(bin_path, blob);
  write_file_atomic(json_path, meta.dump(2) + "\n");
}

inline SfmWeights load_weights(const std::filesystem::path& bin_path,
                               const std::filesystem::path& json_path) {
  const Bytes meta_bytes = read_file(json_path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("weight sidecar is not valid JSON: ") + e.what());
  }
  if (meta.value("format", "") != kWeightFormat || meta.value("dtype", "") != "float64" ||
      meta.value("byte_order", "") != "little-endian") {
    throw FormatError("unsupported weight sidecar");
  }
  const int channels = meta.at("channels").get<int>();
  const int n_fpem = meta.at("n_fpem").get<int>();
  SfmWeights w;
  w.channels = channels;
  w.fpem.resize(static_cast<std::size_t>(n_fpem));
  w.for_each_conv([&](const std::string& name, SepConvWeights& c) {
    const bool branch = name.rfind("jpu.branch", 0) == 0;
    c = SepConvWeights::zeros(branch ? kPyramidLevels * channels : channels, channels);
  });

  const Bytes blob = read_file(bin_path);
  const std::size_t elements = meta.at("elements").get<std::size_t>();
  if (blob.size() != elements * 8) {
    throw FormatError("weight blob holds " + std::to_string(blob.size()) + " bytes, expected " +
                      std::to_string(elements * 8));
  }
  const auto read_at = [&](std::size_t idx) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{blob[idx * 8 + static_cast<std::size_t>(b)]} << (8 * b);
    return std::bit_cast<double>(bits);
  };
  std::size_t t = 0;
  const auto& tensors = meta.at("tensors");
  const auto take = [&](const std::string& name, std::vector<double>& dst) {
    if (t >= tensors.size() || tensors[t].at("name").get<std::string>() != name) {
      throw FormatError("weight sidecar is missing tensor " + name);
    }
    const std::size_t off = tensors[t].at("offset").get<std::size_t>();
    if (off + dst.size() > elements) throw FormatError("tensor " + name + " overruns the blob");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = read_at(off + i);
    ++t;
  };
  w.for_each_conv([&](const std::string& name, SepConvWeights& c) {
    take(name + ".depthwise", c.depthwise);
    take(name + ".pointwise", c.pointwise);
    take(name + ".scale", c.scale);
    take(name + ".bias", c.bias);
  });
  if (t != tensors.size()) throw FormatError("weight sidecar lists unexpected tensors");
  return w;
}

}  // namespace matteforge::sfm
