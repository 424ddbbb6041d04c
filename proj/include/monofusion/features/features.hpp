#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "monofusion/common/error.hpp"
#include "monofusion/common/image.hpp"
#include "monofusion/common/image_ops.hpp"
#include "monofusion/common/tensor.hpp"
#include "monofusion/common/tensor_io.hpp"

namespace mf {

/// One input frame: intensity in [0, 1], optional color, timestamp in seconds.
struct ImageFrame {
  Image<float> intensity;
  std::optional<Image<Rgb>> rgb;
  double timestamp = 0.0;

  [[nodiscard]] int width() const noexcept { return intensity.width(); }
  [[nodiscard]] int height() const noexcept { return intensity.height(); }

  [[nodiscard]] Rgb color_at(int x, int y) const noexcept {
    if (rgb) return (*rgb)(x, y);
    const float v = intensity(x, y);
    return {v, v, v};
  }
};

inline constexpr int kPyramidStages = 3;

/// Multi-scale feature maps; stages[0] is the coarsest (H/4 x W/4), stages[2] full resolution.
struct FeaturePyramid {
  std::array<Tensor<float, 3>, kPyramidStages> stages;

  [[nodiscard]] const Tensor<float, 3>& stage(int s) const { return stages.at(static_cast<std::size_t>(s - 1)); }
  [[nodiscard]] int channels(int s) const { return stage(s).dim(0); }

  /// Throws ShapeMismatch unless every finer stage doubles the previous one.
  void validate() const {
    for (int s = 1; s < kPyramidStages; ++s) {
      const auto& a = stages[s - 1];
      const auto& b = stages[s];
      if (b.dim(1) != 2 * a.dim(1) || b.dim(2) != 2 * a.dim(2))
        fail(ErrorCode::ShapeMismatch, "stage " + std::to_string(s + 1) + " is not twice the size of stage " +
                                           std::to_string(s));
    }
  }

  bool operator==(const FeaturePyramid&) const = default;
};

struct FeatureConfig {
  int smoothing_radius = 1;  // box filter half-width for the intensity channel
  bool gradient_channels = true;
  double normalization_epsilon = 1e-6;
};

/// Unnormalized channels of one stage image: [box-smoothed intensity, |d/dx|, |d/dy|].
inline Tensor<float, 3> classical_channels(const Image<float>& img, const FeatureConfig& cfg = {}) {
  const Image<float> smooth = box_filter(img, cfg.smoothing_radius);
  const int channels = cfg.gradient_channels ? 3 : 1;
  Tensor<float, 3> out({channels, img.height(), img.width()});
  Image<float> gx, gy;
  if (cfg.gradient_channels) central_gradients(img, gx, gy);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      out(0, y, x) = smooth(x, y);
      if (cfg.gradient_channels) {
        out(1, y, x) = std::abs(gx(x, y));
        out(2, y, x) = std::abs(gy(x, y));
      }
    }
  return out;
}

/// Per-channel zero mean, unit variance; a (near) constant channel becomes all zeros.
inline void normalize_channels(Tensor<float, 3>& t, double eps) {
  for (int c = 0; c < t.dim(0); ++c) {
    auto v = t.slice(c);
    double mean = 0.0;
    for (float x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (float x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    const double inv = 1.0 / std::max(std::sqrt(var), eps);
    for (float& x : v) x = static_cast<float>((x - mean) * inv);
  }
}

/// Classical stand-in for a learned feature extractor. Stage 1 is built from the 4x
/// downsampled image, stage 2 from 2x, stage 3 from the full-resolution image.
inline FeaturePyramid extract_classical(const ImageFrame& frame, const FeatureConfig& cfg = {}) {
  const int w = frame.width(), h = frame.height();
  if (w <= 0 || h <= 0 || w % 4 != 0 || h % 4 != 0)
    fail(ErrorCode::BadDimensions,
         "image size must be divisible by 4, got " + std::to_string(w) + "x" + std::to_string(h));
  const Image<float>& full = frame.intensity;
  const Image<float> half = downsample_area2(full);
  const Image<float> quarter = downsample_area2(half);

  FeaturePyramid p;
  const Image<float>* levels[kPyramidStages] = {&quarter, &half, &full};
  for (int s = 0; s < kPyramidStages; ++s) {
    p.stages[s] = classical_channels(*levels[s], cfg);
    normalize_channels(p.stages[s], cfg.normalization_epsilon);
  }
  return p;
}

inline void save_pyramid(const std::string& path, const FeaturePyramid& p) {
  write_tensor_container(path, std::vector<FloatTensor3>(p.stages.begin(), p.stages.end()));
}

/// Loads externally computed features. Channel counts may differ per stage.
inline FeaturePyramid load_external_pyramid(const std::string& path) {
  auto stages = read_tensor_container(path);
  if (stages.size() != kPyramidStages)
    fail(ErrorCode::ShapeMismatch, "expected 3 stages, found " + std::to_string(stages.size()));
  FeaturePyramid p;
  for (int s = 0; s < kPyramidStages; ++s) {
    for (float v : stages[s].values())
      if (!std::isfinite(v)) fail(ErrorCode::FormatError, "non-finite feature value in " + path);
    p.stages[s] = std::move(stages[s]);
  }
  p.validate();
  return p;
}

}  // namespace mf
