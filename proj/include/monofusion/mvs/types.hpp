#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "monofusion/common/depth_map.hpp"
#include "monofusion/common/error.hpp"
#include "monofusion/common/tensor.hpp"
#include "monofusion/features/features.hpp"
#include "monofusion/geometry/camera.hpp"
#include "monofusion/geometry/pose.hpp"

namespace mf::mvs {

/// Lower bound for any depth plane.
inline constexpr double kMinDepthFloor = 0.001;

struct MvsConfig {
  std::array<int, 3> planes{48, 4, 4};
  double d_min = 0.01;
  double d_max = 10.0;
  std::array<int, 3> interval_divisors{1, 2, 4};
  int regularizer_radius = 2;
  /// Half-width of the regularizer along the plane axis.
  int regularizer_depth_radius = 0;
  int regularizer_passes = 2;
  /// Cost assigned to voxels seen by fewer than two views.
  double max_cost = 4.0;
  double softmax_temperature = 0.01;
  /// Softmin temperature for view weights; unset means the median per-view error of the volume.
  std::optional<double> aggregation_temperature;
  /// A pixel is kept when its most likely plane has probability >= confidence_factor / D.
  double confidence_factor = 2.0;

  void validate() const {
    require(planes[0] >= planes[1] && planes[1] >= planes[2] && planes[2] >= 2, ErrorCode::InvalidArgument,
            "plane counts must satisfy D1 >= D2 >= D3 >= 2");
    require(d_min > 0.0 && d_min < d_max, ErrorCode::InvalidArgument, "need 0 < d_min < d_max");
    for (int d : interval_divisors) require(d > 0, ErrorCode::InvalidArgument, "interval divisors must be positive");
    require(regularizer_radius >= 0 && regularizer_depth_radius >= 0 && regularizer_passes >= 0, ErrorCode::InvalidArgument,
            "regularizer radius and passes must be non-negative");
    require(max_cost > 0.0 && softmax_temperature > 0.0, ErrorCode::InvalidArgument,
            "max cost and temperature must be positive");
    require(!aggregation_temperature || *aggregation_temperature > 0.0, ErrorCode::InvalidArgument,
            "aggregation temperature must be positive");
  }

  /// Spacing of the uniform first-stage ladder.
  [[nodiscard]] double stage1_interval() const { return (d_max - d_min) / (planes[0] - 1); }

  [[nodiscard]] double stage_interval(int stage) const {
    return stage1_interval() / interval_divisors.at(static_cast<std::size_t>(stage - 1));
  }
};

/// Per-pixel depth planes, shape (D, H, W); strictly increasing along D.
struct DepthHypotheses {
  Tensor<double, 3> depths;

  [[nodiscard]] int planes() const noexcept { return depths.dim(0); }
  [[nodiscard]] int height() const noexcept { return depths.dim(1); }
  [[nodiscard]] int width() const noexcept { return depths.dim(2); }
};

/// Features of one view warped onto the reference planes, shape (F, D, H, W).
struct FeatureVolume {
  Tensor<float, 4> values;
  Tensor<std::uint8_t, 3> valid;  // (D, H, W)

  [[nodiscard]] int channels() const noexcept { return values.dim(0); }
  [[nodiscard]] int planes() const noexcept { return values.dim(1); }
  [[nodiscard]] int height() const noexcept { return values.dim(2); }
  [[nodiscard]] int width() const noexcept { return values.dim(3); }
};

/// Scalar dissimilarity per (plane, pixel) plus the number of views that contributed.
struct CostVolume {
  Tensor<double, 3> values;
  Tensor<std::uint8_t, 3> view_count;
  double max_cost = 4.0;

  [[nodiscard]] bool valid(int d, int y, int x) const noexcept { return view_count(d, y, x) >= 2; }
  [[nodiscard]] int planes() const noexcept { return values.dim(0); }
  [[nodiscard]] int height() const noexcept { return values.dim(1); }
  [[nodiscard]] int width() const noexcept { return values.dim(2); }
};

/// Softmax over planes; sums to one per pixel.
struct ProbabilityVolume {
  Tensor<double, 3> values;

  [[nodiscard]] int planes() const noexcept { return values.dim(0); }
  [[nodiscard]] int height() const noexcept { return values.dim(1); }
  [[nodiscard]] int width() const noexcept { return values.dim(2); }
};

struct Keyframe {
  ImageFrame image;
  FeaturePyramid features;
  PoseSE3 pose;  // camera-to-world
};

/// n posed keyframes; the newest one (index n - 1) is the reference view.
struct KeyframeWindow {
  std::vector<std::shared_ptr<const Keyframe>> frames;
  CameraIntrinsics intrinsics;  // full resolution

  static constexpr int kMinViews = 2;
  static constexpr int kMaxViews = 8;

  [[nodiscard]] int size() const noexcept { return static_cast<int>(frames.size()); }
  [[nodiscard]] int reference_index() const noexcept { return size() - 1; }
  [[nodiscard]] const Keyframe& reference() const { return *frames.back(); }

  /// Intrinsics of stage s (1..3); stage 3 is full resolution.
  [[nodiscard]] CameraIntrinsics stage_intrinsics(int stage) const {
    return intrinsics.downsampled(1 << (3 - stage));
  }

  void validate() const {
    if (size() < kMinViews) fail(ErrorCode::TooFewViews, "window needs at least 2 keyframes");
    require(size() <= kMaxViews, ErrorCode::InvalidArgument, "window holds at most 8 keyframes");
    intrinsics.validate();
    for (const auto& kf : frames) {
      require(kf != nullptr, ErrorCode::InvalidArgument, "null keyframe");
      for (int s = 1; s <= 3; ++s) {
        const auto& t = kf->features.stage(s);
        const auto intr = stage_intrinsics(s);
        if (t.dim(1) != intr.height || t.dim(2) != intr.width)
          fail(ErrorCode::ShapeMismatch, "feature stage " + std::to_string(s) + " does not match intrinsics");
        if (t.dim(0) != frames.front()->features.channels(s))
          fail(ErrorCode::ShapeMismatch, "keyframes disagree on channel counts");
      }
    }
  }
};

}  // namespace mf::mvs
