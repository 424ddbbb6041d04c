#pragma once

#include <Eigen/Core>

#include <string>

#include "monofusion/common/error.hpp"

namespace mf {

/// Pinhole intrinsics. Pixel coordinates are continuous with integer values at pixel centers.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const {
    require(fx > 0.0 && fy > 0.0, ErrorCode::InvalidArgument, "focal lengths must be positive");
    require(width >= 8 && height >= 8, ErrorCode::InvalidArgument,
            "image must be at least 8x8, got " + std::to_string(width) + "x" + std::to_string(height));
    require(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height, ErrorCode::InvalidArgument,
            "principal point outside the image");
  }

  /// Intrinsics of an image downsampled by `factor` with factor x factor area averaging.
  /// Coarse pixel i covers fine pixels [i*f, i*f + f - 1], centered at i*f + (f-1)/2.
  [[nodiscard]] CameraIntrinsics downsampled(int factor) const {
    CameraIntrinsics out = *this;
    const double f = factor;
    out.fx = fx / f;
    out.fy = fy / f;
    out.cx = (cx + 0.5) / f - 0.5;
    out.cy = (cy + 0.5) / f - 0.5;
    out.width = width / factor;
    out.height = height / factor;
    return out;
  }

  [[nodiscard]] bool same_resolution(int w, int h) const noexcept { return w == width && h == height; }

  bool operator==(const CameraIntrinsics&) const = default;
};

struct Projection {
  Eigen::Vector2d pixel;
  double depth;
};

inline Projection project(const CameraIntrinsics& intr, const Eigen::Vector3d& p) {
  if (!(p.z() > 0.0)) fail(ErrorCode::NonPositiveDepth, "point is not in front of the camera");
  return {Eigen::Vector2d(intr.fx * p.x() / p.z() + intr.cx, intr.fy * p.y() / p.z() + intr.cy), p.z()};
}

inline Eigen::Vector3d unproject(const CameraIntrinsics& intr, const Eigen::Vector2d& pixel, double depth) {
  if (!(depth > 0.0)) fail(ErrorCode::NonPositiveDepth, "depth must be positive");
  return {(pixel.x() - intr.cx) / intr.fx * depth, (pixel.y() - intr.cy) / intr.fy * depth, depth};
}

/// Ray through a pixel, scaled so that its z component is 1.
inline Eigen::Vector3d pixel_ray(const CameraIntrinsics& intr, double x, double y) noexcept {
  return {(x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0};
}

}  // namespace mf
