#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "monofusion/common/depth_map.hpp"
#include "monofusion/common/parallel.hpp"
#include "monofusion/features/features.hpp"
#include "monofusion/geometry/camera.hpp"
#include "monofusion/geometry/pose.hpp"
#include "monofusion/synth/scene.hpp"

namespace mf::synth {

struct RenderOutput {
  ImageFrame image;
  DepthMap depth;
};

/// Ray-traced image and exact depth (distance along the optical axis) for a camera-to-world pose.
/// Color is the box-filtered average of `supersample` x `supersample` rays per pixel so the
/// texture does not alias; depth always comes from the ray through the pixel center.
inline RenderOutput render(const SyntheticScene& scene, const PoseSE3& pose, const CameraIntrinsics& intr,
                           double timestamp = 0.0, int supersample = 3) {
  intr.validate();
  require(supersample >= 1, ErrorCode::InvalidArgument, "supersample must be at least 1");
  RenderOutput out;
  out.image.timestamp = timestamp;
  out.image.intensity = Image<float>(intr.width, intr.height, 0.f);
  out.image.rgb = Image<Rgb>(intr.width, intr.height, Rgb{0.f, 0.f, 0.f});
  out.depth = DepthMap(intr.width, intr.height);
  const Eigen::Matrix3d& r = pose.rotation();
  const Eigen::Vector3d& origin = pose.translation();
  const int s = supersample;

  parallel_for(0, intr.height, [&](int y) {
    for (int x = 0; x < intr.width; ++x) {
      // Camera ray with z = 1, so the hit parameter is the depth.
      const Hit center = intersect_scene(scene, origin, r * pixel_ray(intr, x, y));
      if (center.primitive >= 0) out.depth.set(x, y, center.t);
      double cr = 0.0, cg = 0.0, cb = 0.0;
      for (int j = 0; j < s; ++j)
        for (int i = 0; i < s; ++i) {
          const double ox = s == 1 ? 0.0 : (i + 0.5) / s - 0.5, oy = s == 1 ? 0.0 : (j + 0.5) / s - 0.5;
          const Eigen::Vector3d dir = r * pixel_ray(intr, x + ox, y + oy);
          const Hit hit = intersect_scene(scene, origin, dir);
          if (hit.primitive < 0) continue;
          const Rgb c = shade(scene, scene.primitives[static_cast<std::size_t>(hit.primitive)],
                              origin + hit.t * dir, hit.normal);
          cr += c.r;
          cg += c.g;
          cb += c.b;
        }
      const double inv = 1.0 / (s * s);
      const Rgb c{static_cast<float>(cr * inv), static_cast<float>(cg * inv), static_cast<float>(cb * inv)};
      (*out.image.rgb)(x, y) = c;
      out.image.intensity(x, y) = luminance(c);
    }
  });
  return out;
}

/// Camera-to-world pose at `eye` looking at `target`; camera x right, y down, z forward.
inline PoseSE3 look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(up);
  require(right.norm() > 1e-9, ErrorCode::InvalidArgument, "viewing direction is parallel to the up vector");
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d rot;
  rot.col(0) = right;
  rot.col(1) = down;
  rot.col(2) = forward;
  return {rot, eye};
}

struct OrbitOptions {
  double height = 1.1;          // camera height above the focus point along `up`
  double arc_start = 0.0;       // radians
  double arc_span = 0.2;        // radians covered by the whole trajectory
  double angle_jitter = 0.35;   // fraction of the nominal angular step
  double position_jitter = 0.0; // meters, isotropic offset of every camera center
  double approach = 0.0;        // fraction of the distance to the focus closed by the last pose
};

/// Uniform double in [-1, 1) from a seed and an index.
inline double signed_unit(std::uint64_t seed, std::uint64_t index) {
  return static_cast<double>(splitmix64(splitmix64(seed) ^ (index * 0x9e3779b97f4a7c15ULL)) >> 11) * 0x1.0p-52 - 1.0;
}

/// Look-at poses on a circular arc around the scene focus. Jitter perturbs the angular steps,
/// so consecutive baselines differ; jitter 0 gives exactly uniform spacing.
inline std::vector<PoseSE3> orbit_trajectory(const SyntheticScene& scene, int n_poses, double radius,
                                             std::uint64_t jitter_seed, const OrbitOptions& opt = {}) {
  require(n_poses >= 2, ErrorCode::InvalidArgument, "an orbit needs at least two poses");
  require(radius > 0.0, ErrorCode::InvalidArgument, "orbit radius must be positive");
  const Eigen::Vector3d up = scene.up.normalized();
  Eigen::Vector3d e1 = up.unitOrthogonal();
  const Eigen::Vector3d e2 = up.cross(e1);
  const double step = opt.arc_span / (n_poses - 1);

  std::vector<PoseSE3> poses;
  poses.reserve(static_cast<std::size_t>(n_poses));
  for (int i = 0; i < n_poses; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const double jitter = (i == 0 || i == n_poses - 1) ? 0.0 : opt.angle_jitter * 0.5 * signed_unit(jitter_seed, idx);
    const double angle = opt.arc_start + step * (i + jitter);
    const double scale = 1.0 - opt.approach * i / (n_poses - 1);
    Eigen::Vector3d eye =
        scene.focus + scale * (radius * (std::cos(angle) * e1 + std::sin(angle) * e2) + opt.height * up);
    if (opt.position_jitter > 0.0) {
      eye += opt.position_jitter * Eigen::Vector3d(signed_unit(jitter_seed + 1, idx), signed_unit(jitter_seed + 2, idx),
                                                   signed_unit(jitter_seed + 3, idx));
    }
    poses.push_back(look_at(eye, scene.focus, up));
  }
  return poses;
}

/// Intrinsics with a given horizontal field of view and the principal point at the image center.
inline CameraIntrinsics centered_intrinsics(int width, int height, double hfov_deg = 60.0) {
  const double f = 0.5 * width / std::tan(0.5 * hfov_deg * M_PI / 180.0);
  return {f, f, 0.5 * (width - 1), 0.5 * (height - 1), width, height};
}

}  // namespace mf::synth
