#pragma once

#include <cmath>
#include <optional>

#include "monofusion/common/depth_map.hpp"
#include "monofusion/common/parallel.hpp"
#include "monofusion/geometry/camera.hpp"
#include "monofusion/geometry/pose.hpp"
#include "monofusion/tsdf/volume.hpp"

namespace mf::tsdf {

struct RaycastResult {
  DepthMap depth;
  Image<Rgb> color;  // black where depth is invalid
};

/// Marches every pixel ray from the near distance and reports the first positive-to-negative
/// zero crossing, refined by linear interpolation. Steps are parameterized by camera depth:
/// half the truncation through unallocated blocks, one voxel inside allocated ones.
inline RaycastResult raycast(const HashedTsdfVolume& vol, const PoseSE3& pose, const CameraIntrinsics& intr,
                             bool with_color = true) {
  intr.validate();
  RaycastResult out{DepthMap(intr.width, intr.height), Image<Rgb>(intr.width, intr.height, Rgb{0.f, 0.f, 0.f})};
  if (vol.empty()) return out;
  const auto& cfg = vol.config();
  const double coarse = 0.5 * cfg.truncation, fine = cfg.voxel_size;
  const Eigen::Matrix3d& r = pose.rotation();
  const Eigen::Vector3d& origin = pose.translation();

  parallel_for(0, intr.height, [&](int y) {
    for (int x = 0; x < intr.width; ++x) {
      const Eigen::Vector3d ray = r * pixel_ray(intr, x, y);
      double t = cfg.near;
      std::optional<double> prev_t, prev_d;
      while (t <= cfg.far) {
        const Eigen::Vector3d p = origin + t * ray;
        if (!vol.block_allocated_at(p)) {
          prev_t.reset();
          prev_d.reset();
          t += coarse;
          continue;
        }
        const auto s = vol.sample(p);
        if (!s) {
          prev_t.reset();
          prev_d.reset();
          t += fine;
          continue;
        }
        if (prev_d) {
          if (*prev_d > 0.0 && s->tsdf <= 0.0) {
            const double hit = *prev_t + (t - *prev_t) * (*prev_d / (*prev_d - s->tsdf));
            out.depth.set(x, y, hit);
            if (with_color) {
              const auto c = vol.sample(origin + hit * ray, true);
              out.color(x, y) = c ? c->color : vol.sample(p, true)->color;
            }
            break;
          }
          if (*prev_d < 0.0 && s->tsdf > 0.0) break;  // leaving a surface from behind
        }
        prev_t = t;
        prev_d = s->tsdf;
        t += fine;
      }
    }
  });
  return out;
}

}  // namespace mf::tsdf
