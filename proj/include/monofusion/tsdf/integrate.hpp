#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>
#include <vector>

#include "monofusion/common/depth_map.hpp"
#include "monofusion/common/parallel.hpp"
#include "monofusion/features/features.hpp"
#include "monofusion/geometry/camera.hpp"
#include "monofusion/geometry/pose.hpp"
#include "monofusion/tsdf/volume.hpp"

namespace mf::tsdf {

struct BlockCoordHash {
  std::size_t operator()(const BlockCoord& c) const noexcept { return static_cast<std::size_t>(hash_block(c)); }
};

/// Blocks crossed by the truncation band of every valid depth pixel, in first-touch order
/// (row-major over pixels, near to far along each ray).
inline std::vector<BlockCoord> touched_blocks(const HashedTsdfVolume& vol, const DepthMap& depth, const PoseSE3& pose,
                                              const CameraIntrinsics& intr) {
  std::vector<BlockCoord> order;
  std::unordered_set<BlockCoord, BlockCoordHash> seen;
  const double trunc = vol.truncation(), step = vol.voxel_size();
  const int steps = static_cast<int>(std::ceil(2.0 * trunc / step));
  const Eigen::Matrix3d& r = pose.rotation();
  const Eigen::Vector3d& t = pose.translation();
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x) {
      if (!depth.is_valid(x, y)) continue;
      const double d = depth.depth(x, y);
      const Eigen::Vector3d ray = r * pixel_ray(intr, x, y);
      for (int s = 0; s <= steps; ++s) {
        const double z = d - trunc + s * (2.0 * trunc / steps);
        if (z <= 0.0) continue;
        const BlockCoord c = vol.block_coord(t + z * ray);
        if (seen.insert(c).second) order.push_back(c);
      }
    }
  return order;
}

struct IntegrationStats {
  std::size_t blocks_touched = 0;
  std::size_t blocks_allocated = 0;
  std::size_t voxels_updated = 0;
};

/// Projective TSDF fusion of one depth map with per-pixel color.
/// D <- (W D + d) / (W + 1), C <- (W C + c) / (W + 1), W <- min(W + 1, max_weight).
inline IntegrationStats integrate(HashedTsdfVolume& vol, const DepthMap& depth, const ImageFrame& color,
                                  const PoseSE3& pose, const CameraIntrinsics& intr) {
  intr.validate();
  if (!intr.same_resolution(depth.width(), depth.height()) || !intr.same_resolution(color.width(), color.height()))
    fail(ErrorCode::ResolutionMismatch, "depth " + std::to_string(depth.width()) + "x" +
                                            std::to_string(depth.height()) + ", color " +
                                            std::to_string(color.width()) + "x" + std::to_string(color.height()) +
                                            " and intrinsics " + std::to_string(intr.width) + "x" +
                                            std::to_string(intr.height) + " must agree");

  IntegrationStats stats;
  const auto coords = touched_blocks(vol, depth, pose, intr);
  stats.blocks_touched = coords.size();
  const std::size_t before = vol.block_count();
  std::vector<std::int32_t> indices;
  indices.reserve(coords.size());
  for (const auto& c : coords) indices.push_back(vol.allocate(c));
  stats.blocks_allocated = vol.block_count() - before;

  const PoseSE3 world_to_cam = pose.inverse();
  const Eigen::Matrix3d& r = world_to_cam.rotation();
  const Eigen::Vector3d& t = world_to_cam.translation();
  const double trunc = vol.truncation();
  const float max_w = vol.config().max_weight;
  auto& blocks = vol.blocks();
  std::vector<std::size_t> updated(indices.size(), 0);

  parallel_for(0, static_cast<int>(indices.size()), [&](int bi) {
    VoxelBlock& block = blocks[static_cast<std::size_t>(indices[static_cast<std::size_t>(bi)])];
    const int ox = block.coord.x * kBlockSide, oy = block.coord.y * kBlockSide, oz = block.coord.z * kBlockSide;
    std::size_t count = 0;
    for (int k = 0; k < kBlockSide; ++k)
      for (int j = 0; j < kBlockSide; ++j)
        for (int i = 0; i < kBlockSide; ++i) {
          const Eigen::Vector3d pc = r * vol.voxel_center(ox + i, oy + j, oz + k) + t;
          if (!(pc.z() > 0.0)) continue;
          const double u = intr.fx * pc.x() / pc.z() + intr.cx;
          const double v = intr.fy * pc.y() / pc.z() + intr.cy;
          const int px = static_cast<int>(std::lround(u)), py = static_cast<int>(std::lround(v));
          if (px < 0 || py < 0 || px >= intr.width || py >= intr.height) continue;
          if (!depth.is_valid(px, py)) continue;
          const double sdf = depth.depth(px, py) - pc.z();
          if (sdf < -trunc) continue;
          const double dproj = std::min(sdf, trunc) / trunc;
          TsdfVoxel& vox = block.at(i, j, k);
          const double w = vox.weight;
          vox.tsdf = (w * vox.tsdf + dproj) / (w + 1.0);
          const Rgb c = color.color_at(px, py);
          vox.color.r = static_cast<float>((w * vox.color.r + c.r) / (w + 1.0));
          vox.color.g = static_cast<float>((w * vox.color.g + c.g) / (w + 1.0));
          vox.color.b = static_cast<float>((w * vox.color.b + c.b) / (w + 1.0));
          vox.weight = std::min(vox.weight + 1.f, max_w);
          ++count;
        }
    updated[static_cast<std::size_t>(bi)] = count;
  });
  for (std::size_t c : updated) stats.voxels_updated += c;
  return stats;
}

}  // namespace mf::tsdf
