#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "monofusion/common/binary_io.hpp"
#include "monofusion/tsdf/volume.hpp"

namespace mf::tsdf {

inline constexpr std::array<char, 4> kSnapshotMagic{'M', 'F', 'T', 'V'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

/// Block-sparse dump: header (magic, version, voxel size, truncation, near, far, max weight,
/// block count), then per block its coordinate and 512 voxels (f64 tsdf, f32 weight, 3 x f32 color).
inline void save_snapshot(const std::string& path, const HashedTsdfVolume& vol) {
  binary::Writer w;
  w.put_raw(kSnapshotMagic.data(), kSnapshotMagic.size());
  w.put(kSnapshotVersion);
  const auto& cfg = vol.config();
  w.put(cfg.voxel_size);
  w.put(cfg.truncation);
  w.put(cfg.near);
  w.put(cfg.far);
  w.put(cfg.max_weight);
  w.put(static_cast<std::uint64_t>(vol.block_count()));
  for (const auto& b : vol.blocks()) {
    w.put(static_cast<std::int32_t>(b.coord.x));
    w.put(static_cast<std::int32_t>(b.coord.y));
    w.put(static_cast<std::int32_t>(b.coord.z));
    for (const auto& v : b.voxels) {
      w.put(v.tsdf);
      w.put(v.weight);
      w.put(v.color.r);
      w.put(v.color.g);
      w.put(v.color.b);
    }
  }
  w.save(path);
}

inline HashedTsdfVolume load_snapshot(const std::string& path) {
  auto r = binary::Reader::from_file(path);
  std::array<char, 4> magic{};
  r.get_raw(magic.data(), magic.size());
  if (magic != kSnapshotMagic) fail(ErrorCode::FormatError, path + ": not a volume snapshot");
  if (r.get<std::uint32_t>() != kSnapshotVersion) fail(ErrorCode::FormatError, path + ": unsupported version");
  TsdfConfig cfg;
  cfg.voxel_size = r.get<double>();
  cfg.truncation = r.get<double>();
  cfg.near = r.get<double>();
  cfg.far = r.get<double>();
  cfg.max_weight = r.get<float>();
  HashedTsdfVolume vol(cfg);
  const auto n = r.get<std::uint64_t>();
  constexpr std::size_t kBlockBytes = 12 + kBlockVoxels * (8 + 4 + 12);
  if (n > r.remaining() / kBlockBytes) fail(ErrorCode::FormatError, path + ": truncated");
  for (std::uint64_t i = 0; i < n; ++i) {
    BlockCoord c;
    c.x = r.get<std::int32_t>();
    c.y = r.get<std::int32_t>();
    c.z = r.get<std::int32_t>();
    const auto idx = vol.allocate(c);
    auto& block = vol.blocks()[static_cast<std::size_t>(idx)];
    for (auto& v : block.voxels) {
      v.tsdf = r.get<double>();
      v.weight = r.get<float>();
      v.color.r = r.get<float>();
      v.color.g = r.get<float>();
      v.color.b = r.get<float>();
    }
  }
  if (r.remaining() != 0) fail(ErrorCode::FormatError, path + ": trailing bytes");
  return vol;
}

}  // namespace mf::tsdf
