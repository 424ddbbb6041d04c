#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "monofusion/common/error.hpp"
#include "monofusion/common/image.hpp"

namespace mf::tsdf {

inline constexpr int kBlockSide = 8;
inline constexpr int kBlockVoxels = kBlockSide * kBlockSide * kBlockSide;

/// Normalized truncated signed distance, running-average color and fusion weight.
struct TsdfVoxel {
  double tsdf = 1.0;
  float weight = 0.f;
  Rgb color{0.f, 0.f, 0.f};

  [[nodiscard]] bool observed() const noexcept { return weight > 0.f; }
};

struct BlockCoord {
  int x = 0, y = 0, z = 0;
  bool operator==(const BlockCoord&) const = default;
  auto operator<=>(const BlockCoord&) const = default;
};

struct VoxelBlock {
  BlockCoord coord;
  std::array<TsdfVoxel, kBlockVoxels> voxels{};

  static constexpr int local_index(int x, int y, int z) noexcept { return (z * kBlockSide + y) * kBlockSide + x; }
  TsdfVoxel& at(int x, int y, int z) noexcept { return voxels[static_cast<std::size_t>(local_index(x, y, z))]; }
  [[nodiscard]] const TsdfVoxel& at(int x, int y, int z) const noexcept {
    return voxels[static_cast<std::size_t>(local_index(x, y, z))];
  }
};

inline std::uint64_t hash_block(const BlockCoord& c) noexcept {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.x)) * 73856093ULL) ^
         (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.y)) * 19349669ULL) ^
         (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.z)) * 83492791ULL);
}

/// Open-addressing map from block coordinate to a dense block index. Linear probing,
/// power-of-two capacity, load factor kept at or below one half.
class BlockHashMap {
 public:
  static constexpr std::int32_t kEmpty = -1;

  BlockHashMap() { rehash(64); }

  [[nodiscard]] std::size_t size() const noexcept { return size_; }
  [[nodiscard]] std::size_t capacity() const noexcept { return slots_.size(); }

  [[nodiscard]] std::int32_t find(const BlockCoord& c) const noexcept {
    const std::size_t mask = slots_.size() - 1;
    for (std::size_t i = hash_block(c) & mask;; i = (i + 1) & mask) {
      const Slot& s = slots_[i];
      if (s.index == kEmpty) return kEmpty;
      if (s.coord == c) return s.index;
    }
  }

  /// Returns the existing index for `c`, or stores `index` and returns it.
  std::int32_t insert(const BlockCoord& c, std::int32_t index) {
    if (2 * (size_ + 1) > slots_.size()) rehash(slots_.size() * 2);
    const std::size_t mask = slots_.size() - 1;
    for (std::size_t i = hash_block(c) & mask;; i = (i + 1) & mask) {
      Slot& s = slots_[i];
      if (s.index == kEmpty) {
        s = {c, index};
        ++size_;
        return index;
      }
      if (s.coord == c) return s.index;
    }
  }

  void clear() {
    slots_.assign(64, Slot{});
    size_ = 0;
  }

 private:
  struct Slot {
    BlockCoord coord;
    std::int32_t index = kEmpty;
  };

  void rehash(std::size_t capacity) {
    std::vector<Slot> old = std::move(slots_);
    slots_.assign(capacity, Slot{});
    size_ = 0;
    for (const Slot& s : old)
      if (s.index != kEmpty) insert(s.coord, s.index);
  }

  std::vector<Slot> slots_;
  std::size_t size_ = 0;
};

struct TsdfConfig {
  double voxel_size = 0.01;
  double truncation = 0.1;
  double near = 0.05;       // raycast start distance along the optical axis
  double far = 10.0;        // raycast end distance
  float max_weight = 64.f;

  void validate() const {
    require(voxel_size > 0.0, ErrorCode::InvalidArgument, "voxel size must be positive");
    require(truncation >= 4.0 * voxel_size, ErrorCode::InvalidArgument, "truncation must be at least 4 voxels");
    require(near > 0.0 && far > near, ErrorCode::InvalidArgument, "need 0 < near < far");
    require(max_weight >= 1.f, ErrorCode::InvalidArgument, "max weight must be at least 1");
  }
};

/// Sparse voxel-hashed TSDF. Voxel (i, j, k) has its center at (i, j, k) * voxel_size and
/// belongs to block floor(i / 8), ...; unallocated space reads as empty (weight 0).
class HashedTsdfVolume {
 public:
  explicit HashedTsdfVolume(TsdfConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  [[nodiscard]] const TsdfConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] double voxel_size() const noexcept { return cfg_.voxel_size; }
  [[nodiscard]] double truncation() const noexcept { return cfg_.truncation; }
  [[nodiscard]] double block_size() const noexcept { return cfg_.voxel_size * kBlockSide; }
  [[nodiscard]] std::size_t block_count() const noexcept { return blocks_.size(); }
  [[nodiscard]] bool empty() const noexcept { return blocks_.empty(); }

  [[nodiscard]] const std::vector<VoxelBlock>& blocks() const noexcept { return blocks_; }
  std::vector<VoxelBlock>& blocks() noexcept { return blocks_; }

  [[nodiscard]] BlockCoord block_coord(const Eigen::Vector3d& p) const noexcept {
    const double b = block_size();
    return {static_cast<int>(std::floor(p.x() / b)), static_cast<int>(std::floor(p.y() / b)),
            static_cast<int>(std::floor(p.z() / b))};
  }

  [[nodiscard]] const VoxelBlock* find_block(const BlockCoord& c) const noexcept {
    const auto i = map_.find(c);
    return i == BlockHashMap::kEmpty ? nullptr : &blocks_[static_cast<std::size_t>(i)];
  }
  VoxelBlock* find_block(const BlockCoord& c) noexcept {
    const auto i = map_.find(c);
    return i == BlockHashMap::kEmpty ? nullptr : &blocks_[static_cast<std::size_t>(i)];
  }

  /// Index of the block at `c`, allocating it if needed.
  std::int32_t allocate(const BlockCoord& c) {
    const auto next = static_cast<std::int32_t>(blocks_.size());
    const auto idx = map_.insert(c, next);
    if (idx == next) {
      blocks_.emplace_back();
      blocks_.back().coord = c;
    }
    return idx;
  }

  /// Voxel by global integer index, or nullptr when its block is not allocated.
  [[nodiscard]] const TsdfVoxel* voxel(int i, int j, int k) const noexcept {
    const BlockCoord c{floor_div(i), floor_div(j), floor_div(k)};
    const VoxelBlock* b = find_block(c);
    if (!b) return nullptr;
    return &b->at(i - c.x * kBlockSide, j - c.y * kBlockSide, k - c.z * kBlockSide);
  }

  /// Center of voxel (i, j, k) in world coordinates.
  [[nodiscard]] Eigen::Vector3d voxel_center(int i, int j, int k) const noexcept {
    return Eigen::Vector3d(i, j, k) * cfg_.voxel_size;
  }

  struct Sample {
    double tsdf;
    Rgb color;
  };

  /// Trilinear interpolation; empty unless all eight neighbouring voxels are observed.
  [[nodiscard]] std::optional<Sample> sample(const Eigen::Vector3d& p, bool with_color = false) const noexcept {
    const Eigen::Vector3d g = p / cfg_.voxel_size;
    const double fx = std::floor(g.x()), fy = std::floor(g.y()), fz = std::floor(g.z());
    const int i = static_cast<int>(fx), j = static_cast<int>(fy), k = static_cast<int>(fz);
    const double ax = g.x() - fx, ay = g.y() - fy, az = g.z() - fz;
    double d = 0.0;
    double r = 0.0, gr = 0.0, b = 0.0;
    for (int c = 0; c < 8; ++c) {
      const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
      const TsdfVoxel* v = voxel(i + dx, j + dy, k + dz);
      if (!v || !v->observed()) return std::nullopt;
      const double w = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay) * (dz ? az : 1.0 - az);
      d += w * v->tsdf;
      if (with_color) {
        r += w * v->color.r;
        gr += w * v->color.g;
        b += w * v->color.b;
      }
    }
    return Sample{d, {static_cast<float>(r), static_cast<float>(gr), static_cast<float>(b)}};
  }

  [[nodiscard]] bool block_allocated_at(const Eigen::Vector3d& p) const noexcept {
    return find_block(block_coord(p)) != nullptr;
  }

  void clear() {
    blocks_.clear();
    map_.clear();
  }

  static constexpr int floor_div(int v) noexcept { return v >= 0 ? v / kBlockSide : -((-v + kBlockSide - 1) / kBlockSide); }

 private:
  TsdfConfig cfg_;
  std::vector<VoxelBlock> blocks_;
  BlockHashMap map_;
};

/// Block containing a world point: floor(p / (8 * voxel_size)) per axis.
inline BlockCoord block_coord(const HashedTsdfVolume& vol, const Eigen::Vector3d& p) noexcept {
  return vol.block_coord(p);
}

}  // namespace mf::tsdf
