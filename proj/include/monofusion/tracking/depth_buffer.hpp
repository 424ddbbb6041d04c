#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "monofusion/common/depth_map.hpp"
#include "monofusion/common/error.hpp"
#include "monofusion/common/image_ops.hpp"
#include "monofusion/features/features.hpp"

namespace mf::tracking {

enum class SparseSource { Dataset, Sampled, None };

inline const char* to_string(SparseSource s) noexcept {
  switch (s) {
    case SparseSource::Dataset: return "dataset";
    case SparseSource::Sampled: return "sampled";
    case SparseSource::None: return "none";
  }
  return "none";
}

struct SparseDepthEntry {
  int x = 0;
  int y = 0;
  double depth = 0.0;
};

/// Sparse point depths of one keyframe.
struct SparseDepthMap {
  int width = 0;
  int height = 0;
  std::vector<SparseDepthEntry> entries;
  SparseSource source = SparseSource::None;

  static constexpr double kMaxFraction = 0.04;

  void validate() const {
    for (const auto& e : entries) {
      require(e.x >= 0 && e.y >= 0 && e.x < width && e.y < height, ErrorCode::InvalidArgument,
              "sparse entry outside the image");
      require(std::isfinite(e.depth) && e.depth > 0.0, ErrorCode::NonPositiveDepth, "sparse depth must be positive");
    }
    require(static_cast<double>(entries.size()) <= kMaxFraction * width * height + 1e-9, ErrorCode::InvalidArgument,
            "sparse map holds more than 4% of the pixels");
  }
};

enum class Provenance : std::uint8_t { None = 0, Sparse = 1, Rendered = 2 };

struct CombinedDepthBuffer {
  DepthMap depth;
  Image<std::uint8_t> provenance;  // Provenance values

  [[nodiscard]] int width() const noexcept { return depth.width(); }
  [[nodiscard]] int height() const noexcept { return depth.height(); }

  [[nodiscard]] std::size_t count(Provenance p) const noexcept {
    return static_cast<std::size_t>(std::count(provenance.pixels().begin(), provenance.pixels().end(),
                                                static_cast<std::uint8_t>(p)));
  }

  [[nodiscard]] double sparse_fraction() const noexcept {
    const auto valid = depth.valid_count();
    return valid == 0 ? 0.0 : static_cast<double>(count(Provenance::Sparse)) / static_cast<double>(valid);
  }
};

/// Sparse entries take their pixel first, then a square neighbourhood of `dilation` pixels
/// (earlier entries win), and remaining pixels fall back to valid rendered depth.
inline CombinedDepthBuffer combine_depth(const SparseDepthMap& sparse, const DepthMap& rendered, int dilation = 1) {
  require(dilation >= 0, ErrorCode::InvalidArgument, "dilation must be non-negative");
  if (sparse.width != rendered.width() || sparse.height != rendered.height())
    fail(ErrorCode::ResolutionMismatch, "sparse map and rendered depth differ in resolution");
  const int w = rendered.width(), h = rendered.height();
  CombinedDepthBuffer out{DepthMap(w, h), Image<std::uint8_t>(w, h, 0)};
  auto claim = [&](int x, int y, double d) {
    if (x < 0 || y < 0 || x >= w || y >= h || out.provenance(x, y) != 0) return;
    out.depth.set(x, y, d);
    if (out.depth.is_valid(x, y)) out.provenance(x, y) = static_cast<std::uint8_t>(Provenance::Sparse);
  };
  for (const auto& e : sparse.entries) claim(e.x, e.y, e.depth);
  for (const auto& e : sparse.entries)
    for (int dy = -dilation; dy <= dilation; ++dy)
      for (int dx = -dilation; dx <= dilation; ++dx) claim(e.x + dx, e.y + dy, e.depth);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (out.provenance(x, y) == 0 && rendered.is_valid(x, y)) {
        out.depth.set(x, y, rendered.depth(x, y));
        out.provenance(x, y) = static_cast<std::uint8_t>(Provenance::Rendered);
      }
  return out;
}

/// Buffer holding only rendered depth.
inline CombinedDepthBuffer rendered_only(const DepthMap& rendered) {
  return combine_depth(SparseDepthMap{rendered.width(), rendered.height(), {}, SparseSource::None}, rendered, 0);
}

/// Top-k pixels by intensity gradient magnitude among pixels with valid depth, ties broken
/// by pixel index. k is capped at 4% of the image.
inline SparseDepthMap select_sparse_points(const ImageFrame& image, const DepthMap& depth, int k = 2000,
                                           SparseSource source = SparseSource::Dataset) {
  require(k >= 0, ErrorCode::InvalidArgument, "point count must be non-negative");
  if (image.width() != depth.width() || image.height() != depth.height())
    fail(ErrorCode::ResolutionMismatch, "image and depth differ in resolution");
  const int w = depth.width(), h = depth.height();
  SparseDepthMap out{w, h, {}, source};
  const auto cap = static_cast<std::size_t>(std::floor(SparseDepthMap::kMaxFraction * w * h));
  const std::size_t want = std::min(static_cast<std::size_t>(k), cap);

  Image<float> gx, gy;
  central_gradients(image.intensity, gx, gy);
  std::vector<std::pair<float, int>> candidates;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (depth.is_valid(x, y)) candidates.emplace_back(std::hypot(gx(x, y), gy(x, y)), y * w + x);
  const auto better = [](const std::pair<float, int>& a, const std::pair<float, int>& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  };
  const std::size_t n = std::min(want, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n), candidates.end(), better);
  candidates.resize(n);
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  out.entries.reserve(n);
  for (const auto& c : candidates) {
    const int x = c.second % w, y = c.second / w;
    out.entries.push_back({x, y, depth.depth(x, y)});
  }
  return out;
}

}  // namespace mf::tracking
