#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "monofusion/common/image.hpp"
#include "monofusion/common/png_io.hpp"
#include "monofusion/common/tensor_io.hpp"

namespace mf {

/// Depth in meters (or model units) with a validity mask. Invalid pixels hold 0.
struct DepthMap {
  Image<double> depth;
  Image<std::uint8_t> valid;
  Image<float> confidence;  // empty when not produced

  DepthMap() = default;
  DepthMap(int width, int height) : depth(width, height, 0.0), valid(width, height, 0) {}

  [[nodiscard]] int width() const noexcept { return depth.width(); }
  [[nodiscard]] int height() const noexcept { return depth.height(); }
  [[nodiscard]] bool has_confidence() const noexcept { return !confidence.empty(); }

  [[nodiscard]] bool is_valid(int x, int y) const noexcept { return valid(x, y) != 0; }

  void set(int x, int y, double d) noexcept {
    if (std::isfinite(d) && d > 0.0) {
      depth(x, y) = d;
      valid(x, y) = 1;
    } else {
      invalidate(x, y);
    }
  }

  void invalidate(int x, int y) noexcept {
    depth(x, y) = 0.0;
    valid(x, y) = 0;
  }

  [[nodiscard]] std::size_t valid_count() const noexcept {
    std::size_t n = 0;
    for (auto v : valid.pixels()) n += v != 0;
    return n;
  }

  [[nodiscard]] double max_valid_depth() const noexcept {
    double m = 0.0;
    for (int y = 0; y < height(); ++y)
      for (int x = 0; x < width(); ++x)
        if (valid(x, y)) m = std::max(m, depth(x, y));
    return m;
  }
};

/// TUM convention: 16-bit PNG, value = depth * 5000, 0 = invalid.
inline constexpr double kDepthPngScale = 5000.0;

inline Image<std::uint16_t> encode_depth_png(const DepthMap& d) {
  Image<std::uint16_t> out(d.width(), d.height(), 0);
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x) {
      if (!d.is_valid(x, y)) continue;
      const double q = std::round(d.depth(x, y) * kDepthPngScale);
      // Depths beyond the 16-bit range cannot be represented and are written as invalid.
      if (q >= 1.0 && q <= std::numeric_limits<std::uint16_t>::max())
        out(x, y) = static_cast<std::uint16_t>(q);
    }
  return out;
}

inline DepthMap decode_depth_png(const Image<std::uint16_t>& raw) {
  DepthMap d(raw.width(), raw.height());
  for (int y = 0; y < raw.height(); ++y)
    for (int x = 0; x < raw.width(); ++x)
      if (raw(x, y) != 0) d.set(x, y, raw(x, y) / kDepthPngScale);
  return d;
}

inline void write_depth_png(const std::string& path, const DepthMap& d) {
  png::write_gray16(path, encode_depth_png(d));
}

inline DepthMap read_depth_png(const std::string& path) {
  return decode_depth_png(png::read_gray16(path));
}

/// Float32 export in the tensor container (one stage, one channel). Invalid pixels are 0.
inline void write_depth_float(const std::string& path, const DepthMap& d) {
  FloatTensor3 t({1, d.height(), d.width()});
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x)
      t(0, y, x) = d.is_valid(x, y) ? static_cast<float>(d.depth(x, y)) : 0.f;
  write_tensor_container(path, {t});
}

inline DepthMap read_depth_float(const std::string& path) {
  const auto stages = read_tensor_container(path);
  require(stages.size() == 1 && stages[0].dim(0) == 1, ErrorCode::FormatError,
          "depth container must hold one single-channel stage: " + path);
  const auto& t = stages[0];
  DepthMap d(t.dim(2), t.dim(1));
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x)
      if (t(0, y, x) > 0.f) d.set(x, y, t(0, y, x));
  return d;
}

}  // namespace mf
