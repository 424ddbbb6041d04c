#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace mf {

/// Row-major 2D grid. Integer coordinates address pixel centers.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, const T& fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
    assert(width >= 0 && height >= 0);
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] bool in_bounds(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T& operator()(int x, int y) noexcept {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const noexcept {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  T* row(int y) noexcept { return data_.data() + static_cast<std::size_t>(y) * width_; }
  const T* row(int y) const noexcept { return data_.data() + static_cast<std::size_t>(y) * width_; }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

struct Rgb {
  float r = 0.f;
  float g = 0.f;
  float b = 0.f;

  bool operator==(const Rgb&) const = default;
};

inline float luminance(const Rgb& c) noexcept {
  return 0.299f * c.r + 0.587f * c.g + 0.114f * c.b;
}

}  // namespace mf
