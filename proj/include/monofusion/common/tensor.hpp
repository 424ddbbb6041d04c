#pragma once

#include <array>
#include <cassert>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace mf {

/// Dense row-major tensor with a fixed rank. The last index is contiguous.
template <typename T, std::size_t Rank>
class Tensor {
 public:
  using Shape = std::array<int, Rank>;

  Tensor() { shape_.fill(0); }
  explicit Tensor(const Shape& shape, const T& fill = T{}) : shape_(shape) {
    data_.assign(element_count(shape), fill);
  }

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] int dim(std::size_t axis) const noexcept { return shape_[axis]; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  template <typename... Idx>
  T& operator()(Idx... idx) noexcept {
    static_assert(sizeof...(Idx) == Rank);
    return data_[offset({static_cast<int>(idx)...})];
  }
  template <typename... Idx>
  const T& operator()(Idx... idx) const noexcept {
    static_assert(sizeof...(Idx) == Rank);
    return data_[offset({static_cast<int>(idx)...})];
  }

  [[nodiscard]] std::size_t offset(const std::array<int, Rank>& idx) const noexcept {
    std::size_t off = 0;
    for (std::size_t a = 0; a < Rank; ++a) {
      assert(idx[a] >= 0 && idx[a] < shape_[a]);
      off = off * static_cast<std::size_t>(shape_[a]) + static_cast<std::size_t>(idx[a]);
    }
    return off;
  }

  /// Contiguous slab for a fixed leading index.
  std::span<T> slice(int i0) noexcept {
    const std::size_t n = data_.size() / static_cast<std::size_t>(shape_[0]);
    return {data_.data() + n * static_cast<std::size_t>(i0), n};
  }
  std::span<const T> slice(int i0) const noexcept {
    const std::size_t n = data_.size() / static_cast<std::size_t>(shape_[0]);
    return {data_.data() + n * static_cast<std::size_t>(i0), n};
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  bool operator==(const Tensor&) const = default;

  static std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

}  // namespace mf
