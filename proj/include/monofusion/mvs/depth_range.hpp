#pragma once

#include <optional>
#include <utility>

#include "monofusion/common/error.hpp"

namespace mf::mvs {

struct DepthRange {
  double d_min = 0.01;
  double d_max = 10.0;
};

/// Depth range for successive MVS calls when the scene scale is not known in advance:
/// the first call spans ten times the mean sparse depth, every later call 1.5 times the
/// largest depth the previous call produced. The lower bound stays fixed.
class DepthRangeSchedule {
 public:
  static constexpr double kMinDepth = 0.01;
  static constexpr double kInitialFactor = 10.0;
  static constexpr double kGrowthFactor = 1.5;

  [[nodiscard]] bool initialized() const noexcept { return initialized_; }

  DepthRange next(std::optional<double> sparse_mean_depth, std::optional<double> prev_estimated_max) {
    if (!initialized_) {
      if (!sparse_mean_depth || !(*sparse_mean_depth > 0.0))
        fail(ErrorCode::NonPositiveInput, "first depth range needs a positive mean sparse depth");
      initialized_ = true;
      return {kMinDepth, kInitialFactor * *sparse_mean_depth};
    }
    if (!prev_estimated_max || !(*prev_estimated_max > 0.0))
      fail(ErrorCode::NonPositiveInput, "depth range update needs a positive previous maximum depth");
    return {kMinDepth, kGrowthFactor * *prev_estimated_max};
  }

 private:
  bool initialized_ = false;
};

/// Stateless form: `first_call` selects which rule applies.
inline DepthRange depth_range_schedule(bool first_call, double sparse_mean_depth, double prev_estimated_max) {
  DepthRangeSchedule s;
  if (first_call) return s.next(sparse_mean_depth, std::nullopt);
  s.next(1.0, std::nullopt);
  return s.next(std::nullopt, prev_estimated_max);
}

}  // namespace mf::mvs
