#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "monofusion/common/depth_map.hpp"
#include "monofusion/common/error.hpp"

namespace mf::eval {

/// Per-image depth accuracy. Percentages in [0, 100]; abs_cm assumes depths in meters.
struct DepthMetrics {
  double abs_cm = 0.0;
  double a1 = 0.0;  // relative error below 10%
  double a2 = 0.0;  // below 1%
  double a3 = 0.0;  // below 0.1%
  double d1 = 0.0;  // max(y / y*, y* / y) < 1.25
  std::size_t n = 0;        // pixels valid in both maps
  double coverage = 0.0;    // percent of valid ground-truth pixels with a valid prediction
};

inline constexpr double kA1Threshold = 0.1;
inline constexpr double kA2Threshold = 0.01;
inline constexpr double kA3Threshold = 0.001;
inline constexpr double kD1Ratio = 1.25;

/// Metrics over pixels valid in both maps. Sums run in raster order, so results are
/// reproducible to the bit.
inline DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height())
    fail(ErrorCode::ResolutionMismatch, "prediction and ground truth differ in resolution");
  std::size_t n = 0, gt_valid = 0, c1 = 0, c2 = 0, c3 = 0, cd = 0;
  double abs_sum = 0.0;
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x) {
      if (!gt.is_valid(x, y)) continue;
      ++gt_valid;
      if (!pred.is_valid(x, y)) continue;
      const double ys = gt.depth(x, y), yp = pred.depth(x, y);
      const double err = std::abs(yp - ys);
      const double rel = err / ys;
      ++n;
      abs_sum += err;
      c1 += rel < kA1Threshold;
      c2 += rel < kA2Threshold;
      c3 += rel < kA3Threshold;
      cd += std::max(yp / ys, ys / yp) < kD1Ratio;
    }
  if (n == 0) fail(ErrorCode::NoValidPixels, "no pixel is valid in both depth maps");
  const double dn = static_cast<double>(n);
  DepthMetrics m;
  m.n = n;
  m.abs_cm = 100.0 * abs_sum / dn;
  m.a1 = 100.0 * static_cast<double>(c1) / dn;
  m.a2 = 100.0 * static_cast<double>(c2) / dn;
  m.a3 = 100.0 * static_cast<double>(c3) / dn;
  m.d1 = 100.0 * static_cast<double>(cd) / dn;
  m.coverage = 100.0 * dn / static_cast<double>(gt_valid);
  return m;
}

struct SequenceDepthReport {
  std::vector<DepthMetrics> images;
  DepthMetrics mean;  // unweighted mean over images; n is the total pixel count
};

/// Averages per-image values, so every image counts the same regardless of its pixel count.
inline SequenceDepthReport sequence_metrics(const std::vector<DepthMetrics>& images) {
  if (images.empty()) fail(ErrorCode::EmptySequence, "no per-image metrics to average");
  SequenceDepthReport r{images, {}};
  for (const auto& m : images) {
    r.mean.abs_cm += m.abs_cm;
    r.mean.a1 += m.a1;
    r.mean.a2 += m.a2;
    r.mean.a3 += m.a3;
    r.mean.d1 += m.d1;
    r.mean.coverage += m.coverage;
    r.mean.n += m.n;
  }
  const double k = static_cast<double>(images.size());
  r.mean.abs_cm /= k;
  r.mean.a1 /= k;
  r.mean.a2 /= k;
  r.mean.a3 /= k;
  r.mean.d1 /= k;
  r.mean.coverage /= k;
  return r;
}

}  // namespace mf::eval
