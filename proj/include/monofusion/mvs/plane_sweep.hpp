#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "monofusion/common/depth_map.hpp"
#include "monofusion/common/error.hpp"
#include "monofusion/common/parallel.hpp"
#include "monofusion/mvs/types.hpp"

namespace mf::mvs {

// ---------------------------------------------------------------------------------------------
// Depth hypotheses

/// Identical uniform ladder d_min + k (d_max - d_min) / (D - 1) at every pixel.
inline DepthHypotheses hypotheses_uniform(int planes, double d_min, double d_max, int height, int width) {
  require(planes >= 2, ErrorCode::InvalidArgument, "need at least two planes");
  DepthHypotheses h{Tensor<double, 3>({planes, height, width})};
  const double step = (d_max - d_min) / (planes - 1);
  for (int d = 0; d < planes; ++d) {
    const double value = d == planes - 1 ? d_max : d_min + d * step;
    std::fill(h.depths.slice(d).begin(), h.depths.slice(d).end(), value);
  }
  return h;
}

inline DepthHypotheses hypotheses_stage1(const MvsConfig& cfg, int height, int width) {
  return hypotheses_uniform(cfg.planes[0], cfg.d_min, cfg.d_max, height, width);
}

/// D planes centered on `center` with the given spacing, shifted up if needed so the
/// first plane stays at or above kMinDepthFloor.
inline void centered_ladder(double center, double interval, std::span<double> out) {
  const int planes = static_cast<int>(out.size());
  double first = center - 0.5 * (planes - 1) * interval;
  if (first < kMinDepthFloor) first = kMinDepthFloor;
  for (int k = 0; k < planes; ++k) out[k] = first + k * interval;
}

/// Narrow ladders around the 2x nearest-neighbor upsampled depth of the previous stage.
/// Pixels without a valid prior get the uniform [d_min, d_max] ladder with D planes.
inline DepthHypotheses hypotheses_refined(const DepthMap& prev, const MvsConfig& cfg, int stage) {
  require(stage == 2 || stage == 3, ErrorCode::InvalidArgument, "refined hypotheses exist for stages 2 and 3");
  if (prev.valid_count() == 0) fail(ErrorCode::EmptyPrior, "previous stage produced no valid depth");
  const int planes = cfg.planes[static_cast<std::size_t>(stage - 1)];
  const double interval = cfg.stage_interval(stage);
  const int h = prev.height() * 2, w = prev.width() * 2;
  DepthHypotheses out{Tensor<double, 3>({planes, h, w})};
  const double fallback_step = (cfg.d_max - cfg.d_min) / (planes - 1);
  std::vector<double> ladder(static_cast<std::size_t>(planes));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int px = x / 2, py = y / 2;
      if (prev.is_valid(px, py)) {
        centered_ladder(prev.depth(px, py), interval, ladder);
      } else {
        for (int k = 0; k < planes; ++k) ladder[k] = cfg.d_min + k * fallback_step;
      }
      for (int k = 0; k < planes; ++k) out.depths(k, y, x) = ladder[k];
    }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Warping

/// Warps a view's feature map onto the reference hypotheses. `ref_to_view` maps reference
/// camera coordinates into the view's camera. Samples outside the view (bilinear support) or
/// behind it are invalid with value 0.
inline FeatureVolume warp_features(const Tensor<float, 3>& features, const PoseSE3& ref_to_view,
                                   const CameraIntrinsics& intr, const DepthHypotheses& hyp) {
  const int channels = features.dim(0), fh = features.dim(1), fw = features.dim(2);
  const int planes = hyp.planes(), h = hyp.height(), w = hyp.width();
  FeatureVolume vol{Tensor<float, 4>({channels, planes, h, w}, 0.f), Tensor<std::uint8_t, 3>({planes, h, w}, 0)};

  if (ref_to_view.is_identity() && fh == h && fw == w) {
    for (int c = 0; c < channels; ++c)
      for (int d = 0; d < planes; ++d)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) vol.values(c, d, y, x) = features(c, y, x);
    std::fill(vol.valid.values().begin(), vol.valid.values().end(), std::uint8_t{1});
    return vol;
  }

  // Rotated pixel rays (reference z = 1), computed once for all planes.
  std::vector<Eigen::Vector3d> rays(static_cast<std::size_t>(h) * w);
  const Eigen::Matrix3d& r = ref_to_view.rotation();
  const Eigen::Vector3d& t = ref_to_view.translation();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) rays[static_cast<std::size_t>(y) * w + x] = r * pixel_ray(intr, x, y);

  const double umax = fw - 1, vmax = fh - 1;
  constexpr double kEdgeTolerance = 1e-9;
  parallel_for(0, planes, [&](int d) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const Eigen::Vector3d p = hyp.depths(d, y, x) * rays[static_cast<std::size_t>(y) * w + x] + t;
        if (!(p.z() > 1e-9)) continue;
        double u = intr.fx * p.x() / p.z() + intr.cx;
        double v = intr.fy * p.y() / p.z() + intr.cy;
        if (u < -kEdgeTolerance || v < -kEdgeTolerance || u > umax + kEdgeTolerance || v > vmax + kEdgeTolerance)
          continue;
        u = std::clamp(u, 0.0, umax);
        v = std::clamp(v, 0.0, vmax);
        const int x0 = std::min(static_cast<int>(u), fw - 2);
        const int y0 = std::min(static_cast<int>(v), fh - 2);
        const double ax = u - x0, ay = v - y0;
        for (int c = 0; c < channels; ++c) {
          const double f00 = features(c, y0, x0), f01 = features(c, y0, x0 + 1);
          const double f10 = features(c, y0 + 1, x0), f11 = features(c, y0 + 1, x0 + 1);
          const double top = f00 + ax * (f01 - f00);
          const double bot = f10 + ax * (f11 - f10);
          vol.values(c, d, y, x) = static_cast<float>(top + ay * (bot - top));
        }
        vol.valid(d, y, x) = 1;
      }
  });
  return vol;
}

// ---------------------------------------------------------------------------------------------
// Cost construction

namespace detail {

inline void check_volumes(std::span<const FeatureVolume> volumes) {
  if (volumes.size() < 2) fail(ErrorCode::TooFewViews, "need at least two feature volumes");
  require(volumes.size() < 256, ErrorCode::InvalidArgument, "too many views");
  const auto& shape = volumes.front().values.shape();
  for (const auto& v : volumes)
    if (v.values.shape() != shape) fail(ErrorCode::ShapeMismatch, "feature volumes differ in shape");
}

/// Channel mean of (a - b)^2 at one voxel.
inline double channel_sq_diff(const FeatureVolume& a, const FeatureVolume& b, int d, int y, int x) {
  const int channels = a.channels();
  double s = 0.0;
  for (int c = 0; c < channels; ++c) {
    const double diff = static_cast<double>(a.values(c, d, y, x)) - b.values(c, d, y, x);
    s += diff * diff;
  }
  return s / channels;
}

}  // namespace detail

/// Variance across valid views, averaged over channels. Voxels with fewer than two valid
/// views get `max_cost`.
inline CostVolume variance_cost(std::span<const FeatureVolume> volumes, double max_cost = 4.0) {
  detail::check_volumes(volumes);
  const auto& ref = volumes.front();
  const int channels = ref.channels(), planes = ref.planes(), h = ref.height(), w = ref.width();
  CostVolume cost{Tensor<double, 3>({planes, h, w}, max_cost), Tensor<std::uint8_t, 3>({planes, h, w}, 0), max_cost};
  const int n = static_cast<int>(volumes.size());
  parallel_for(0, planes, [&](int d) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        int count = 0;
        for (int i = 0; i < n; ++i) count += volumes[i].valid(d, y, x);
        cost.view_count(d, y, x) = static_cast<std::uint8_t>(count);
        if (count < 2) continue;
        double total = 0.0;
        for (int c = 0; c < channels; ++c) {
          double mean = 0.0;
          for (int i = 0; i < n; ++i)
            if (volumes[i].valid(d, y, x)) mean += volumes[i].values(c, d, y, x);
          mean /= count;
          double var = 0.0;
          for (int i = 0; i < n; ++i)
            if (volumes[i].valid(d, y, x)) {
              const double diff = volumes[i].values(c, d, y, x) - mean;
              var += diff * diff;
            }
          total += var / count;
        }
        cost.values(d, y, x) = total / channels;
      }
  });
  return cost;
}

/// Per-view error against the reference, e_i = channel mean of (V_i - V_ref)^2.
/// Entries for the reference view or invalid voxels are NaN.
inline std::vector<Tensor<double, 3>> view_errors(std::span<const FeatureVolume> volumes, int ref_index) {
  detail::check_volumes(volumes);
  const auto& ref = volumes[static_cast<std::size_t>(ref_index)];
  const int planes = ref.planes(), h = ref.height(), w = ref.width();
  const int n = static_cast<int>(volumes.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Tensor<double, 3>> errors(static_cast<std::size_t>(n), Tensor<double, 3>({planes, h, w}, nan));
  parallel_for(0, planes, [&](int d) {
    for (int i = 0; i < n; ++i) {
      if (i == ref_index) continue;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (volumes[i].valid(d, y, x) && ref.valid(d, y, x))
            errors[i](d, y, x) = detail::channel_sq_diff(volumes[i], ref, d, y, x);
    }
  });
  return errors;
}

/// Median of all finite per-view errors; the default softmin temperature.
inline double median_view_error(const std::vector<Tensor<double, 3>>& errors) {
  std::vector<double> all;
  for (const auto& e : errors)
    for (double v : e.values())
      if (std::isfinite(v)) all.push_back(v);
  if (all.empty()) return 1.0;
  const auto mid = all.begin() + static_cast<std::ptrdiff_t>(all.size() / 2);
  std::nth_element(all.begin(), mid, all.end());
  return *mid;
}

/// View aggregation weights W_i with shape (D, H, W) (the singleton channel axis is dropped).
/// 1 + W_i = (n - 1) * softmin over valid non-reference views of e_i / tau, so equal errors
/// give W_i = 0 and the factors 1 + W_i of valid views sum to n - 1. Invalid views and the
/// reference get 1 + W_i = 0.
inline std::vector<Tensor<double, 3>> aggregation_weights(std::span<const FeatureVolume> volumes, int ref_index,
                                                          std::optional<double> temperature = std::nullopt) {
  const auto errors = view_errors(volumes, ref_index);
  const auto& ref = volumes[static_cast<std::size_t>(ref_index)];
  const int planes = ref.planes(), h = ref.height(), w = ref.width();
  const int n = static_cast<int>(volumes.size());
  const double tau = std::max(temperature ? *temperature : median_view_error(errors), 1e-12);

  std::vector<Tensor<double, 3>> weights(static_cast<std::size_t>(n), Tensor<double, 3>({planes, h, w}, -1.0));
  parallel_for(0, planes, [&](int d) {
    std::vector<double> factor(static_cast<std::size_t>(n));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
          const double e = errors[i](d, y, x);
          if (std::isfinite(e)) best = std::min(best, e);
        }
        if (!std::isfinite(best)) continue;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
          const double e = errors[i](d, y, x);
          factor[i] = std::isfinite(e) ? std::exp(-(e - best) / tau) : 0.0;
          sum += factor[i];
        }
        for (int i = 0; i < n; ++i) {
          if (i == ref_index) continue;
          weights[i](d, y, x) = (n - 1) * factor[i] / sum - 1.0;
        }
      }
  });
  return weights;
}

/// Weighted reference-relative cost: channel mean of sum_{i != ref} (1 + W_i) (V_i - V_ref)^2 / (n - 1).
/// Voxels where no non-reference view is valid get `max_cost`.
inline CostVolume aggregated_cost(std::span<const FeatureVolume> volumes, const std::vector<Tensor<double, 3>>& weights,
                                  int ref_index, double max_cost = 4.0) {
  detail::check_volumes(volumes);
  require(weights.size() == volumes.size(), ErrorCode::ShapeMismatch, "one weight volume per view required");
  const auto& ref = volumes[static_cast<std::size_t>(ref_index)];
  const int planes = ref.planes(), h = ref.height(), w = ref.width();
  const int n = static_cast<int>(volumes.size());
  CostVolume cost{Tensor<double, 3>({planes, h, w}, max_cost), Tensor<std::uint8_t, 3>({planes, h, w}, 0), max_cost};
  parallel_for(0, planes, [&](int d) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!ref.valid(d, y, x)) continue;
        int count = 1;
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
          if (i == ref_index || !volumes[i].valid(d, y, x)) continue;
          ++count;
          total += (1.0 + weights[i](d, y, x)) * detail::channel_sq_diff(volumes[i], ref, d, y, x);
        }
        cost.view_count(d, y, x) = static_cast<std::uint8_t>(count);
        if (count >= 2) cost.values(d, y, x) = total / (n - 1);
      }
  });
  return cost;
}

// ---------------------------------------------------------------------------------------------
// Regularization

/// Separable box filter of half-width `radius` along W and H and `depth_radius` along D (same as
/// `radius` when negative). Each output is the mean over valid voxels inside its window; invalid
/// voxels are left untouched.
inline CostVolume regularize_cost(const CostVolume& in, int radius, int depth_radius = -1) {
  require(radius >= 0, ErrorCode::InvalidArgument, "radius must be non-negative");
  if (depth_radius < 0) depth_radius = radius;
  if (radius == 0 && depth_radius == 0) return in;
  CostVolume out = in;
  const int planes = in.planes(), h = in.height(), w = in.width();
  Tensor<double, 3> src = in.values;

  // axis 0 = x, 1 = y, 2 = plane
  for (int axis = 0; axis < 3; ++axis) {
    const int len = axis == 0 ? w : axis == 1 ? h : planes;
    const int r = axis == 2 ? depth_radius : radius;
    if (r == 0) continue;
    auto filter_line = [&](int d, int y, int x) {
      // (d, y, x) is the line origin with the filtered coordinate at zero.
      for (int k = 0; k < len; ++k) {
        const int dd = axis == 2 ? k : d, yy = axis == 1 ? k : y, xx = axis == 0 ? k : x;
        if (!in.valid(dd, yy, xx)) continue;
        double sum = 0.0;
        int count = 0;
        const int lo = std::max(0, k - r), hi = std::min(len - 1, k + r);
        for (int j = lo; j <= hi; ++j) {
          const int d2 = axis == 2 ? j : d, y2 = axis == 1 ? j : y, x2 = axis == 0 ? j : x;
          if (!in.valid(d2, y2, x2)) continue;
          sum += src(d2, y2, x2);
          ++count;
        }
        out.values(dd, yy, xx) = sum / count;
      }
    };
    if (axis == 2) {
      parallel_for(0, h, [&](int y) {
        for (int x = 0; x < w; ++x) filter_line(0, y, x);
      });
    } else {
      parallel_for(0, planes, [&](int d) {
        if (axis == 0)
          for (int y = 0; y < h; ++y) filter_line(d, y, 0);
        else
          for (int x = 0; x < w; ++x) filter_line(d, 0, x);
      });
    }
    src = out.values;
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Probability and depth

/// Softmax over planes of -C / temperature; invalid voxels enter as -max_cost / temperature.
inline ProbabilityVolume cost_to_probability(const CostVolume& cost, double temperature) {
  require(temperature > 0.0, ErrorCode::InvalidArgument, "temperature must be positive");
  const int planes = cost.planes(), h = cost.height(), w = cost.width();
  ProbabilityVolume p{Tensor<double, 3>({planes, h, w}, 0.0)};
  parallel_for(0, h, [&](int y) {
    std::vector<double> logits(static_cast<std::size_t>(planes));
    for (int x = 0; x < w; ++x) {
      double top = -std::numeric_limits<double>::infinity();
      for (int d = 0; d < planes; ++d) {
        const double c = cost.valid(d, y, x) ? cost.values(d, y, x) : cost.max_cost;
        logits[d] = -c / temperature;
        top = std::max(top, logits[d]);
      }
      double sum = 0.0;
      for (int d = 0; d < planes; ++d) {
        logits[d] = std::exp(logits[d] - top);
        sum += logits[d];
      }
      for (int d = 0; d < planes; ++d) p.values(d, y, x) = logits[d] / sum;
    }
  });
  return p;
}

/// Expected depth per pixel, clamped to the pixel's hypothesis range. Pixels whose largest
/// plane probability is below `confidence_floor` are invalid. Confidence holds that maximum.
inline DepthMap expected_depth(const ProbabilityVolume& prob, const DepthHypotheses& hyp, double confidence_floor = 0.0) {
  require(prob.values.shape() == hyp.depths.shape(), ErrorCode::ShapeMismatch,
          "probability and hypothesis volumes differ in shape");
  const int planes = prob.planes(), h = prob.height(), w = prob.width();
  DepthMap out(w, h);
  out.confidence = Image<float>(w, h, 0.f);
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      double value = 0.0, peak = 0.0;
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int d = 0; d < planes; ++d) {
        const double pd = prob.values(d, y, x), hd = hyp.depths(d, y, x);
        value += pd * hd;
        peak = std::max(peak, pd);
        lo = std::min(lo, hd);
        hi = std::max(hi, hd);
      }
      value = std::clamp(value, lo, hi);
      out.confidence(x, y) = static_cast<float>(peak);
      if (peak >= confidence_floor) out.set(x, y, value);
    }
  });
  return out;
}

}  // namespace mf::mvs
