#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "monofusion/common/image_ops.hpp"
#include "monofusion/common/parallel.hpp"
#include "monofusion/features/features.hpp"
#include "monofusion/geometry/camera.hpp"
#include "monofusion/geometry/pose.hpp"
#include "monofusion/tracking/depth_buffer.hpp"

namespace mf::tracking {

struct TrackerConfig {
  int levels = 4;
  double huber = 0.06;           // intensity units
  int max_iterations = 20;       // per level
  double convergence = 1e-6;     // twist norm of an accepted step
  bool affine_brightness = true;
  int max_residuals = 20000;     // per level
  double min_inlier_fraction = 0.4;
  int min_depth_pixels = 200;    // at the coarsest level
  int smoothing_radius = 1;      // box filter applied to every pyramid level
  double min_relative_decrease = 1e-3;  // a level also stops once an accepted step gains less

  void validate() const {
    require(levels >= 1, ErrorCode::InvalidArgument, "tracker needs at least one level");
    require(smoothing_radius >= 0 && min_relative_decrease >= 0.0, ErrorCode::InvalidArgument,
            "smoothing radius and relative decrease must be non-negative");
    require(huber > 0.0 && convergence > 0.0, ErrorCode::InvalidArgument, "tracker thresholds must be positive");
    require(max_iterations >= 1 && max_residuals >= 1, ErrorCode::InvalidArgument,
            "iteration and residual limits must be positive");
  }
};

struct TrackingDiagnostics {
  double rmse = 0.0;            // in-bounds residuals at the finest level
  double inlier_fraction = 0.0; // |r| <= huber among all selected pixels at the finest level
  int iterations = 0;           // total over levels
  std::vector<int> level_iterations;  // coarsest first
  double affine_a = 1.0;
  double affine_b = 0.0;
  bool failed = false;
  std::string reason;
};

struct TrackingResult {
  PoseSE3 pose;  // maps reference camera coordinates into the new camera
  TrackingDiagnostics diagnostics;
};

/// One CSV row: frame_id, rmse, inlier_frac, iters, provenance_sparse_frac.
inline std::string tracking_csv_header() { return "frame_id,rmse,inlier_frac,iters,provenance_sparse_frac"; }

inline std::string tracking_csv_row(int frame_id, const TrackingDiagnostics& d, double sparse_fraction) {
  std::ostringstream s;
  s.precision(9);
  s << frame_id << ',' << d.rmse << ',' << d.inlier_fraction << ',' << d.iterations << ',' << sparse_fraction;
  return s.str();
}

namespace detail {

/// Depth pyramid level: mean of the valid children of each 2x2 cell.
inline DepthMap downsample_depth(const DepthMap& in) {
  DepthMap out(in.width() / 2, in.height() / 2);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      double sum = 0.0;
      int n = 0;
      for (int k = 0; k < 4; ++k) {
        const int sx = 2 * x + (k & 1), sy = 2 * y + (k >> 1);
        if (in.is_valid(sx, sy)) {
          sum += in.depth(sx, sy);
          ++n;
        }
      }
      if (n > 0) out.set(x, y, sum / n);
    }
  return out;
}

}  // namespace detail

/// Photometric alignment problem at one pyramid level.
class AlignmentLevel {
 public:
  static constexpr int kParams = 8;  // twist (omega, upsilon), a, b
  using Jacobian = Eigen::Matrix<double, kParams, 1>;

  AlignmentLevel(const Image<float>& ref, const DepthMap& depth, const Image<float>& target,
                 const CameraIntrinsics& intr, int max_residuals)
      : target_(target), intr_(intr) {
    std::vector<int> valid;
    for (int y = 0; y < depth.height(); ++y)
      for (int x = 0; x < depth.width(); ++x)
        if (depth.is_valid(x, y)) valid.push_back(y * depth.width() + x);
    const std::size_t stride =
        std::max<std::size_t>(1, (valid.size() + static_cast<std::size_t>(max_residuals) - 1) /
                                     static_cast<std::size_t>(max_residuals));
    for (std::size_t i = 0; i < valid.size(); i += stride) {
      const int x = valid[i] % depth.width(), y = valid[i] / depth.width();
      points_.push_back(unproject(intr, Eigen::Vector2d(x, y), depth.depth(x, y)));
      ref_values_.push_back(ref(x, y));
    }
  }

  [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
  [[nodiscard]] const Eigen::Vector3d& point(std::size_t i) const noexcept { return points_[i]; }

  /// Residual r = I_new(pi(T p)) - (a I_ref(p) + b) and, if `jac` is given, its derivative
  /// w.r.t. a left-multiplied twist on T and the affine parameters. False when the warped
  /// point leaves the image or falls behind the camera.
  bool evaluate(std::size_t i, const PoseSE3& t, double a, double b, double& residual, Jacobian* jac) const {
    const Eigen::Vector3d p = t * points_[i];
    if (!(p.z() > 1e-9)) return false;
    const double iz = 1.0 / p.z();
    const double u = intr_.fx * p.x() * iz + intr_.cx;
    const double v = intr_.fy * p.y() * iz + intr_.cy;
    const int w = target_.width(), h = target_.height();
    if (!(u >= 0.0 && v >= 0.0 && u <= w - 1 && v <= h - 1)) return false;
    const int x0 = std::min(static_cast<int>(u), w - 2), y0 = std::min(static_cast<int>(v), h - 2);
    const double ax = u - x0, ay = v - y0;
    const double f00 = target_(x0, y0), f01 = target_(x0 + 1, y0);
    const double f10 = target_(x0, y0 + 1), f11 = target_(x0 + 1, y0 + 1);
    const double top = f00 + ax * (f01 - f00), bot = f10 + ax * (f11 - f10);
    const double value = top + ay * (bot - top);
    const double ref = ref_values_[i];
    residual = value - (a * ref + b);
    if (jac) {
      const double gu = (1.0 - ay) * (f01 - f00) + ay * (f11 - f10);
      const double gv = bot - top;
      // d(u, v)/dp
      const double du_dx = intr_.fx * iz, du_dz = -intr_.fx * p.x() * iz * iz;
      const double dv_dy = intr_.fy * iz, dv_dz = -intr_.fy * p.y() * iz * iz;
      const Eigen::Vector3d dr_dp(gu * du_dx, gv * dv_dy, gu * du_dz + gv * dv_dz);
      // d(exp(delta) p)/d(omega) = -[p]x, d/d(upsilon) = I
      const Eigen::Vector3d dr_domega = p.cross(dr_dp);
      (*jac) << dr_domega, dr_dp, -ref, -1.0;
    }
    return true;
  }

 private:
  const Image<float>& target_;
  CameraIntrinsics intr_;
  std::vector<Eigen::Vector3d> points_;
  std::vector<float> ref_values_;
};

namespace detail {

struct NormalEquations {
  Eigen::Matrix<double, 8, 8> h = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> g = Eigen::Matrix<double, 8, 1>::Zero();
  double energy = 0.0;
  double sq_sum = 0.0;
  std::size_t in_bounds = 0;
  std::size_t inliers = 0;
  std::size_t outside = 0;
};

inline double huber_cost(double r, double k) noexcept {
  const double a = std::abs(r);
  return a <= k ? 0.5 * r * r : k * (a - 0.5 * k);
}

/// Accumulates the robust normal equations in fixed chunks summed in order, so the result
/// does not depend on the worker count.
inline NormalEquations accumulate(const AlignmentLevel& level, const PoseSE3& t, double a, double b, double k,
                                  bool with_jacobian) {
  constexpr std::size_t kChunk = 1024;
  const std::size_t n = level.size();
  const int chunks = static_cast<int>((n + kChunk - 1) / kChunk);
  std::vector<NormalEquations> partial(static_cast<std::size_t>(chunks));
  // Out-of-view points cost as much as a residual of 1.5 huber widths, so leaving the image
  // is never cheaper than a poor match.
  const double outside_cost = huber_cost(1.5 * k, k);
  parallel_for(0, chunks, [&](int c) {
    NormalEquations& ne = partial[static_cast<std::size_t>(c)];
    AlignmentLevel::Jacobian j;
    const std::size_t end = std::min(n, (static_cast<std::size_t>(c) + 1) * kChunk);
    for (std::size_t i = static_cast<std::size_t>(c) * kChunk; i < end; ++i) {
      double r = 0.0;
      if (!level.evaluate(i, t, a, b, r, with_jacobian ? &j : nullptr)) {
        ne.energy += outside_cost;
        ++ne.outside;
        continue;
      }
      ++ne.in_bounds;
      ne.sq_sum += r * r;
      const double abs_r = std::abs(r);
      if (abs_r <= k) ++ne.inliers;
      ne.energy += huber_cost(r, k);
      if (with_jacobian) {
        const double w = abs_r <= k ? 1.0 : k / abs_r;
        ne.h.selfadjointView<Eigen::Lower>().rankUpdate(j, w);
        ne.g += w * r * j;
      }
    }
  });
  NormalEquations total;
  for (const auto& p : partial) {
    total.h += p.h;
    total.g += p.g;
    total.energy += p.energy;
    total.sq_sum += p.sq_sum;
    total.in_bounds += p.in_bounds;
    total.inliers += p.inliers;
    total.outside += p.outside;
  }
  total.h = total.h.selfadjointView<Eigen::Lower>();
  return total;
}

}  // namespace detail

/// Direct two-frame alignment: estimates the transform from reference to new camera
/// coordinates (and affine brightness a, b) by coarse-to-fine robust Gauss-Newton with
/// Levenberg damping on rejected steps.
inline TrackingResult track_frame(const ImageFrame& ref_image, const CombinedDepthBuffer& ref_depth,
                                  const ImageFrame& new_image, const PoseSE3& init, const CameraIntrinsics& intr,
                                  const TrackerConfig& cfg = {}) {
  cfg.validate();
  intr.validate();
  if (!intr.same_resolution(ref_image.width(), ref_image.height()) ||
      !intr.same_resolution(new_image.width(), new_image.height()) ||
      !intr.same_resolution(ref_depth.width(), ref_depth.height()))
    fail(ErrorCode::ResolutionMismatch, "tracking inputs must match the intrinsics resolution");

  const int levels = cfg.levels;
  std::vector<Image<float>> ref_pyr{ref_image.intensity}, new_pyr{new_image.intensity};
  std::vector<DepthMap> depth_pyr{ref_depth.depth};
  std::vector<CameraIntrinsics> intr_pyr{intr};
  for (int l = 1; l < levels; ++l) {
    require(ref_pyr.back().width() >= 16 && ref_pyr.back().height() >= 16, ErrorCode::InvalidArgument,
            "image too small for the requested pyramid levels");
    ref_pyr.push_back(downsample_area2(ref_pyr.back()));
    new_pyr.push_back(downsample_area2(new_pyr.back()));
    depth_pyr.push_back(detail::downsample_depth(depth_pyr.back()));
    intr_pyr.push_back(intr.downsampled(1 << l));
  }
  // Box-smoothing every level widens the basin of convergence on fine texture.
  if (cfg.smoothing_radius > 0)
    for (std::size_t l = 0; l < ref_pyr.size(); ++l) {
      ref_pyr[l] = box_filter(ref_pyr[l], cfg.smoothing_radius);
      new_pyr[l] = box_filter(new_pyr[l], cfg.smoothing_radius);
    }
  const auto coarse_valid = depth_pyr.back().valid_count();
  if (coarse_valid < static_cast<std::size_t>(cfg.min_depth_pixels))
    fail(ErrorCode::InsufficientDepth, "only " + std::to_string(coarse_valid) +
                                           " valid depth pixels at the coarsest level, need " +
                                           std::to_string(cfg.min_depth_pixels));

  TrackingResult result{init, {}};
  auto& diag = result.diagnostics;
  PoseSE3 pose = init;
  double a = 1.0, b = 0.0;
  const double k = cfg.huber;
  const std::array<double, 8> lambdas{0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2};
  bool any_accepted = false;
  bool any_rejected_everywhere = false;

  for (int l = levels - 1; l >= 0; --l) {
    const std::size_t li = static_cast<std::size_t>(l);
    AlignmentLevel level(ref_pyr[li], depth_pyr[li], new_pyr[li], intr_pyr[li], cfg.max_residuals);
    int iters = 0;
    auto ne = detail::accumulate(level, pose, a, b, k, true);
    for (; iters < cfg.max_iterations; ++iters) {
      const int dim = cfg.affine_brightness ? 8 : 6;
      const Eigen::MatrixXd hp = ne.h.topLeftCorner(dim, dim);
      const Eigen::VectorXd gp = ne.g.head(dim);

      // Rank check on the pose block: flat images give no constraint.
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(ne.h.topLeftCorner<6, 6>());
      const double top_ev = eig.eigenvalues().maxCoeff();
      if (!(top_ev > 0.0) || eig.eigenvalues().minCoeff() <= 1e-12 * top_ev) {
        diag.failed = true;
        diag.reason = "degenerate photometric system";
        break;
      }

      const double prev_energy = ne.energy;
      bool accepted = false;
      Eigen::VectorXd step;
      for (double lambda : lambdas) {
        Eigen::MatrixXd damped = hp;
        damped.diagonal() += lambda * hp.diagonal();
        step = damped.ldlt().solve(-gp);
        if (!step.allFinite()) continue;
        Vector6d twist = step.head<6>();
        const PoseSE3 candidate = se3_exp(twist) * pose;
        const double ca = cfg.affine_brightness ? a + step(6) : a;
        const double cb = cfg.affine_brightness ? b + step(7) : b;
        auto trial = detail::accumulate(level, candidate, ca, cb, k, true);
        if (trial.energy <= ne.energy) {
          pose = candidate;
          a = ca;
          b = cb;
          ne = std::move(trial);
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        if (!any_accepted) any_rejected_everywhere = true;
        break;
      }
      any_accepted = true;
      const bool small_step = step.head<6>().norm() < cfg.convergence;
      const bool small_gain = prev_energy - ne.energy <= cfg.min_relative_decrease * prev_energy;
      if (small_step || small_gain) {
        ++iters;
        break;
      }
    }
    diag.level_iterations.push_back(iters);
    diag.iterations += iters;
    if (diag.failed) break;
    if (l == 0) {
      diag.rmse = ne.in_bounds ? std::sqrt(ne.sq_sum / static_cast<double>(ne.in_bounds)) : 0.0;
      diag.inlier_fraction = level.size() ? static_cast<double>(ne.inliers) / static_cast<double>(level.size()) : 0.0;
    }
  }

  if (!diag.failed && any_rejected_everywhere && !any_accepted && diag.inlier_fraction < cfg.min_inlier_fraction)
    fail(ErrorCode::Diverged, "photometric error increased at every damping level");
  if (!diag.failed && diag.inlier_fraction < cfg.min_inlier_fraction) {
    diag.failed = true;
    diag.reason = "inlier fraction below threshold";
  }
  diag.affine_a = a;
  diag.affine_b = b;
  result.pose = diag.failed ? init : pose;
  return result;
}

}  // namespace mf::tracking
