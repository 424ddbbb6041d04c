#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "monofusion/common/error.hpp"
#include "monofusion/geometry/alignment.hpp"
#include "monofusion/geometry/trajectory_io.hpp"

namespace mf::eval {

inline constexpr double kDefaultAssociationTolerance = 0.01;  // seconds

struct PoseMatch {
  std::size_t estimated = 0;
  std::size_t ground_truth = 0;
};

/// Nearest ground-truth timestamp within `tolerance` for every estimated pose, in estimated
/// order; a ground-truth pose is used at most once.
inline std::vector<PoseMatch> associate(const Trajectory& estimated, const Trajectory& gt,
                                        double tolerance = kDefaultAssociationTolerance) {
  std::vector<std::size_t> order(gt.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gt[a].timestamp < gt[b].timestamp; });
  std::vector<bool> used(gt.size(), false);
  std::vector<PoseMatch> out;
  for (std::size_t e = 0; e < estimated.size(); ++e) {
    const double t = estimated[e].timestamp;
    auto it = std::lower_bound(order.begin(), order.end(), t,
                               [&](std::size_t g, double v) { return gt[g].timestamp < v; });
    std::size_t best = gt.size();
    double best_dt = tolerance;
    // Scan outwards while candidates stay within the tolerance.
    for (auto r = it; r != order.end() && gt[*r].timestamp - t <= best_dt; ++r) {
      if (used[*r]) continue;
      best = *r;
      best_dt = gt[*r].timestamp - t;
      break;
    }
    for (auto l = it; l != order.begin();) {
      --l;
      const double dt = t - gt[*l].timestamp;
      if (dt > best_dt) break;
      if (used[*l]) continue;
      if (best == gt.size() || dt < best_dt) {  // ties go to the later stamp
        best = *l;
        best_dt = dt;
      }
      break;
    }
    if (best != gt.size()) {
      used[best] = true;
      out.push_back({e, best});
    }
  }
  return out;
}

struct TrajectoryReport {
  double ate_rmse = 0.0;
  AlignmentMode mode = AlignmentMode::Sim3;
  Sim3 alignment;                 // maps estimated positions onto ground truth
  std::vector<PoseMatch> matches;
  std::vector<double> residuals;  // translational error per match
};

/// Absolute trajectory error: camera centers are aligned with a closed-form similarity
/// (scale fixed to 1 in SE3 mode) and the RMSE of the remaining offsets is reported.
inline TrajectoryReport ate_rmse(const Trajectory& estimated, const Trajectory& gt,
                                 AlignmentMode mode = AlignmentMode::Sim3,
                                 double tolerance = kDefaultAssociationTolerance) {
  TrajectoryReport r;
  r.mode = mode;
  r.matches = associate(estimated, gt, tolerance);
  if (r.matches.size() < 3)
    fail(ErrorCode::TooFewMatches, "only " + std::to_string(r.matches.size()) + " poses matched within " +
                                       std::to_string(tolerance) + " s, need 3");
  std::vector<Eigen::Vector3d> src, dst;
  for (const auto& m : r.matches) {
    src.push_back(estimated[m.estimated].pose.translation());
    dst.push_back(gt[m.ground_truth].pose.translation());
  }
  r.alignment = align_umeyama(src, dst, mode);
  double sum = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double e = (dst[i] - r.alignment * src[i]).norm();
    r.residuals.push_back(e);
    sum += e * e;
  }
  r.ate_rmse = std::sqrt(sum / static_cast<double>(src.size()));
  return r;
}

}  // namespace mf::eval
