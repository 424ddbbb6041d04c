#pragma once

#include <array>
#include <optional>
#include <vector>

#include "monofusion/mvs/plane_sweep.hpp"

namespace mf::mvs {

struct StageOutput {
  DepthHypotheses hypotheses;
  CostVolume cost;  // after regularization
  DepthMap depth;   // confidence-masked
  DepthMap prior;   // unmasked expectation, seeds the next stage
};

struct CascadeResult {
  DepthMap depth;                    // full resolution, equals stages[2]
  std::array<DepthMap, 3> stages;    // (H/4, W/4), (H/2, W/2), (H, W)
};

/// One plane-sweep stage: warp every view, weight the views, build and regularize the cost,
/// then take the expectation under the softmax.
inline StageOutput run_stage(const KeyframeWindow& win, const MvsConfig& cfg, int stage, DepthHypotheses hyp) {
  const int ref = win.reference_index();
  const auto& ref_kf = win.reference();
  const CameraIntrinsics intr = win.stage_intrinsics(stage);

  std::vector<FeatureVolume> volumes;
  volumes.reserve(static_cast<std::size_t>(win.size()));
  for (int i = 0; i < win.size(); ++i) {
    const auto& kf = *win.frames[static_cast<std::size_t>(i)];
    const PoseSE3 ref_to_view = i == ref ? PoseSE3::identity() : relative_pose(kf.pose, ref_kf.pose);
    volumes.push_back(warp_features(kf.features.stage(stage), ref_to_view, intr, hyp));
  }

  const auto weights = aggregation_weights(volumes, ref, cfg.aggregation_temperature);
  CostVolume cost = aggregated_cost(volumes, weights, ref, cfg.max_cost);
  for (int pass = 0; pass < cfg.regularizer_passes; ++pass) cost = regularize_cost(cost, cfg.regularizer_radius, cfg.regularizer_depth_radius);

  const auto prob = cost_to_probability(cost, cfg.softmax_temperature);
  DepthMap prior = expected_depth(prob, hyp);
  const float floor = static_cast<float>(cfg.confidence_factor / hyp.planes());
  DepthMap depth = prior;
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x)
      if (depth.confidence(x, y) < floor) depth.invalidate(x, y);
  return {std::move(hyp), std::move(cost), std::move(depth), std::move(prior)};
}

/// Three-stage coarse-to-fine depth for the window's reference keyframe.
inline CascadeResult cascade_estimate(const KeyframeWindow& win, const MvsConfig& cfg) {
  cfg.validate();
  win.validate();
  CascadeResult result;
  DepthMap prior;
  for (int stage = 1; stage <= 3; ++stage) {
    const auto intr = win.stage_intrinsics(stage);
    DepthHypotheses hyp = stage == 1 ? hypotheses_stage1(cfg, intr.height, intr.width)
                                     : hypotheses_refined(prior, cfg, stage);
    StageOutput out = run_stage(win, cfg, stage, std::move(hyp));
    result.stages[stage - 1] = std::move(out.depth);
    prior = std::move(out.prior);
  }
  result.depth = result.stages[2];
  return result;
}

}  // namespace mf::mvs
