#pragma once

#include <optional>
#include <vector>

#include "monofusion/geometry/pose.hpp"
#include "monofusion/pipeline/config.hpp"

namespace mf::pipeline {

/// Streaming keyframe decisions. Frame 0 is always a keyframe. With a translation threshold
/// a frame becomes a keyframe once its camera center is at least that far from the last
/// keyframe's; otherwise every k-th frame is one.
class KeyframeSelector {
 public:
  explicit KeyframeSelector(KeyframePolicy policy) : policy_(policy) { policy_.validate(); }

  bool decide(int frame_index, const PoseSE3& pose) {
    bool key;
    if (!last_) {
      key = true;
    } else if (policy_.translation > 0.0) {
      key = (pose.translation() - last_->translation()).norm() >= policy_.translation;
    } else {
      key = frame_index % policy_.every_k == 0;
    }
    if (key) last_ = pose;
    return key;
  }

 private:
  KeyframePolicy policy_;
  std::optional<PoseSE3> last_;
};

/// Indices of keyframes for a whole pose stream.
inline std::vector<int> select_keyframes(const std::vector<PoseSE3>& poses, const KeyframePolicy& policy) {
  KeyframeSelector sel(policy);
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(poses.size()); ++i)
    if (sel.decide(i, poses[static_cast<std::size_t>(i)])) out.push_back(i);
  return out;
}

}  // namespace mf::pipeline
