#pragma once

#include <sstream>
#include <string>

#include <json.hpp>

#include "monofusion/eval/depth_metrics.hpp"
#include "monofusion/eval/mesh_metrics.hpp"
#include "monofusion/eval/trajectory_error.hpp"

namespace mf::eval {

inline nlohmann::ordered_json to_json(const DepthMetrics& m) {
  return {{"abs_cm", m.abs_cm}, {"a1_pct", m.a1},     {"a2_pct", m.a2},          {"a3_pct", m.a3},
          {"d1_pct", m.d1},     {"n_pixels", m.n},    {"coverage_pct", m.coverage}};
}

/// Per-image arrays plus the sequence means.
inline nlohmann::ordered_json to_json(const SequenceDepthReport& r) {
  nlohmann::ordered_json per_image = nlohmann::ordered_json::object();
  for (const char* key : {"abs_cm", "a1_pct", "a2_pct", "a3_pct", "d1_pct", "coverage_pct"})
    per_image[key] = nlohmann::ordered_json::array();
  for (const auto& m : r.images) {
    per_image["abs_cm"].push_back(m.abs_cm);
    per_image["a1_pct"].push_back(m.a1);
    per_image["a2_pct"].push_back(m.a2);
    per_image["a3_pct"].push_back(m.a3);
    per_image["d1_pct"].push_back(m.d1);
    per_image["coverage_pct"].push_back(m.coverage);
  }
  return {{"images", r.images.size()}, {"per_image", per_image}, {"mean", to_json(r.mean)}};
}

inline nlohmann::ordered_json to_json(const TrajectoryReport& r) {
  nlohmann::ordered_json res = nlohmann::ordered_json::array();
  for (double e : r.residuals) res.push_back(e);
  return {{"ate_rmse", r.ate_rmse},
          {"alignment", r.mode == AlignmentMode::Sim3 ? "sim3" : "se3"},
          {"scale", r.alignment.scale},
          {"matches", r.matches.size()},
          {"residuals", res}};
}

inline nlohmann::ordered_json to_json(const MeshQuality& q) {
  return {{"accuracy_cm", q.accuracy_cm}, {"completion_cm", q.completion_cm}, {"completion_ratio_pct", q.completion_ratio}};
}

inline std::string depth_csv_header() { return "sequence,images,abs_cm,a1_pct,a2_pct,a3_pct,d1_pct,coverage_pct"; }

/// One summary row per sequence.
inline std::string depth_csv_row(const std::string& sequence, const SequenceDepthReport& r) {
  std::ostringstream s;
  s.precision(10);
  s << sequence << ',' << r.images.size() << ',' << r.mean.abs_cm << ',' << r.mean.a1 << ',' << r.mean.a2 << ','
    << r.mean.a3 << ',' << r.mean.d1 << ',' << r.mean.coverage;
  return s.str();
}

}  // namespace mf::eval
