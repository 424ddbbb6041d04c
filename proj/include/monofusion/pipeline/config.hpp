#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monofusion/common/keyvalue.hpp"
#include "monofusion/mvs/types.hpp"
#include "monofusion/tracking/depth_buffer.hpp"
#include "monofusion/tracking/tracker.hpp"
#include "monofusion/tsdf/volume.hpp"

namespace mf::pipeline {

enum class DatasetFormat { Tum, Synth };
enum class RunMode { MappingOnly, TrackAndMap };
enum class DepthBufferMode { Combined, SparseOnly };
enum class DepthRangeMode { Schedule, Fixed };
enum class MotionModel { Constant, Identity };

struct KeyframePolicy {
  int every_k = 5;
  double translation = 0.0;  // > 0 switches to the translation-threshold rule

  void validate() const {
    require(every_k >= 1, ErrorCode::InvalidArgument, "keyframes.every_k must be >= 1");
    require(translation >= 0.0, ErrorCode::InvalidArgument, "keyframes.translation must be >= 0");
  }
};

/// Orbit sequence rendered from a scene description.
struct SynthConfig {
  std::string scene = "builtin";  // "builtin" or a scene file
  int frames = 60;
  int width = 320;
  int height = 240;
  double hfov_deg = 60.0;
  double radius = 1.4;
  double camera_height = 1.1;
  double arc_start = 0.0;
  double arc_span = 0.4;
  double angle_jitter = 0.35;
  double approach = 0.15;
  double frame_interval = 0.05;  // seconds
  double degraded_fraction = 0.0;
  int supersample = 3;

  void validate() const {
    require(frames >= 1, ErrorCode::InvalidArgument, "synth.frames must be >= 1");
    require(width % 4 == 0 && height % 4 == 0 && width >= 16 && height >= 16, ErrorCode::InvalidArgument,
            "synth image size must be a multiple of 4 and at least 16");
    require(radius > 0.0 && frame_interval > 0.0, ErrorCode::InvalidArgument, "synth radius and interval must be positive");
    require(degraded_fraction >= 0.0 && degraded_fraction <= 1.0, ErrorCode::InvalidArgument,
            "synth.degraded_fraction must lie in [0, 1]");
    require(supersample >= 1, ErrorCode::InvalidArgument, "synth.supersample must be >= 1");
  }
};

struct TrackingOptions {
  tracking::TrackerConfig tracker;
  DepthBufferMode buffer = DepthBufferMode::Combined;
  tracking::SparseSource sparse_source = tracking::SparseSource::Dataset;
  int sparse_points = 2000;
  int dilation = 1;
  MotionModel motion = MotionModel::Constant;
  bool diagnostics = true;  // in mapping_only mode: still run the tracker for tracking.csv
};

struct PipelineConfig {
  std::string dataset_path;
  DatasetFormat format = DatasetFormat::Tum;
  RunMode mode = RunMode::TrackAndMap;
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;
  bool async_mapping = true;
  KeyframePolicy keyframes;
  int window = 7;
  mvs::MvsConfig mvs;
  DepthRangeMode depth_range = DepthRangeMode::Schedule;
  FeatureConfig features;
  tsdf::TsdfConfig tsdf{0.02, 0.1, 0.05, 10.0, 64.f};
  TrackingOptions tracking;
  SynthConfig synth;
  bool write_outputs = true;

  void validate() const {
    require(window >= 2, ErrorCode::InvalidArgument, "window.size must be >= 2");
    require(window <= mvs::KeyframeWindow::kMaxViews, ErrorCode::InvalidArgument, "window.size must be <= 8");
    require(threads >= 0, ErrorCode::InvalidArgument, "threads must be >= 0");
    require(tracking.sparse_points >= 0 && tracking.dilation >= 0, ErrorCode::InvalidArgument,
            "tracking.sparse_points and tracking.dilation must be >= 0");
    require(format == DatasetFormat::Synth || !dataset_path.empty(), ErrorCode::InvalidArgument,
            "dataset.path is required for the tum format");
    keyframes.validate();
    mvs.validate();
    tsdf.validate();
    tracking.tracker.validate();
    synth.validate();
  }
};

namespace detail {

template <typename E>
E parse_enum(const KeyValueConfig& kv, const std::string& key, E fallback,
             std::initializer_list<std::pair<const char*, E>> names) {
  const auto raw = kv.raw(key);
  if (!raw) return fallback;
  std::string allowed;
  for (const auto& [name, value] : names) {
    if (*raw == name) return value;
    allowed += allowed.empty() ? name : std::string("|") + name;
  }
  fail(ErrorCode::FormatError, kv.origin() + ": bad value '" + *raw + "' for '" + key + "', expected " + allowed);
}

}  // namespace detail

/// Reads a pipeline configuration; every key is optional. See README for the key list.
inline PipelineConfig parse_pipeline_config(const KeyValueConfig& kv) {
  PipelineConfig c;
  c.dataset_path = kv.get<std::string>("dataset.path", c.dataset_path);
  c.format = detail::parse_enum(kv, "dataset.format", c.format,
                                {{"tum", DatasetFormat::Tum}, {"synth", DatasetFormat::Synth}});
  c.mode = detail::parse_enum(kv, "mode", c.mode,
                              {{"mapping_only", RunMode::MappingOnly}, {"track_and_map", RunMode::TrackAndMap}});
  c.output_dir = kv.get<std::string>("output.dir", c.output_dir);
  c.write_outputs = kv.get<bool>("output.write", c.write_outputs);
  c.seed = kv.get<std::uint64_t>("seed", c.seed);
  c.threads = kv.get<int>("threads", c.threads);
  c.async_mapping = kv.get<bool>("pipeline.async", c.async_mapping);
  c.keyframes.every_k = kv.get<int>("keyframes.every_k", c.keyframes.every_k);
  c.keyframes.translation = kv.get<double>("keyframes.translation", c.keyframes.translation);
  c.window = kv.get<int>("window.size", c.window);

  auto& m = c.mvs;
  m.planes = kv.get<std::array<int, 3>>("mvs.planes", m.planes);
  m.d_min = kv.get<double>("mvs.d_min", m.d_min);
  m.d_max = kv.get<double>("mvs.d_max", m.d_max);
  m.interval_divisors = kv.get<std::array<int, 3>>("mvs.interval_divisors", m.interval_divisors);
  m.regularizer_radius = kv.get<int>("mvs.regularizer_radius", m.regularizer_radius);
  m.regularizer_depth_radius = kv.get<int>("mvs.regularizer_depth_radius", m.regularizer_depth_radius);
  m.regularizer_passes = kv.get<int>("mvs.regularizer_passes", m.regularizer_passes);
  m.max_cost = kv.get<double>("mvs.max_cost", m.max_cost);
  m.softmax_temperature = kv.get<double>("mvs.softmax_temperature", m.softmax_temperature);
  if (kv.has("mvs.aggregation_temperature")) m.aggregation_temperature = kv.get<double>("mvs.aggregation_temperature", 1.0);
  m.confidence_factor = kv.get<double>("mvs.confidence_factor", m.confidence_factor);
  c.depth_range = detail::parse_enum(kv, "mvs.depth_range", c.depth_range,
                                     {{"schedule", DepthRangeMode::Schedule}, {"fixed", DepthRangeMode::Fixed}});
  c.features.smoothing_radius = kv.get<int>("features.smoothing_radius", c.features.smoothing_radius);
  c.features.gradient_channels = kv.get<bool>("features.gradient_channels", c.features.gradient_channels);

  c.tsdf.voxel_size = kv.get<double>("tsdf.voxel_size", c.tsdf.voxel_size);
  c.tsdf.truncation = kv.get<double>("tsdf.truncation", c.tsdf.truncation);
  c.tsdf.near = kv.get<double>("tsdf.near", c.tsdf.near);
  c.tsdf.far = kv.get<double>("tsdf.far", c.tsdf.far);
  c.tsdf.max_weight = kv.get<float>("tsdf.max_weight", c.tsdf.max_weight);

  auto& t = c.tracking;
  t.tracker.levels = kv.get<int>("tracking.levels", t.tracker.levels);
  t.tracker.huber = kv.get<double>("tracking.huber", t.tracker.huber);
  t.tracker.max_iterations = kv.get<int>("tracking.max_iterations", t.tracker.max_iterations);
  t.tracker.convergence = kv.get<double>("tracking.convergence", t.tracker.convergence);
  t.tracker.affine_brightness = kv.get<bool>("tracking.affine", t.tracker.affine_brightness);
  t.tracker.max_residuals = kv.get<int>("tracking.max_residuals", t.tracker.max_residuals);
  t.tracker.min_inlier_fraction = kv.get<double>("tracking.min_inlier_fraction", t.tracker.min_inlier_fraction);
  t.tracker.min_depth_pixels = kv.get<int>("tracking.min_depth_pixels", t.tracker.min_depth_pixels);
  t.tracker.smoothing_radius = kv.get<int>("tracking.smoothing_radius", t.tracker.smoothing_radius);
  t.tracker.min_relative_decrease = kv.get<double>("tracking.min_relative_decrease", t.tracker.min_relative_decrease);
  t.buffer = detail::parse_enum(kv, "tracking.depth_buffer", t.buffer,
                                {{"combined", DepthBufferMode::Combined}, {"sparse_only", DepthBufferMode::SparseOnly}});
  t.sparse_source = detail::parse_enum(kv, "tracking.sparse_source", t.sparse_source,
                                       {{"dataset", tracking::SparseSource::Dataset},
                                        {"sampled", tracking::SparseSource::Sampled},
                                        {"none", tracking::SparseSource::None}});
  t.sparse_points = kv.get<int>("tracking.sparse_points", t.sparse_points);
  t.dilation = kv.get<int>("tracking.dilation", t.dilation);
  t.motion = detail::parse_enum(kv, "tracking.motion_model", t.motion,
                                {{"constant", MotionModel::Constant}, {"identity", MotionModel::Identity}});
  t.diagnostics = kv.get<bool>("tracking.diagnostics", t.diagnostics);

  auto& s = c.synth;
  s.scene = kv.get<std::string>("synth.scene", s.scene);
  s.frames = kv.get<int>("synth.frames", s.frames);
  s.width = kv.get<int>("synth.width", s.width);
  s.height = kv.get<int>("synth.height", s.height);
  s.hfov_deg = kv.get<double>("synth.hfov", s.hfov_deg);
  s.radius = kv.get<double>("synth.radius", s.radius);
  s.camera_height = kv.get<double>("synth.camera_height", s.camera_height);
  s.arc_start = kv.get<double>("synth.arc_start", s.arc_start);
  s.arc_span = kv.get<double>("synth.arc_span", s.arc_span);
  s.angle_jitter = kv.get<double>("synth.angle_jitter", s.angle_jitter);
  s.approach = kv.get<double>("synth.approach", s.approach);
  s.frame_interval = kv.get<double>("synth.frame_interval", s.frame_interval);
  s.degraded_fraction = kv.get<double>("synth.degraded_fraction", s.degraded_fraction);
  s.supersample = kv.get<int>("synth.supersample", s.supersample);

  const auto unused = kv.unused_keys();
  if (!unused.empty()) fail(ErrorCode::FormatError, kv.origin() + ": unknown key '" + unused.front() + "'");
  c.validate();
  return c;
}

}  // namespace mf::pipeline
