#pragma once

#include <cstdio>
#include <deque>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "monofusion/eval.hpp"
#include "monofusion/mvs.hpp"
#include "monofusion/pipeline/config.hpp"
#include "monofusion/pipeline/dataset.hpp"
#include "monofusion/pipeline/keyframes.hpp"
#include "monofusion/pipeline/spsc_queue.hpp"
#include "monofusion/tracking.hpp"
#include "monofusion/tsdf.hpp"

namespace mf::pipeline {

struct KeyframeRecord {
  int frame = 0;
  double timestamp = 0.0;
  PoseSE3 pose;
  int window_size = 0;                     // keyframes passed to MVS, 0 when MVS did not run
  std::optional<mvs::DepthRange> range;
  std::optional<DepthMap> depth;           // MVS depth, confidence-masked
  std::optional<eval::DepthMetrics> metrics;
};

struct FrameDiagnostics {
  int frame = 0;
  bool keyframe = false;
  bool tracked = false;  // the tracker ran for this frame
  tracking::TrackingDiagnostics tracking;
  double sparse_fraction = 0.0;  // of the reference buffer
};

struct RunResult {
  Trajectory trajectory;  // one pose per frame
  std::vector<KeyframeRecord> keyframes;
  std::vector<FrameDiagnostics> frames;
  tsdf::TriangleMesh mesh;
  std::optional<eval::SequenceDepthReport> depth_report;
  std::optional<eval::TrajectoryReport> ate_sim3;
  std::optional<eval::TrajectoryReport> ate_se3;
  nlohmann::ordered_json metrics;
};

namespace detail {

/// Rethrows a library error with frame context, keeping its code.
template <typename Fn>
auto with_context(const std::string& context, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    fail(e.code(), context + ": " + e.message());
  }
}

struct MappingJob {
  int ordinal = 0;  // keyframe number
  int frame = 0;
  ImageFrame image;
  PoseSE3 pose;
  std::optional<double> sparse_mean_depth;
  std::shared_ptr<std::promise<DepthMap>> rendered;  // model depth at this keyframe before it is fused
};

/// Consumer side: for every keyframe, render the current model at its pose (the snapshot
/// the tracker will use), then run MVS over the window and fuse the result.
class Mapper {
 public:
  Mapper(const PipelineConfig& cfg, const CameraIntrinsics& intr)
      : cfg_(cfg), intr_(intr), volume_(cfg.tsdf) {}

  void process(MappingJob& job) {
    const std::string ctx = "keyframe at frame " + std::to_string(job.frame);
    try {
      DepthMap rendered = volume_.empty() ? DepthMap(intr_.width, intr_.height)
                                          : with_context(ctx, [&] { return tsdf::raycast(volume_, job.pose, intr_, false).depth; });
      job.rendered->set_value(std::move(rendered));
    } catch (...) {
      job.rendered->set_exception(std::current_exception());
      throw;
    }

    auto kf = std::make_shared<mvs::Keyframe>();
    kf->image = job.image;
    kf->pose = job.pose;
    kf->features = with_context(ctx, [&] { return extract_classical(job.image, cfg_.features); });
    window_.push_back(kf);
    while (static_cast<int>(window_.size()) > cfg_.window) window_.pop_front();

    KeyframeRecord rec;
    rec.frame = job.frame;
    rec.timestamp = job.image.timestamp;
    rec.pose = job.pose;
    if (window_.size() >= 2) {
      mvs::KeyframeWindow win;
      win.intrinsics = intr_;
      win.frames.assign(window_.begin(), window_.end());
      mvs::MvsConfig mcfg = cfg_.mvs;
      if (cfg_.depth_range == DepthRangeMode::Schedule) {
        if (!schedule_.initialized() && job.sparse_mean_depth) {
          range_ = schedule_.next(job.sparse_mean_depth, std::nullopt);
        } else if (schedule_.initialized() && prev_max_ > 0.0) {
          range_ = schedule_.next(std::nullopt, prev_max_);
        }
        if (range_) {
          mcfg.d_min = range_->d_min;
          mcfg.d_max = range_->d_max;
        }
      }
      rec.range = mvs::DepthRange{mcfg.d_min, mcfg.d_max};
      rec.window_size = win.size();
      auto result = with_context(ctx, [&] { return mvs::cascade_estimate(win, mcfg); });
      with_context(ctx, [&] { return tsdf::integrate(volume_, result.depth, job.image, job.pose, intr_); });
      const double m = result.depth.max_valid_depth();
      if (m > 0.0) prev_max_ = m;
      rec.depth = std::move(result.depth);
    }
    records_.push_back(std::move(rec));
  }

  [[nodiscard]] const tsdf::HashedTsdfVolume& volume() const noexcept { return volume_; }
  [[nodiscard]] std::vector<KeyframeRecord>& records() noexcept { return records_; }

 private:
  const PipelineConfig& cfg_;
  CameraIntrinsics intr_;
  tsdf::HashedTsdfVolume volume_;
  std::deque<std::shared_ptr<const mvs::Keyframe>> window_;
  mvs::DepthRangeSchedule schedule_;
  std::optional<mvs::DepthRange> range_;
  double prev_max_ = 0.0;
  std::vector<KeyframeRecord> records_;
};

struct Reference {
  ImageFrame image;
  tracking::CombinedDepthBuffer buffer;
  PoseSE3 pose;
};

inline std::optional<double> mean_sparse_depth(const tracking::SparseDepthMap& s) {
  if (s.entries.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& e : s.entries) sum += e.depth;
  return sum / static_cast<double>(s.entries.size());
}

}  // namespace detail

/// Tracks every frame against the latest keyframe's combined depth buffer while MVS and
/// fusion for keyframes run on a mapping thread. The buffer of keyframe k renders the model
/// fused from keyframes before k, so results do not depend on thread timing.
inline RunResult run(const PipelineConfig& cfg, const SequenceSource& source) {
  cfg.validate();
  set_num_threads(cfg.threads);
  const int n = source.size();
  if (n < 2) fail(ErrorCode::DatasetError, "sequence has " + std::to_string(n) + " frame(s); the MVS window needs at least 2");
  const bool mapping_only = cfg.mode == RunMode::MappingOnly;
  if (mapping_only && !source.has_all_poses())
    fail(ErrorCode::DatasetError, "mapping_only needs a ground-truth pose for every frame");
  const auto& intr = source.intrinsics;
  const auto& tc = cfg.tracking;

  detail::Mapper mapper(cfg, intr);
  SpscQueue<detail::MappingJob> queue;
  std::exception_ptr mapper_error;
  std::thread worker;
  if (cfg.async_mapping) {
    worker = std::thread([&] {
      try {
        while (auto job = queue.pop()) mapper.process(*job);
      } catch (...) {
        mapper_error = std::current_exception();
        // Fail every pending snapshot so the producer never waits forever.
        while (auto job = queue.pop()) job->rendered->set_exception(mapper_error);
      }
    });
  }
  auto submit = [&](detail::MappingJob job) {
    if (cfg.async_mapping) {
      queue.push(std::move(job));
    } else {
      mapper.process(job);
    }
  };

  RunResult out;
  KeyframeSelector selector(cfg.keyframes);
  std::optional<detail::Reference> ref;
  std::vector<PoseSE3> poses;
  int keyframe_count = 0;

  try {
    for (int i = 0; i < n; ++i) {
      const std::string ctx = "frame " + std::to_string(i);
      const LoadedFrame frame = source.load(i);
      const auto& gt = source.frame_poses.empty() ? std::nullopt : source.frame_poses[static_cast<std::size_t>(i)];

      // Motion prior.
      PoseSE3 predicted;
      if (i == 0) {
        predicted = gt ? *gt : PoseSE3::identity();
      } else if (tc.motion == MotionModel::Constant && i >= 2) {
        predicted = poses[i - 1] * relative_pose(poses[i - 2], poses[i - 1]);
      } else {
        predicted = poses[static_cast<std::size_t>(i - 1)];
      }
      if (mapping_only) predicted = *gt;

      FrameDiagnostics fd;
      fd.frame = i;
      PoseSE3 pose = predicted;
      const bool run_tracker = ref && (!mapping_only || tc.diagnostics);
      if (run_tracker) {
        fd.sparse_fraction = ref->buffer.sparse_fraction();
        const PoseSE3 init = relative_pose(predicted, ref->pose);
        try {
          const auto res = tracking::track_frame(ref->image, ref->buffer, frame.image, init, intr, tc.tracker);
          fd.tracked = true;
          fd.tracking = res.diagnostics;
          if (!mapping_only && !res.diagnostics.failed) pose = ref->pose * res.pose.inverse();
        } catch (const Error& e) {
          if (e.code() != ErrorCode::InsufficientDepth && e.code() != ErrorCode::Diverged)
            fail(e.code(), ctx + ": " + e.message());
          fd.tracked = true;
          fd.tracking.failed = true;
          fd.tracking.reason = e.message();
        }
      }
      poses.push_back(pose);
      out.trajectory.push_back({frame.image.timestamp, pose});

      if (selector.decide(i, pose)) {
        fd.keyframe = true;
        tracking::SparseDepthMap sparse{intr.width, intr.height, {}, tracking::SparseSource::None};
        if (tc.sparse_source == tracking::SparseSource::Dataset && frame.depth)
          sparse = tracking::select_sparse_points(frame.image, *frame.depth, tc.sparse_points, tracking::SparseSource::Dataset);

        detail::MappingJob job;
        job.ordinal = keyframe_count++;
        job.frame = i;
        job.image = frame.image;
        job.pose = pose;
        job.sparse_mean_depth = detail::mean_sparse_depth(sparse);
        if (!job.sparse_mean_depth && frame.depth) {
          // Range initialization may still use dataset depth when sparse points are disabled.
          const auto probe = tracking::select_sparse_points(frame.image, *frame.depth, 2000);
          job.sparse_mean_depth = detail::mean_sparse_depth(probe);
        }
        job.rendered = std::make_shared<std::promise<DepthMap>>();
        auto snapshot = job.rendered->get_future();
        submit(std::move(job));
        DepthMap rendered = snapshot.get();

        if (tc.sparse_source == tracking::SparseSource::Sampled && rendered.valid_count() > 0)
          sparse = tracking::select_sparse_points(frame.image, rendered, tc.sparse_points, tracking::SparseSource::Sampled);
        const DepthMap& dense = tc.buffer == DepthBufferMode::Combined ? rendered : DepthMap(intr.width, intr.height);
        ref = detail::Reference{frame.image, tracking::combine_depth(sparse, dense, tc.dilation), pose};
      }
      out.frames.push_back(std::move(fd));
    }
  } catch (...) {
    if (worker.joinable()) {
      queue.close();
      worker.join();
    }
    throw;
  }
  if (worker.joinable()) {
    queue.close();
    worker.join();
  }
  if (mapper_error) std::rethrow_exception(mapper_error);

  out.keyframes = std::move(mapper.records());
  out.mesh = tsdf::extract_mesh(mapper.volume());

  // Depth accuracy of every keyframe that received MVS depth and has ground truth.
  std::vector<eval::DepthMetrics> per_image;
  for (auto& kf : out.keyframes) {
    if (!kf.depth || !source.has_depth(kf.frame)) continue;
    const auto gt_depth = source.load(kf.frame).depth;
    try {
      kf.metrics = eval::depth_metrics(*kf.depth, *gt_depth);
      per_image.push_back(*kf.metrics);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoValidPixels) throw;
    }
  }
  if (!per_image.empty()) out.depth_report = eval::sequence_metrics(per_image);
  if (!source.groundtruth.empty()) {
    try {
      out.ate_sim3 = eval::ate_rmse(out.trajectory, source.groundtruth, AlignmentMode::Sim3);
      out.ate_se3 = eval::ate_rmse(out.trajectory, source.groundtruth, AlignmentMode::SE3);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TooFewMatches && e.code() != ErrorCode::DegenerateConfiguration) throw;
    }
  }

  auto& m = out.metrics;
  m["mode"] = mapping_only ? "mapping_only" : "track_and_map";
  m["frames"] = n;
  m["keyframes"] = out.keyframes.size();
  m["depth"] = out.depth_report ? eval::to_json(*out.depth_report) : nlohmann::ordered_json();
  nlohmann::ordered_json traj = nlohmann::ordered_json::object();
  if (out.ate_sim3) traj["sim3"] = eval::to_json(*out.ate_sim3);
  if (out.ate_se3) traj["se3"] = eval::to_json(*out.ate_se3);
  m["trajectory"] = traj;
  std::size_t failed = 0;
  for (const auto& f : out.frames) failed += f.tracked && f.tracking.failed;
  m["tracking_failures"] = failed;
  m["mesh"] = {{"vertices", out.mesh.vertices.size()}, {"faces", out.mesh.faces.size()}};
  return out;
}

inline SequenceSource load_source(const PipelineConfig& cfg) {
  return cfg.format == DatasetFormat::Synth ? make_synthetic_sequence(cfg.synth, cfg.seed) : ingest(cfg.dataset_path);
}

/// Writes trajectory.txt, depth/<timestamp>.png, mesh.ply, metrics.json, metrics.csv and
/// tracking.csv into `dir`.
inline void write_outputs(const RunResult& r, const std::string& dir, const std::string& sequence_name) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "depth");
  write_tum_trajectory((fs::path(dir) / "trajectory.txt").string(), r.trajectory);
  for (const auto& kf : r.keyframes)
    if (kf.depth)
      write_depth_png((fs::path(dir) / "depth" / (detail::format_timestamp(kf.timestamp) + ".png")).string(), *kf.depth);
  tsdf::write_ply((fs::path(dir) / "mesh.ply").string(), r.mesh);
  {
    std::ofstream js(fs::path(dir) / "metrics.json");
    require(static_cast<bool>(js), ErrorCode::IoError, "cannot write metrics.json in " + dir);
    js << r.metrics.dump(2) << '\n';
  }
  {
    std::ofstream csv(fs::path(dir) / "metrics.csv");
    require(static_cast<bool>(csv), ErrorCode::IoError, "cannot write metrics.csv in " + dir);
    csv << eval::depth_csv_header() << ",ate_rmse_sim3\n";
    std::ostringstream row;
    if (r.depth_report) {
      row << eval::depth_csv_row(sequence_name, *r.depth_report);
    } else {
      row << sequence_name << ",0,,,,,,";
    }
    row << ',';
    if (r.ate_sim3) {
      row.precision(10);
      row << r.ate_sim3->ate_rmse;
    }
    csv << row.str() << '\n';
  }
  {
    std::ofstream csv(fs::path(dir) / "tracking.csv");
    require(static_cast<bool>(csv), ErrorCode::IoError, "cannot write tracking.csv in " + dir);
    csv << tracking::tracking_csv_header() << '\n';
    for (const auto& f : r.frames)
      if (f.tracked) csv << tracking::tracking_csv_row(f.frame, f.tracking, f.sparse_fraction) << '\n';
  }
}

}  // namespace mf::pipeline
