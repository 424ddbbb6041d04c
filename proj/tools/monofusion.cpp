// monofusion command line: run, mvs, fuse, track, eval-depth, eval-traj, synth.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "monofusion/monofusion.hpp"

namespace {

using namespace mf;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "key = value config file");
  cmd->add_option("--set", c.sets, "override a config key, KEY=VALUE (repeatable)");
  cmd->add_option("--seed", c.seed, "seed for every stochastic choice (config key: seed)");
  cmd->add_option("--threads", c.threads, "worker threads, 0 = all cores (config key: threads)");
}

/// Config file plus command line overrides; flags win over file keys.
KeyValueConfig load_config(const Common& c) {
  KeyValueConfig kv = c.config.empty() ? KeyValueConfig::parse_string("", "<command line>") : KeyValueConfig::load(c.config);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorCode::InvalidArgument, "--set expects KEY=VALUE, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (c.seed) kv.set("seed", std::to_string(*c.seed));
  if (c.threads) kv.set("threads", std::to_string(*c.threads));
  return kv;
}

void print_json(const nlohmann::ordered_json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path);
  out << j.dump(2) << '\n';
}

int cmd_run(const Common& c, const std::string& output, const std::string& dataset) {
  auto kv = load_config(c);
  if (!output.empty()) kv.set("output.dir", output);
  if (!dataset.empty()) kv.set("dataset.path", dataset);
  const auto cfg = pipeline::parse_pipeline_config(kv);
  const auto source = pipeline::load_source(cfg);
  const auto result = pipeline::run(cfg, source);
  const std::string name = cfg.format == pipeline::DatasetFormat::Synth
                               ? "synth"
                               : std::filesystem::path(cfg.dataset_path).filename().string();
  if (cfg.write_outputs) pipeline::write_outputs(result, cfg.output_dir, name);
  std::cerr << "frames " << source.size() << ", keyframes " << result.keyframes.size();
  if (result.depth_report) std::cerr << ", a1 " << result.depth_report->mean.a1 << "%";
  if (result.ate_sim3) std::cerr << ", ATE " << result.ate_sim3->ate_rmse;
  std::cerr << '\n';
  return 0;
}

int cmd_mvs(const Common& c, const std::string& dataset, const std::vector<int>& frames, const std::string& output) {
  auto kv = load_config(c);
  kv.set("dataset.path", dataset);
  const auto cfg = pipeline::parse_pipeline_config(kv);
  set_num_threads(cfg.threads);
  const auto source = pipeline::ingest(dataset);
  require(frames.size() >= 2, ErrorCode::TooFewViews, "--frames needs at least two indices");
  mvs::KeyframeWindow win;
  win.intrinsics = source.intrinsics;
  for (int f : frames) {
    require(f >= 0 && f < source.size(), ErrorCode::InvalidArgument, "frame index " + std::to_string(f) + " out of range");
    const auto& pose = source.frame_poses[static_cast<std::size_t>(f)];
    if (!pose) fail(ErrorCode::DatasetError, "frame " + std::to_string(f) + " has no ground-truth pose");
    auto kf = std::make_shared<mvs::Keyframe>();
    kf->image = source.load(f).image;
    kf->pose = *pose;
    kf->features = extract_classical(kf->image, cfg.features);
    win.frames.push_back(kf);
  }
  const auto result = mvs::cascade_estimate(win, cfg.mvs);
  write_depth_png(output, result.depth);
  const int ref = frames.back();
  if (source.has_depth(ref)) {
    const auto m = eval::depth_metrics(result.depth, *source.load(ref).depth);
    std::cout << eval::to_json(m).dump(2) << '\n';
  }
  return 0;
}

int cmd_fuse(const Common& c, const std::string& dataset, int every, const std::string& output,
             const std::string& snapshot) {
  auto kv = load_config(c);
  kv.set("dataset.path", dataset);
  const auto cfg = pipeline::parse_pipeline_config(kv);
  set_num_threads(cfg.threads);
  const auto source = pipeline::ingest(dataset);
  require(every >= 1, ErrorCode::InvalidArgument, "--every must be >= 1");
  tsdf::HashedTsdfVolume vol(cfg.tsdf);
  int fused = 0;
  for (int i = 0; i < source.size(); i += every) {
    const auto& pose = source.frame_poses[static_cast<std::size_t>(i)];
    if (!pose || !source.has_depth(i)) continue;
    const auto f = source.load(i);
    tsdf::integrate(vol, *f.depth, f.image, *pose, source.intrinsics);
    ++fused;
  }
  if (fused == 0) fail(ErrorCode::DatasetError, dataset + ": no frame has both depth and a ground-truth pose");
  const auto mesh = tsdf::extract_mesh(vol);
  tsdf::write_ply(output, mesh);
  if (!snapshot.empty()) tsdf::save_snapshot(snapshot, vol);
  std::cerr << "fused " << fused << " frames, " << vol.block_count() << " blocks, " << mesh.faces.size() << " faces\n";
  return 0;
}

int cmd_track(const Common& c, const std::string& dataset, int ref, int cur) {
  auto kv = load_config(c);
  kv.set("dataset.path", dataset);
  const auto cfg = pipeline::parse_pipeline_config(kv);
  set_num_threads(cfg.threads);
  const auto source = pipeline::ingest(dataset);
  require(ref >= 0 && ref < source.size() && cur >= 0 && cur < source.size(), ErrorCode::InvalidArgument,
          "frame index out of range");
  const auto r = source.load(ref), n = source.load(cur);
  if (!r.depth) fail(ErrorCode::DatasetError, "reference frame " + std::to_string(ref) + " has no depth");
  const auto buffer = tracking::rendered_only(*r.depth);
  const auto res = tracking::track_frame(r.image, buffer, n.image, PoseSE3::identity(), source.intrinsics,
                                         cfg.tracking.tracker);
  const auto& d = res.diagnostics;
  const auto q = res.pose.quaternion();
  const auto& t = res.pose.translation();
  nlohmann::ordered_json j{{"t_new_from_ref", {t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()}},
                           {"rmse", d.rmse},
                           {"inlier_fraction", d.inlier_fraction},
                           {"iterations", d.iterations},
                           {"affine", {d.affine_a, d.affine_b}},
                           {"failed", d.failed}};
  const auto& pr = source.frame_poses[static_cast<std::size_t>(ref)];
  const auto& pc = source.frame_poses[static_cast<std::size_t>(cur)];
  if (pr && pc) {
    const PoseSE3 err = relative_pose(*pc, *pr).inverse() * res.pose;
    j["rotation_error_deg"] = rotation_angle(err.rotation()) * 180.0 / 3.14159265358979323846;
    j["translation_error"] = err.translation().norm();
  }
  std::cout << j.dump(2) << '\n';
  return d.failed ? 1 : 0;
}

std::vector<std::string> png_files(const std::string& dir) {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".png") out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_eval_depth(const std::string& pred, const std::string& gt, const std::string& output) {
  namespace fs = std::filesystem;
  std::vector<eval::DepthMetrics> per_image;
  if (fs::is_directory(pred)) {
    // Pairs files with equal names in both directories.
    for (const auto& name : png_files(pred)) {
      if (!fs::exists(fs::path(gt) / name)) continue;
      per_image.push_back(
          eval::depth_metrics(read_depth_png((fs::path(pred) / name).string()), read_depth_png((fs::path(gt) / name).string())));
    }
  } else {
    per_image.push_back(eval::depth_metrics(read_depth_png(pred), read_depth_png(gt)));
  }
  print_json(eval::to_json(eval::sequence_metrics(per_image)), output);
  return 0;
}

int cmd_eval_traj(const std::string& est, const std::string& gt, const std::string& mode, double tol,
                  const std::string& output) {
  AlignmentMode m;
  if (mode == "sim3") {
    m = AlignmentMode::Sim3;
  } else if (mode == "se3") {
    m = AlignmentMode::SE3;
  } else {
    fail(ErrorCode::InvalidArgument, "--mode must be sim3 or se3");
  }
  const auto r = eval::ate_rmse(read_tum_trajectory(est), read_tum_trajectory(gt), m, tol);
  print_json(eval::to_json(r), output);
  return 0;
}

int cmd_synth(const Common& c, const std::string& output) {
  auto kv = load_config(c);
  kv.set("dataset.format", "synth");
  const auto cfg = pipeline::parse_pipeline_config(kv);
  set_num_threads(cfg.threads);
  const auto seq = pipeline::make_synthetic_sequence(cfg.synth, cfg.seed);
  pipeline::export_sequence(seq, output);
  std::cerr << "wrote " << seq.size() << " frames to " << output << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monocular dense mapping: plane-sweep MVS, TSDF fusion and direct tracking"};
  app.require_subcommand(1);

  Common run_c, mvs_c, fuse_c, track_c, synth_c;
  std::string run_out, run_dataset;
  auto* run = app.add_subcommand("run", "full pipeline on a dataset or a synthetic sequence");
  add_common(run, run_c);
  run->add_option("-o,--output", run_out, "output directory (config key: output.dir)");
  run->add_option("-d,--dataset", run_dataset, "dataset directory (config key: dataset.path)");

  std::string mvs_dataset, mvs_out;
  std::vector<int> mvs_frames;
  auto* mvs_cmd = app.add_subcommand("mvs", "depth of the last listed frame from a posed window");
  add_common(mvs_cmd, mvs_c);
  mvs_cmd->add_option("-d,--dataset", mvs_dataset, "dataset directory")->required();
  mvs_cmd->add_option("-f,--frames", mvs_frames, "frame indices, reference last")->required()->delimiter(',');
  mvs_cmd->add_option("-o,--output", mvs_out, "depth PNG to write")->required();

  std::string fuse_dataset, fuse_out, fuse_snapshot;
  int fuse_every = 1;
  auto* fuse = app.add_subcommand("fuse", "fuse dataset depth maps at ground-truth poses into a mesh");
  add_common(fuse, fuse_c);
  fuse->add_option("-d,--dataset", fuse_dataset, "dataset directory")->required();
  fuse->add_option("--every", fuse_every, "use every n-th frame");
  fuse->add_option("-o,--output", fuse_out, "PLY mesh to write")->required();
  fuse->add_option("--snapshot", fuse_snapshot, "also write a volume snapshot");

  std::string track_dataset;
  int track_ref = 0, track_cur = 1;
  auto* track = app.add_subcommand("track", "align one frame to a reference frame with dataset depth");
  add_common(track, track_c);
  track->add_option("-d,--dataset", track_dataset, "dataset directory")->required();
  track->add_option("--ref", track_ref, "reference frame index");
  track->add_option("--frame", track_cur, "frame to align");

  std::string ed_pred, ed_gt, ed_out;
  auto* eval_depth = app.add_subcommand("eval-depth", "depth metrics of PNG maps or directories of maps");
  eval_depth->add_option("--pred", ed_pred, "predicted depth PNG or directory")->required();
  eval_depth->add_option("--gt", ed_gt, "ground-truth depth PNG or directory")->required();
  eval_depth->add_option("-o,--output", ed_out, "JSON report path (default stdout)");

  std::string et_est, et_gt, et_mode = "sim3", et_out;
  double et_tol = eval::kDefaultAssociationTolerance;
  auto* eval_traj = app.add_subcommand("eval-traj", "absolute trajectory error");
  eval_traj->add_option("--est", et_est, "estimated trajectory (TUM format)")->required();
  eval_traj->add_option("--gt", et_gt, "ground-truth trajectory (TUM format)")->required();
  eval_traj->add_option("--mode", et_mode, "sim3 or se3");
  eval_traj->add_option("--tolerance", et_tol, "timestamp association tolerance in seconds");
  eval_traj->add_option("-o,--output", et_out, "JSON report path (default stdout)");

  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "render a synthetic sequence to disk");
  add_common(synth_cmd, synth_c);
  synth_cmd->add_option("-o,--output", synth_out, "dataset directory to create")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_c, run_out, run_dataset);
    if (*mvs_cmd) return cmd_mvs(mvs_c, mvs_dataset, mvs_frames, mvs_out);
    if (*fuse) return cmd_fuse(fuse_c, fuse_dataset, fuse_every, fuse_out, fuse_snapshot);
    if (*track) return cmd_track(track_c, track_dataset, track_ref, track_cur);
    if (*eval_depth) return cmd_eval_depth(ed_pred, ed_gt, ed_out);
    if (*eval_traj) return cmd_eval_traj(et_est, et_gt, et_mode, et_tol, et_out);
    if (*synth_cmd) return cmd_synth(synth_c, synth_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
