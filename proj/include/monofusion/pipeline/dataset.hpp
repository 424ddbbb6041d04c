#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "monofusion/common/depth_map.hpp"
#include "monofusion/common/image_ops.hpp"
#include "monofusion/common/png_io.hpp"
#include "monofusion/eval/trajectory_error.hpp"
#include "monofusion/features/features.hpp"
#include "monofusion/geometry/camera.hpp"
#include "monofusion/geometry/trajectory_io.hpp"
#include "monofusion/pipeline/config.hpp"
#include "monofusion/synth.hpp"

namespace mf::pipeline {

inline constexpr double kDepthAssociationTolerance = 0.02;  // seconds, rgb to depth
inline constexpr double kPoseAssociationTolerance = 0.02;   // seconds, frame to ground truth

struct LoadedFrame {
  ImageFrame image;
  std::optional<DepthMap> depth;  // ground-truth or sensor depth
};

/// Ordered frames with intrinsics and optional ground truth. Frames are either paths on disk
/// or held in memory (synthetic sequences).
struct SequenceSource {
  CameraIntrinsics intrinsics;
  std::vector<double> timestamps;
  std::vector<std::string> image_paths;
  std::vector<std::string> depth_paths;  // empty string: no depth for that frame
  std::vector<LoadedFrame> memory;       // non-empty for in-memory sequences
  Trajectory groundtruth;
  std::vector<std::optional<PoseSE3>> frame_poses;  // ground truth associated to each frame
  std::vector<std::uint8_t> degraded;               // synthetic sequences only

  [[nodiscard]] int size() const noexcept { return static_cast<int>(timestamps.size()); }
  [[nodiscard]] bool in_memory() const noexcept { return !memory.empty(); }

  [[nodiscard]] bool has_depth(int i) const {
    const auto k = static_cast<std::size_t>(i);
    return in_memory() ? memory[k].depth.has_value() : !depth_paths[k].empty();
  }

  [[nodiscard]] bool has_all_poses() const {
    return !frame_poses.empty() &&
           std::all_of(frame_poses.begin(), frame_poses.end(), [](const auto& p) { return p.has_value(); });
  }

  [[nodiscard]] LoadedFrame load(int i) const;
};

/// 8-bit RGB to a frame with [0, 1] color and luminance intensity.
inline ImageFrame frame_from_rgb8(const Image<png::Rgb8>& img, double timestamp) {
  ImageFrame f;
  f.timestamp = timestamp;
  f.intensity = Image<float>(img.width(), img.height(), 0.f);
  f.rgb = Image<Rgb>(img.width(), img.height(), Rgb{0.f, 0.f, 0.f});
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const auto& p = img(x, y);
      const Rgb c{p[0] / 255.f, p[1] / 255.f, p[2] / 255.f};
      (*f.rgb)(x, y) = c;
      f.intensity(x, y) = luminance(c);
    }
  return f;
}

inline Image<png::Rgb8> frame_to_rgb8(const ImageFrame& f) {
  Image<png::Rgb8> out(f.width(), f.height());
  auto q = [](float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f)); };
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) {
      const Rgb c = f.color_at(x, y);
      out(x, y) = {q(c.r), q(c.g), q(c.b)};
    }
  return out;
}

namespace detail {

[[noreturn]] inline void dataset_error(const std::string& where, const std::string& what) {
  fail(ErrorCode::DatasetError, where + ": " + what);
}

struct ListEntry {
  double timestamp;
  std::string path;
  int line;
};

/// `timestamp relative/path` per line; '#' starts a comment.
inline std::vector<ListEntry> read_file_list(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) dataset_error(file.string(), "cannot open file");
  std::vector<ListEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    ListEntry e{0.0, {}, line_no};
    if (!(ss >> e.timestamp >> e.path))
      dataset_error(file.string() + ":" + std::to_string(line_no), "expected 'timestamp path'");
    if (!out.empty() && !(e.timestamp > out.back().timestamp))
      dataset_error(file.string() + ":" + std::to_string(line_no), "timestamps must be strictly increasing");
    out.push_back(std::move(e));
  }
  return out;
}

/// `fx fy cx cy width height` on the first non-comment line.
inline CameraIntrinsics read_calibration(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) dataset_error(file.string(), "missing calibration file");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    CameraIntrinsics k;
    if (!(ss >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height))
      dataset_error(file.string() + ":" + std::to_string(line_no), "expected 'fx fy cx cy width height'");
    try {
      k.validate();
    } catch (const Error& e) {
      dataset_error(file.string() + ":" + std::to_string(line_no), e.message());
    }
    return k;
  }
  dataset_error(file.string(), "no calibration line");
}

inline std::string format_timestamp(double t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", t);
  return buf;
}

/// Index of the nearest entry within `tol` of t, or -1.
template <typename GetTime>
int nearest_within(std::size_t n, GetTime time_of, double t, double tol) {
  int best = -1;
  double best_dt = tol;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = std::abs(time_of(i) - t);
    if (dt <= best_dt && (best < 0 || dt < best_dt)) {
      best = static_cast<int>(i);
      best_dt = dt;
    }
  }
  return best;
}

inline void associate_poses(SequenceSource& s) {
  s.frame_poses.assign(s.timestamps.size(), std::nullopt);
  if (s.groundtruth.empty()) return;
  for (std::size_t i = 0; i < s.timestamps.size(); ++i) {
    const int g = nearest_within(
        s.groundtruth.size(), [&](std::size_t k) { return s.groundtruth[k].timestamp; }, s.timestamps[i],
        kPoseAssociationTolerance);
    if (g >= 0) s.frame_poses[i] = s.groundtruth[static_cast<std::size_t>(g)].pose;
  }
}

}  // namespace detail

inline LoadedFrame SequenceSource::load(int i) const {
  const auto k = static_cast<std::size_t>(i);
  require(i >= 0 && k < timestamps.size(), ErrorCode::InvalidArgument, "frame index out of range");
  if (in_memory()) return memory[k];
  LoadedFrame out;
  try {
    out.image = frame_from_rgb8(png::read_rgb8(image_paths[k]), timestamps[k]);
  } catch (const Error& e) {
    detail::dataset_error(image_paths[k], e.message());
  }
  if (!intrinsics.same_resolution(out.image.width(), out.image.height()))
    detail::dataset_error(image_paths[k], "image size " + std::to_string(out.image.width()) + "x" +
                                              std::to_string(out.image.height()) + " does not match the calibration");
  if (!depth_paths[k].empty()) {
    try {
      out.depth = read_depth_png(depth_paths[k]);
    } catch (const Error& e) {
      detail::dataset_error(depth_paths[k], e.message());
    }
    if (!intrinsics.same_resolution(out.depth->width(), out.depth->height()))
      detail::dataset_error(depth_paths[k], "depth size does not match the calibration");
  }
  return out;
}

/// Reads a directory with calibration.txt, rgb.txt + rgb/, optional depth.txt + depth/ and
/// optional groundtruth.txt. Depth maps are 16-bit PNGs holding depth * 5000.
inline SequenceSource ingest(const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path root(path);
  if (!fs::is_directory(root)) detail::dataset_error(path, "not a directory");
  SequenceSource s;
  s.intrinsics = detail::read_calibration(root / "calibration.txt");
  const auto rgb = detail::read_file_list(root / "rgb.txt");
  if (rgb.empty()) detail::dataset_error((root / "rgb.txt").string(), "no frames listed");
  std::vector<detail::ListEntry> depth;
  if (fs::exists(root / "depth.txt")) depth = detail::read_file_list(root / "depth.txt");
  for (const auto& e : rgb) {
    s.timestamps.push_back(e.timestamp);
    const fs::path img = root / e.path;
    if (!fs::exists(img))
      detail::dataset_error((root / "rgb.txt").string() + ":" + std::to_string(e.line), "missing image " + img.string());
    s.image_paths.push_back(img.string());
    const int d = detail::nearest_within(
        depth.size(), [&](std::size_t k) { return depth[k].timestamp; }, e.timestamp, kDepthAssociationTolerance);
    s.depth_paths.push_back(d >= 0 ? (root / depth[static_cast<std::size_t>(d)].path).string() : std::string());
  }
  if (fs::exists(root / "groundtruth.txt")) {
    try {
      s.groundtruth = read_tum_trajectory((root / "groundtruth.txt").string());
    } catch (const Error& e) {
      detail::dataset_error((root / "groundtruth.txt").string(), e.message());
    }
  }
  detail::associate_poses(s);
  s.degraded.assign(s.timestamps.size(), 0);
  return s;
}

/// Writes a sequence in the layout read by `ingest`. Frames without depth get no depth entry.
inline void export_sequence(const SequenceSource& s, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path root(path);
  fs::create_directories(root / "rgb");
  fs::create_directories(root / "depth");
  {
    std::ofstream cal(root / "calibration.txt");
    require(static_cast<bool>(cal), ErrorCode::IoError, "cannot write " + (root / "calibration.txt").string());
    cal.precision(17);
    cal << "# fx fy cx cy width height\n"
        << s.intrinsics.fx << ' ' << s.intrinsics.fy << ' ' << s.intrinsics.cx << ' ' << s.intrinsics.cy << ' '
        << s.intrinsics.width << ' ' << s.intrinsics.height << '\n';
  }
  std::ofstream rgb(root / "rgb.txt"), depth(root / "depth.txt");
  require(rgb && depth, ErrorCode::IoError, "cannot write frame lists in " + path);
  rgb << "# timestamp filename\n";
  depth << "# timestamp filename\n";
  for (int i = 0; i < s.size(); ++i) {
    const auto f = s.load(i);
    const std::string ts = detail::format_timestamp(s.timestamps[static_cast<std::size_t>(i)]);
    png::write_rgb8((root / "rgb" / (ts + ".png")).string(), frame_to_rgb8(f.image));
    rgb << ts << " rgb/" << ts << ".png\n";
    if (f.depth) {
      write_depth_png((root / "depth" / (ts + ".png")).string(), *f.depth);
      depth << ts << " depth/" << ts << ".png\n";
    }
  }
  if (!s.groundtruth.empty()) write_tum_trajectory((root / "groundtruth.txt").string(), s.groundtruth);
}

/// Portable uniform integer in [0, n) from a seed and a counter.
inline std::size_t seeded_index(std::uint64_t seed, std::uint64_t counter, std::size_t n) {
  const std::uint64_t h = synth::splitmix64(synth::splitmix64(seed ^ 0x5bd1e995ULL) + counter);
  return static_cast<std::size_t>(h % n);
}

/// Frames whose texture is degraded: round(fraction * n) of frames 1..n-1, chosen by a
/// seeded Fisher-Yates shuffle. Frame 0 is never degraded.
inline std::vector<std::uint8_t> choose_degraded(int n, double fraction, std::uint64_t seed) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(std::max(n, 0)), 0);
  if (n < 2) return out;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(std::lround(fraction * n)),
                                           static_cast<std::size_t>(n - 1));
  std::vector<int> pool;
  for (int i = 1; i < n; ++i) pool.push_back(i);
  for (std::size_t i = pool.size(); i > 1; --i)
    std::swap(pool[i - 1], pool[seeded_index(seed, i, i)]);
  for (std::size_t i = 0; i < count; ++i) out[static_cast<std::size_t>(pool[i])] = 1;
  return out;
}

/// Texture degradation: blur, contrast reduced to 35% about the image mean, and deterministic
/// per-pixel noise.
inline void degrade_texture(ImageFrame& f, std::uint64_t seed) {
  require(f.rgb.has_value(), ErrorCode::InvalidArgument, "degradation needs a color image");
  Image<float> ch[3];
  for (int c = 0; c < 3; ++c) {
    ch[c] = Image<float>(f.width(), f.height(), 0.f);
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x) {
        const Rgb& p = (*f.rgb)(x, y);
        ch[c](x, y) = c == 0 ? p.r : c == 1 ? p.g : p.b;
      }
    ch[c] = box_filter(box_filter(ch[c], 1), 1);
  }
  double mean = 0.0;
  for (int c = 0; c < 3; ++c)
    for (float v : ch[c].pixels()) mean += v;
  mean /= 3.0 * f.width() * f.height();
  std::uint64_t counter = 0;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) {
      float v[3];
      for (int c = 0; c < 3; ++c) {
        const double noise = synth::signed_unit(seed, counter++) * 0.03;
        v[c] = static_cast<float>(std::clamp(mean + 0.35 * (ch[c](x, y) - mean) + noise, 0.0, 1.0));
      }
      const Rgb p{v[0], v[1], v[2]};
      (*f.rgb)(x, y) = p;
      f.intensity(x, y) = luminance(p);
    }
}

/// Orbit sequence rendered in memory, quantized exactly as `export_sequence` + `ingest` would
/// (8-bit color, depth in 1/5000 steps), so both paths yield identical frames.
inline SequenceSource make_synthetic_sequence(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const synth::SyntheticScene scene =
      cfg.scene == "builtin" ? synth::two_plane_sphere_scene() : synth::load_scene(cfg.scene);
  SequenceSource s;
  s.intrinsics = synth::centered_intrinsics(cfg.width, cfg.height, cfg.hfov_deg);
  synth::OrbitOptions opt;
  opt.height = cfg.camera_height;
  opt.arc_start = cfg.arc_start;
  opt.arc_span = cfg.arc_span;
  opt.angle_jitter = cfg.angle_jitter;
  opt.approach = cfg.approach;
  const auto poses = cfg.frames >= 2 ? synth::orbit_trajectory(scene, cfg.frames, cfg.radius, seed, opt)
                                     : synth::orbit_trajectory(scene, 2, cfg.radius, seed, opt);
  s.degraded = choose_degraded(cfg.frames, cfg.degraded_fraction, seed);
  for (int i = 0; i < cfg.frames; ++i) {
    // Timestamps pass through their text form so an exported copy reads back identically.
    const double t = std::stod(detail::format_timestamp(i * cfg.frame_interval));
    const auto& pose = poses[static_cast<std::size_t>(i)];
    auto r = synth::render(scene, pose, s.intrinsics, t, cfg.supersample);
    if (s.degraded[static_cast<std::size_t>(i)]) degrade_texture(r.image, seed * 1000003ULL + static_cast<std::uint64_t>(i));
    LoadedFrame f{frame_from_rgb8(frame_to_rgb8(r.image), t), decode_depth_png(encode_depth_png(r.depth))};
    s.memory.push_back(std::move(f));
    s.timestamps.push_back(t);
    s.image_paths.emplace_back();
    s.depth_paths.emplace_back();
    // Ground truth passes through the text format too.
    std::istringstream line(format_tum_line({t, pose}));
    s.groundtruth.push_back(parse_tum_trajectory(line).front());
  }
  detail::associate_poses(s);
  return s;
}

}  // namespace mf::pipeline
