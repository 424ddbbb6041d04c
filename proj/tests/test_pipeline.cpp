#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include "monofusion/pipeline.hpp"
#include "test_support.hpp"

using namespace mf;
using namespace mf::pipeline;

namespace {

template <typename Fn>
Error error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected an mf::Error";
  return Error(ErrorCode::IoError, "none");
}

std::vector<PoseSE3> line_poses(int n, double step) {
  std::vector<PoseSE3> out;
  for (int i = 0; i < n; ++i) out.emplace_back(Eigen::Matrix3d::Identity(), Eigen::Vector3d(step * i, 0, 0));
  return out;
}

SynthConfig tiny_synth(int frames) {
  SynthConfig s;
  s.frames = frames;
  s.width = 160;
  s.height = 120;
  s.supersample = 1;
  return s;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

// --- keyframes ---------------------------------------------------------------------------------

TEST(Keyframes, EveryFifthFrame) {
  KeyframePolicy p;
  p.every_k = 5;
  EXPECT_EQ(select_keyframes(line_poses(20, 0.0), p), (std::vector<int>{0, 5, 10, 15}));
}

TEST(Keyframes, StationaryCameraUnderTranslationRule) {
  KeyframePolicy p;
  p.translation = 0.1;
  EXPECT_EQ(select_keyframes(line_poses(20, 0.0), p), (std::vector<int>{0}));
}

TEST(Keyframes, TranslationRuleMeasuresFromLastKeyframe) {
  KeyframePolicy p;
  p.translation = 0.1;
  EXPECT_EQ(select_keyframes(line_poses(10, 0.04), p), (std::vector<int>{0, 3, 6, 9}));
}

TEST(Keyframes, EveryFrameWhenKIsOne) {
  KeyframePolicy p;
  p.every_k = 1;
  EXPECT_EQ(select_keyframes(line_poses(6, 0.0), p), (std::vector<int>{0, 1, 2, 3, 4, 5}));
}

TEST(Keyframes, InvalidPolicyIsRejected) {
  KeyframePolicy p;
  p.every_k = 0;
  EXPECT_EQ(error_of([&] { select_keyframes(line_poses(3, 0.0), p); }).code(), ErrorCode::InvalidArgument);
}

// --- dataset -----------------------------------------------------------------------------------

TEST(Ingest, MissingCalibrationNamesTheFile) {
  const auto dir = test::temp_dir("ingest_nocal");
  write_text(dir / "rgb.txt", "0.0 rgb/a.png\n");
  const auto e = error_of([&] { ingest(dir.string()); });
  EXPECT_EQ(e.code(), ErrorCode::DatasetError);
  EXPECT_NE(e.message().find("calibration.txt"), std::string::npos) << e.message();
}

TEST(Ingest, NonMonotoneTimestampsAreRejected) {
  const auto dir = test::temp_dir("ingest_order");
  write_text(dir / "calibration.txt", "100 100 31.5 23.5 64 48\n");
  write_text(dir / "rgb.txt", "# comment\n1.0 rgb/a.png\n0.5 rgb/b.png\n");
  const auto e = error_of([&] { ingest(dir.string()); });
  EXPECT_EQ(e.code(), ErrorCode::DatasetError);
  EXPECT_NE(e.message().find("rgb.txt:3"), std::string::npos) << e.message();
}

TEST(Ingest, MissingImageIsReported) {
  const auto dir = test::temp_dir("ingest_missing");
  write_text(dir / "calibration.txt", "100 100 31.5 23.5 64 48\n");
  write_text(dir / "rgb.txt", "1.0 rgb/none.png\n");
  EXPECT_EQ(error_of([&] { ingest(dir.string()); }).code(), ErrorCode::DatasetError);
}

TEST(Ingest, ExportRoundTripsBitExactly) {
  const auto dir = test::temp_dir("ingest_roundtrip");
  std::filesystem::remove_all(dir);
  auto cfg = tiny_synth(4);
  cfg.degraded_fraction = 0.25;
  const auto mem = make_synthetic_sequence(cfg, 4);
  export_sequence(mem, dir.string());
  const auto disk = ingest(dir.string());

  ASSERT_EQ(disk.size(), mem.size());
  EXPECT_EQ(disk.intrinsics.fx, mem.intrinsics.fx);
  EXPECT_EQ(disk.intrinsics.cx, mem.intrinsics.cx);
  EXPECT_EQ(disk.timestamps, mem.timestamps);
  ASSERT_TRUE(disk.has_all_poses());
  for (int i = 0; i < mem.size(); ++i) {
    const auto a = mem.load(i), b = disk.load(i);
    EXPECT_EQ(a.image.intensity, b.image.intensity) << i;
    ASSERT_TRUE(a.depth && b.depth);
    EXPECT_EQ(a.depth->depth, b.depth->depth) << i;
    const auto& pa = *mem.frame_poses[static_cast<std::size_t>(i)];
    const auto& pb = *disk.frame_poses[static_cast<std::size_t>(i)];
    EXPECT_LT((pa.translation() - pb.translation()).norm(), 1e-12);
    EXPECT_LT((pa.rotation() - pb.rotation()).norm(), 1e-12);
  }
}

TEST(Synthetic, DegradedFramesAreSeededAndSkipFrameZero) {
  const auto a = choose_degraded(60, 0.1, 7), b = choose_degraded(60, 0.1, 7), c = choose_degraded(60, 0.1, 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(std::count(a.begin(), a.end(), 1), 6);
  EXPECT_EQ(a[0], 0);
}

TEST(Synthetic, DegradationLowersContrast) {
  const auto s = make_synthetic_sequence(tiny_synth(2), 1);
  auto f = s.load(1).image;
  const auto spread = [](const Image<float>& im) {
    const auto [lo, hi] = std::minmax_element(im.pixels().begin(), im.pixels().end());
    return *hi - *lo;
  };
  const float before = spread(f.intensity);
  degrade_texture(f, 3);
  EXPECT_LT(spread(f.intensity), 0.6f * before);
}

// --- config ------------------------------------------------------------------------------------

TEST(Config, ParsesKnownKeys) {
  const auto kv = KeyValueConfig::parse_string(
      "dataset.format = synth\nmode = mapping_only\nkeyframes.every_k = 3\nwindow.size = 5\n"
      "tracking.depth_buffer = sparse_only\ntsdf.voxel_size = 0.015\nsynth.frames = 12\nseed = 9\n");
  const auto c = parse_pipeline_config(kv);
  EXPECT_EQ(c.format, DatasetFormat::Synth);
  EXPECT_EQ(c.mode, RunMode::MappingOnly);
  EXPECT_EQ(c.keyframes.every_k, 3);
  EXPECT_EQ(c.window, 5);
  EXPECT_EQ(c.tracking.buffer, DepthBufferMode::SparseOnly);
  EXPECT_EQ(c.tsdf.voxel_size, 0.015);
  EXPECT_EQ(c.synth.frames, 12);
  EXPECT_EQ(c.seed, 9u);
}

TEST(Config, DefaultsMatchDocumentedValues) {
  const auto c = parse_pipeline_config(KeyValueConfig::parse_string("dataset.path = somewhere\n"));
  EXPECT_EQ(c.keyframes.every_k, 5);
  EXPECT_EQ(c.window, 7);
  EXPECT_EQ(c.mode, RunMode::TrackAndMap);
}

TEST(Config, TumFormatNeedsAPath) {
  EXPECT_EQ(error_of([] { parse_pipeline_config(KeyValueConfig::parse_string("")); }).code(), ErrorCode::InvalidArgument);
}

TEST(Config, UnknownKeyIsFormatError) {
  const auto e = error_of([] { parse_pipeline_config(KeyValueConfig::parse_string("tsdf.voxel = 0.01\n")); });
  EXPECT_EQ(e.code(), ErrorCode::FormatError);
  EXPECT_NE(e.message().find("tsdf.voxel"), std::string::npos);
}

TEST(Config, BadEnumValueIsFormatError) {
  EXPECT_EQ(error_of([] { parse_pipeline_config(KeyValueConfig::parse_string("mode = fly\n")); }).code(),
            ErrorCode::FormatError);
}

// --- queue -------------------------------------------------------------------------------------

TEST(SpscQueue, DeliversInOrderAndDrainsAfterClose) {
  SpscQueue<int> q;
  std::vector<int> got;
  std::thread consumer([&] {
    while (auto v = q.pop()) got.push_back(*v);
  });
  for (int i = 0; i < 10000; ++i) q.push(i);
  q.close();
  consumer.join();
  ASSERT_EQ(got.size(), 10000u);
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(got[static_cast<std::size_t>(i)], i);
}

// --- end to end --------------------------------------------------------------------------------

TEST(Run, SingleFrameSequenceIsRejected) {
  PipelineConfig cfg;
  cfg.format = DatasetFormat::Synth;
  cfg.synth = tiny_synth(1);
  const auto src = load_source(cfg);
  EXPECT_EQ(error_of([&] { run(cfg, src); }).code(), ErrorCode::DatasetError);
}

TEST(Run, SmallTrackAndMapSequence) {
  PipelineConfig cfg;
  cfg.format = DatasetFormat::Synth;
  cfg.synth = tiny_synth(11);
  cfg.keyframes.every_k = 2;
  cfg.window = 4;
  cfg.tracking.tracker.levels = 3;  // 160x120 leaves too few sparse pixels at a fourth level
  const auto src = load_source(cfg);
  const auto r = run(cfg, src);
  EXPECT_EQ(r.trajectory.size(), 11u);
  EXPECT_EQ(r.keyframes.size(), 6u);
  ASSERT_TRUE(r.ate_sim3.has_value());
  EXPECT_LT(r.ate_sim3->ate_rmse, 0.01 * cfg.synth.radius);
  ASSERT_TRUE(r.depth_report.has_value());
  EXPECT_FALSE(r.mesh.faces.empty());

  const auto dir = test::temp_dir("run_outputs");
  write_outputs(r, dir.string(), "tiny");
  for (const char* f : {"trajectory.txt", "mesh.ply", "metrics.json", "metrics.csv", "tracking.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  EXPECT_EQ(read_tum_trajectory((dir / "trajectory.txt").string()).size(), 11u);
}
