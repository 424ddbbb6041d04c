#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "monofusion/geometry.hpp"
#include "test_support.hpp"

using namespace mf;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an mf::Error";
  return ErrorCode::IoError;
}

CameraIntrinsics vga() { return {600.0, 600.0, 320.0, 240.0, 640, 480}; }

}  // namespace

TEST(Project, OpticalAxisMapsToPrincipalPoint) {
  const CameraIntrinsics unit{1.0, 1.0, 0.0, 0.0, 8, 8};
  const auto p = project(unit, {0.0, 0.0, 1.0});
  EXPECT_EQ(p.pixel, Eigen::Vector2d(0.0, 0.0));
  EXPECT_EQ(p.depth, 1.0);
}

TEST(Project, HandEvaluatedPinhole) {
  // u = 600 * 1 / 2 + 320, v = 600 * 0 / 2 + 240
  const auto p = project(vga(), {1.0, 0.0, 2.0});
  EXPECT_DOUBLE_EQ(p.pixel.x(), 620.0);
  EXPECT_DOUBLE_EQ(p.pixel.y(), 240.0);
  EXPECT_DOUBLE_EQ(p.depth, 2.0);
}

TEST(Project, RejectsPointsBehindCamera) {
  EXPECT_EQ(code_of([] { project(vga(), {0.0, 0.0, 0.0}); }), ErrorCode::NonPositiveDepth);
  EXPECT_EQ(code_of([] { project(vga(), {1.0, 1.0, -2.0}); }), ErrorCode::NonPositiveDepth);
}

TEST(Unproject, PrincipalPointGivesAxisPoint) {
  EXPECT_EQ(unproject(vga(), {320.0, 240.0}, 3.5), Eigen::Vector3d(0.0, 0.0, 3.5));
}

TEST(Unproject, RoundTripsWithProject) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> px(0.0, 639.0), py(0.0, 479.0), pd(0.05, 20.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector2d pix(px(rng), py(rng));
    const double d = pd(rng);
    const auto back = project(vga(), unproject(vga(), pix, d));
    worst = std::max({worst, (back.pixel - pix).norm(), std::abs(back.depth - d)});
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(Unproject, RejectsZeroDepth) {
  EXPECT_EQ(code_of([] { unproject(vga(), {1.0, 1.0}, 0.0); }), ErrorCode::NonPositiveDepth);
}

TEST(CameraIntrinsics, DownsampledKeepsPixelCenters) {
  const auto half = vga().downsampled(2);
  EXPECT_EQ(half.width, 320);
  EXPECT_EQ(half.height, 240);
  // Fine pixels 0 and 1 average into coarse pixel 0, whose center sits at fine 0.5.
  const Eigen::Vector3d p = unproject(vga(), {0.5, 0.5}, 2.0);
  const auto c = project(half, p);
  EXPECT_NEAR(c.pixel.x(), 0.0, 1e-12);
  EXPECT_NEAR(c.pixel.y(), 0.0, 1e-12);
}

TEST(RelativePose, EqualPosesGiveIdentity) {
  std::mt19937_64 rng(1);
  const auto t = test::random_pose(rng);
  const auto r = relative_pose(t, t);
  EXPECT_TRUE(r.matrix().isApprox(Eigen::Matrix4d::Identity(), 1e-12));
}

TEST(RelativePose, IdentityFirstReturnsSecond) {
  std::mt19937_64 rng(2);
  const auto t = test::random_pose(rng);
  EXPECT_TRUE(relative_pose(PoseSE3::identity(), t).matrix().isApprox(t.matrix(), 1e-14));
}

TEST(RelativePose, ComposesBack) {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto a = test::random_pose(rng), b = test::random_pose(rng);
    worst = std::max(worst, ((a * relative_pose(a, b)).matrix() - b.matrix()).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(PoseSE3, MatchesHomogeneousMatrixAlgebra) {
  std::mt19937_64 rng(4);
  const auto a = test::random_pose(rng), b = test::random_pose(rng);
  const Eigen::Matrix4d m = a.matrix() * b.matrix();
  EXPECT_TRUE((a * b).matrix().isApprox(m, 1e-12));
  EXPECT_TRUE(a.inverse().matrix().isApprox(a.matrix().inverse(), 1e-12));
  const Eigen::Vector3d p(0.3, -1.2, 2.0);
  EXPECT_TRUE((a * p).isApprox((a.matrix() * p.homogeneous()).head<3>(), 1e-12));
}

TEST(PoseSE3, LongChainsStayOrthonormal) {
  std::mt19937_64 rng(5);
  PoseSE3 acc;
  for (int i = 0; i < 5000; ++i) acc = acc * test::random_pose(rng, 0.3, 0.1);
  const Eigen::Matrix3d r = acc.rotation();
  EXPECT_LT((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
}

TEST(Se3, ZeroTwistIsIdentity) {
  EXPECT_TRUE(se3_exp(Vector6d::Zero()).matrix().isApprox(Eigen::Matrix4d::Identity(), 0.0));
}

TEST(Se3, PureTranslationTwist) {
  Vector6d tw;
  tw << 0, 0, 0, 1, 2, 3;
  const auto t = se3_exp(tw);
  EXPECT_EQ(t.rotation(), Eigen::Matrix3d::Identity());
  EXPECT_TRUE(t.translation().isApprox(Eigen::Vector3d(1, 2, 3), 1e-15));
}

TEST(Se3, RotationPartIsRodrigues) {
  Vector6d tw;
  tw << 0.3, -0.2, 0.9, 0, 0, 0;
  const Eigen::Vector3d w = tw.head<3>();
  const Eigen::Matrix3d expected = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
  EXPECT_TRUE(se3_exp(tw).rotation().isApprox(expected, 1e-14));
}

TEST(Se3, MatrixExponentialOracle) {
  // Compare against the truncated power series of the 4x4 twist matrix.
  Vector6d tw;
  tw << 0.4, 0.1, -0.7, 0.5, -1.0, 0.25;
  Eigen::Matrix4d xi = Eigen::Matrix4d::Zero();
  xi.topLeftCorner<3, 3>() = hat(tw.head<3>());
  xi.topRightCorner<3, 1>() = tw.tail<3>();
  Eigen::Matrix4d sum = Eigen::Matrix4d::Identity(), term = Eigen::Matrix4d::Identity();
  for (int k = 1; k < 40; ++k) {
    term = term * xi / k;
    sum += term;
  }
  EXPECT_TRUE(se3_exp(tw).matrix().isApprox(sum, 1e-13));
}

TEST(Se3, LogExpRoundTrip) {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto t = test::random_pose(rng, 3.0, 2.0);
    worst = std::max(worst, (se3_exp(se3_log(t)).matrix() - t.matrix()).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Se3, SmallAnglesAreStable) {
  Vector6d tw;
  tw << 1e-9, -2e-9, 5e-10, 0.1, 0.2, -0.3;
  EXPECT_TRUE(se3_log(se3_exp(tw)).isApprox(tw, 1e-9));
}

TEST(Umeyama, IdentityOnEqualClouds) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  std::vector<Eigen::Vector3d> pts(50);
  for (auto& p : pts) p = {g(rng), g(rng), g(rng)};
  const auto s = align_umeyama_sim3(pts, pts);
  EXPECT_NEAR(s.scale, 1.0, 1e-12);
  EXPECT_TRUE(s.rigid.matrix().isApprox(Eigen::Matrix4d::Identity(), 1e-12));
}

TEST(Umeyama, RecoversConstructedSimilarity) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  std::vector<Eigen::Vector3d> src(100), dst;
  for (auto& p : src) p = {g(rng), g(rng), g(rng)};
  const Sim3 truth{2.7, test::random_pose(rng)};
  for (const auto& p : src) dst.push_back(truth * p);
  const auto s = align_umeyama_sim3(src, dst);
  EXPECT_NEAR(s.scale, truth.scale, 1e-9);
  EXPECT_LT(rotation_angle(s.rigid.rotation().transpose() * truth.rigid.rotation()), 1e-9);
  EXPECT_LT((s.rigid.translation() - truth.rigid.translation()).norm(), 1e-9);
}

TEST(Umeyama, Se3ModeKeepsUnitScale) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  std::vector<Eigen::Vector3d> src(30), dst;
  for (auto& p : src) p = {g(rng), g(rng), g(rng)};
  const PoseSE3 truth = test::random_pose(rng);
  for (const auto& p : src) dst.push_back(truth * p);
  const auto s = align_umeyama(src, dst, AlignmentMode::SE3);
  EXPECT_EQ(s.scale, 1.0);
  EXPECT_TRUE(s.rigid.matrix().isApprox(truth.matrix(), 1e-10));
}

TEST(Umeyama, TwoPointsAreDegenerate) {
  const std::vector<Eigen::Vector3d> two{{0, 0, 0}, {1, 0, 0}};
  EXPECT_EQ(code_of([&] { align_umeyama_sim3(two, two); }), ErrorCode::DegenerateConfiguration);
}

TEST(Umeyama, CollinearPointsAreDegenerate) {
  const std::vector<Eigen::Vector3d> line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  EXPECT_EQ(code_of([&] { align_umeyama_sim3(line, line); }), ErrorCode::DegenerateConfiguration);
}

TEST(TumTrajectory, FormatsAndParsesBack) {
  std::mt19937_64 rng(11);
  Trajectory traj;
  for (int i = 0; i < 5; ++i) traj.push_back({1305031102.175304 + 0.033 * i, test::random_pose(rng)});
  std::istringstream in(format_tum_trajectory(traj));
  const auto back = parse_tum_trajectory(in);
  ASSERT_EQ(back.size(), traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    EXPECT_NEAR(back[i].timestamp, traj[i].timestamp, 1e-6);
    EXPECT_TRUE(back[i].pose.matrix().isApprox(traj[i].pose.matrix(), 1e-8));
  }
}

TEST(TumTrajectory, SkipsCommentsAndRejectsShortLines) {
  std::istringstream ok("# comment\n1.0 0 0 0 0 0 0 1\n\n2.0 1 2 3 0 0 0 1\n");
  EXPECT_EQ(parse_tum_trajectory(ok).size(), 2u);
  std::istringstream bad("1.0 0 0 0 0 0 1\n");
  EXPECT_EQ(code_of([&] { parse_tum_trajectory(bad); }), ErrorCode::FormatError);
}
