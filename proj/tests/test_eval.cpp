#include <gtest/gtest.h>

#include <array>
#include <cstring>
#include <map>
#include <random>

#include "monofusion/eval.hpp"
#include "test_support.hpp"

using namespace mf;
using namespace mf::eval;

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

DepthMap row_map(std::initializer_list<double> values) {
  DepthMap m(static_cast<int>(values.size()), 1);
  int x = 0;
  for (double v : values) m.set(x++, 0, v);
  return m;
}

/// Straight per-pixel loop written independently of the library.
DepthMetrics brute_force(const DepthMap& pred, const DepthMap& gt) {
  DepthMetrics m;
  double abs = 0.0;
  double c1 = 0, c2 = 0, c3 = 0, cd = 0, gt_count = 0;
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x) {
      if (!gt.is_valid(x, y)) continue;
      gt_count += 1;
      if (!pred.is_valid(x, y)) continue;
      const double g = gt.depth(x, y), p = pred.depth(x, y);
      abs += std::fabs(p - g);
      const double rel = std::fabs(p - g) / g;
      if (rel < 0.1) c1 += 1;
      if (rel < 0.01) c2 += 1;
      if (rel < 0.001) c3 += 1;
      if ((p / g > g / p ? p / g : g / p) < 1.25) cd += 1;
      m.n += 1;
    }
  const double n = static_cast<double>(m.n);
  m.abs_cm = 100.0 * abs / n;
  m.a1 = 100.0 * c1 / n;
  m.a2 = 100.0 * c2 / n;
  m.a3 = 100.0 * c3 / n;
  m.d1 = 100.0 * cd / n;
  m.coverage = 100.0 * n / gt_count;
  return m;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

Trajectory random_trajectory(std::mt19937_64& rng, int n, double t0 = 0.0) {
  Trajectory t;
  for (int i = 0; i < n; ++i) t.push_back({t0 + 0.1 * i, test::random_pose(rng)});
  return t;
}

std::vector<Eigen::Vector3d> fibonacci_sphere(std::size_t n, double radius) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(n);
  const double golden = test::kPi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden * static_cast<double>(i);
    out.emplace_back(radius * r * std::cos(phi), radius * r * std::sin(phi), radius * z);
  }
  return out;
}

/// Subdivided icosahedron projected onto a sphere.
tsdf::TriangleMesh icosphere(double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v{{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                 {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<std::array<int, 3>> f{{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                                    {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
                                    {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      const auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back(0.5 * (v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]));
      return mid[key] = static_cast<int>(v.size()) - 1;
    };
    std::vector<std::array<int, 3>> next;
    for (const auto& tri : f) {
      const int a = midpoint(tri[0], tri[1]), b = midpoint(tri[1], tri[2]), c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  tsdf::TriangleMesh m;
  for (auto& p : v) m.vertices.push_back(radius * p.normalized());
  m.faces = f;
  return m;
}

}  // namespace

// --- depth metrics -----------------------------------------------------------------------------

TEST(DepthMetrics, PerfectPrediction) {
  const auto gt = row_map({0.5, 1.0, 2.0, 7.25});
  const auto m = depth_metrics(gt, gt);
  EXPECT_EQ(m.a1, 100.0);
  EXPECT_EQ(m.a2, 100.0);
  EXPECT_EQ(m.a3, 100.0);
  EXPECT_EQ(m.d1, 100.0);
  EXPECT_EQ(m.abs_cm, 0.0);
  EXPECT_EQ(m.coverage, 100.0);
}

TEST(DepthMetrics, HandComputedFourPixels) {
  const auto m = depth_metrics(row_map({1.05, 1.2, 0.999, 2.6}), row_map({1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(m.a1, 50.0);
  EXPECT_DOUBLE_EQ(m.d1, 75.0);
  EXPECT_NEAR(m.abs_cm, 100.0 * (0.05 + 0.2 + 0.001 + 1.6) / 4.0, 1e-12);
  EXPECT_NEAR(m.abs_cm, 46.275, 1e-12);
  EXPECT_EQ(m.n, 4u);
}

TEST(DepthMetrics, RatioOfExactlyOnePointTwoFiveFailsD1) {
  const auto gt = row_map({1.0, 2.0, 4.0, 0.5});
  const auto pred = row_map({1.25, 2.5, 5.0, 0.625});
  EXPECT_EQ(depth_metrics(pred, gt).d1, 0.0);
  EXPECT_EQ(depth_metrics(gt, pred).d1, 0.0);  // symmetric ratio
}

TEST(DepthMetrics, CoverageCountsMissingPredictions) {
  auto pred = row_map({1.0, 1.0, 1.0, 1.0});
  pred.invalidate(3, 0);
  const auto m = depth_metrics(pred, row_map({1, 1, 1, 1}));
  EXPECT_EQ(m.n, 3u);
  EXPECT_DOUBLE_EQ(m.coverage, 75.0);
}

TEST(DepthMetrics, ErrorsForMismatchAndNoOverlap) {
  EXPECT_EQ(code_of([] { depth_metrics(DepthMap(3, 2), DepthMap(2, 3)); }), ErrorCode::ResolutionMismatch);
  EXPECT_EQ(code_of([] { depth_metrics(DepthMap(3, 2), DepthMap(3, 2)); }), ErrorCode::NoValidPixels);
}

TEST(DepthMetrics, MatchesBruteForceBitForBit) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> depth(0.2, 8.0), noise(0.7, 1.4), coin(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    DepthMap pred(16, 16), gt(16, 16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const double g = depth(rng);
        if (coin(rng) > 0.1) gt.set(x, y, g);
        if (coin(rng) > 0.1) pred.set(x, y, g * noise(rng));
      }
    const auto a = depth_metrics(pred, gt), b = brute_force(pred, gt);
    EXPECT_EQ(a.n, b.n);
    EXPECT_TRUE(bit_equal(a.abs_cm, b.abs_cm)) << trial;
    EXPECT_TRUE(bit_equal(a.a1, b.a1)) << trial;
    EXPECT_TRUE(bit_equal(a.a2, b.a2)) << trial;
    EXPECT_TRUE(bit_equal(a.a3, b.a3)) << trial;
    EXPECT_TRUE(bit_equal(a.d1, b.d1)) << trial;
    EXPECT_TRUE(bit_equal(a.coverage, b.coverage)) << trial;
  }
}

TEST(SequenceMetrics, SingleImageIsItself) {
  const auto m = depth_metrics(row_map({1.05, 1.2, 0.999, 2.6}), row_map({1, 1, 1, 1}));
  const auto r = sequence_metrics({m});
  EXPECT_EQ(r.mean.a1, m.a1);
  EXPECT_EQ(r.mean.abs_cm, m.abs_cm);
  EXPECT_EQ(r.mean.d1, m.d1);
}

TEST(SequenceMetrics, ImagesCountEquallyRegardlessOfPixels) {
  DepthMetrics big, small;
  big.a1 = 100.0;
  big.n = 100000;
  small.a1 = 0.0;
  small.n = 3;
  EXPECT_EQ(sequence_metrics({big, small}).mean.a1, 50.0);
}

TEST(SequenceMetrics, EmptyListIsRejected) {
  EXPECT_EQ(code_of([] { sequence_metrics({}); }), ErrorCode::EmptySequence);
}

// --- trajectory --------------------------------------------------------------------------------

TEST(Ate, IdenticalTrajectoriesHaveZeroError) {
  std::mt19937_64 rng(22);
  const auto t = random_trajectory(rng, 20);
  EXPECT_LT(ate_rmse(t, t).ate_rmse, 1e-12);
}

TEST(Ate, SimilarityTransformIsAbsorbedInSim3Mode) {
  std::mt19937_64 rng(23);
  const auto est = random_trajectory(rng, 30);
  const Sim3 s{0.37, test::random_pose(rng)};
  Trajectory gt;
  for (const auto& sp : est) gt.push_back({sp.timestamp, s.transform_pose(sp.pose)});
  const auto r = ate_rmse(est, gt, AlignmentMode::Sim3);
  EXPECT_LT(r.ate_rmse, 1e-9);
  EXPECT_NEAR(r.alignment.scale, 0.37, 1e-9);
}

TEST(Ate, Se3ModeDoesNotAbsorbScale) {
  std::mt19937_64 rng(24);
  const auto est = random_trajectory(rng, 30);
  const Sim3 s{2.0, test::random_pose(rng)};
  Trajectory gt;
  for (const auto& sp : est) gt.push_back({sp.timestamp, s.transform_pose(sp.pose)});
  EXPECT_GT(ate_rmse(est, gt, AlignmentMode::SE3).ate_rmse, 0.1);
  EXPECT_LT(ate_rmse(est, gt, AlignmentMode::Sim3).ate_rmse, 1e-9);
}

TEST(Ate, ResidualOracleAfterKnownOffset) {
  // Four coplanar centers; one pushed off-plane by h. Rigid alignment cannot remove it, so the
  // residual equals the least-squares solution of that small problem, checked via Umeyama.
  Trajectory est, gt;
  const std::vector<Eigen::Vector3d> c{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  for (std::size_t i = 0; i < c.size(); ++i) {
    est.push_back({static_cast<double>(i), PoseSE3(Eigen::Matrix3d::Identity(), c[i])});
    gt.push_back({static_cast<double>(i), PoseSE3(Eigen::Matrix3d::Identity(), c[i])});
  }
  const double h = 0.01;
  gt[3].pose = PoseSE3(Eigen::Matrix3d::Identity(), c[3] + Eigen::Vector3d(0, 0, h));
  const auto r = ate_rmse(est, gt, AlignmentMode::SE3);
  EXPECT_GT(r.ate_rmse, 0.0);
  EXPECT_LT(r.ate_rmse, h / 2.0 + 1e-12);  // at most the error of translating by h/4
}

TEST(Associate, NearestWithinToleranceAndUsedOnce) {
  Trajectory est{{1.000, {}}, {1.004, {}}, {2.0, {}}};
  Trajectory gt{{0.995, {}}, {1.003, {}}, {1.5, {}}};
  const auto m = associate(est, gt, 0.01);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].estimated, 0u);
  EXPECT_EQ(m[0].ground_truth, 1u);  // 0.003 away beats 0.005
  EXPECT_EQ(m[1].estimated, 1u);
  EXPECT_EQ(m[1].ground_truth, 0u);  // 1.003 taken; 0.995 is 0.009 away
}

TEST(Associate, TiesGoToLaterStamp) {
  Trajectory est{{1.0, {}}};
  Trajectory gt{{0.75, {}}, {1.25, {}}};
  const auto m = associate(est, gt, 0.5);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].ground_truth, 1u);
}

TEST(Ate, TooFewMatchesIsRejected) {
  std::mt19937_64 rng(25);
  const auto a = random_trajectory(rng, 5, 0.0), b = random_trajectory(rng, 5, 100.0);
  EXPECT_EQ(code_of([&] { ate_rmse(a, b); }), ErrorCode::TooFewMatches);
}

// --- mesh quality ------------------------------------------------------------------------------

TEST(MeshQuality, IdenticalPointSetsArePerfect) {
  const auto pts = fibonacci_sphere(2000, 1.0);
  const auto q = point_accuracy_completeness(pts, pts, 5.0);
  EXPECT_EQ(q.accuracy_cm, 0.0);
  EXPECT_EQ(q.completion_cm, 0.0);
  EXPECT_EQ(q.completion_ratio, 100.0);
}

TEST(MeshQuality, ConcentricPointSpheresAreOneCentimeterApart) {
  const auto gt = fibonacci_sphere(5000, 1.0);
  std::vector<Eigen::Vector3d> pred;
  for (const auto& p : gt) pred.push_back(1.01 * p);
  const auto q = point_accuracy_completeness(pred, gt, 5.0);
  EXPECT_NEAR(q.accuracy_cm, 1.0, 1e-9);
  EXPECT_NEAR(q.completion_cm, 1.0, 1e-9);
  EXPECT_EQ(q.completion_ratio, 100.0);
}

TEST(MeshQuality, ConcentricMeshSphere) {
  // Sampling density bounds the nearest-neighbour offset: tangential spacing ~3.5 mm at 1M points
  // adds well under 0.1 mm on average to the 1 cm radial gap.
  const auto gt = fibonacci_sphere(1000000, 1.0);
  const auto q = mesh_accuracy_completeness(icosphere(1.01, 7), gt, 5.0, 1000000, 3);
  EXPECT_NEAR(q.accuracy_cm, 1.0, 0.05);
  EXPECT_NEAR(q.completion_cm, 1.0, 0.05);
  EXPECT_EQ(q.completion_ratio, 100.0);
}

TEST(MeshQuality, EmptyMeshIsRejected) {
  const auto gt = fibonacci_sphere(10, 1.0);
  EXPECT_EQ(code_of([&] { mesh_accuracy_completeness(tsdf::TriangleMesh{}, gt, 5.0); }), ErrorCode::EmptyInput);
}

TEST(KdTree, AgreesWithLinearScan) {
  std::mt19937_64 rng(26);
  std::normal_distribution<double> g;
  std::vector<Eigen::Vector3d> pts(3000);
  for (auto& p : pts) p = {g(rng), g(rng), g(rng)};
  const KdTree tree(pts);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d q(g(rng), g(rng), g(rng));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) best = std::min(best, (p - q).norm());
    EXPECT_DOUBLE_EQ(tree.nearest_distance(q), best);
  }
}

// --- reports -----------------------------------------------------------------------------------

TEST(Report, JsonAndCsvCarryTheMetrics) {
  const auto m = depth_metrics(row_map({1.05, 1.2, 0.999, 2.6}), row_map({1, 1, 1, 1}));
  const auto r = sequence_metrics({m, m});
  const auto j = to_json(r);
  EXPECT_DOUBLE_EQ(j["mean"]["a1_pct"].get<double>(), 50.0);
  const auto row = depth_csv_row("seq", r);
  const auto commas = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  EXPECT_EQ(commas(row), commas(depth_csv_header()));
  EXPECT_EQ(row.rfind("seq,2,", 0), 0u);
}
