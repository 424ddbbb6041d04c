#include <gtest/gtest.h>

#include <random>

#include "monofusion/eval/depth_metrics.hpp"
#include "monofusion/mvs.hpp"
#include "test_support.hpp"

using namespace mf;
using namespace mf::mvs;

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

FeatureVolume random_volume(std::mt19937_64& rng, int c, int d, int h, int w) {
  std::uniform_real_distribution<float> u(-2.f, 2.f);
  FeatureVolume v{Tensor<float, 4>({c, d, h, w}), Tensor<std::uint8_t, 3>({d, h, w}, 1)};
  for (float& x : v.values.values()) x = u(rng);
  return v;
}

std::vector<Tensor<double, 3>> zero_weights(int n, int d, int h, int w) {
  return std::vector<Tensor<double, 3>>(static_cast<std::size_t>(n), Tensor<double, 3>({d, h, w}, 0.0));
}

CostVolume full_cost(int d, int h, int w, double fill = 0.0) {
  return {Tensor<double, 3>({d, h, w}, fill), Tensor<std::uint8_t, 3>({d, h, w}, 2), 4.0};
}

DepthHypotheses constant_hypotheses(std::initializer_list<double> planes, int h, int w) {
  DepthHypotheses hyp{Tensor<double, 3>({static_cast<int>(planes.size()), h, w})};
  int k = 0;
  for (double d : planes) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) hyp.depths(k, y, x) = d;
    ++k;
  }
  return hyp;
}

double channel_mean_sq(const FeatureVolume& a, const FeatureVolume& b, int d, int y, int x) {
  double s = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    const double diff = static_cast<double>(a.values(c, d, y, x)) - b.values(c, d, y, x);
    s += diff * diff;
  }
  return s / a.channels();
}

}  // namespace

// --- hypotheses ---------------------------------------------------------------------------------

TEST(Hypotheses, StageOneSpacing) {
  const MvsConfig cfg;
  const auto hyp = hypotheses_stage1(cfg, 3, 4);
  ASSERT_EQ(hyp.planes(), 48);
  const double step = 9.99 / 47.0;
  EXPECT_NEAR(step, 0.2126, 5e-4);
  for (int k = 0; k < 48; ++k) EXPECT_NEAR(hyp.depths(k, 2, 3), 0.01 + k * step, 1e-12);
  EXPECT_DOUBLE_EQ(hyp.depths(47, 0, 0), 10.0);
}

TEST(Hypotheses, TwoPlanesAreTheBounds) {
  MvsConfig cfg;
  cfg.planes = {2, 2, 2};
  const auto hyp = hypotheses_stage1(cfg, 2, 2);
  EXPECT_EQ(hyp.depths(0, 1, 1), cfg.d_min);
  EXPECT_EQ(hyp.depths(1, 1, 1), cfg.d_max);
}

TEST(Hypotheses, StageOneIsMonotone) {
  const auto hyp = hypotheses_stage1(MvsConfig{}, 5, 7);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x)
      for (int k = 1; k < hyp.planes(); ++k) ASSERT_GT(hyp.depths(k, y, x), hyp.depths(k - 1, y, x));
}

TEST(Hypotheses, RefinedLadderIsCenteredOnPrior) {
  const MvsConfig cfg;
  DepthMap prior(2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) prior.set(x, y, 2.0);
  const auto hyp = hypotheses_refined(prior, cfg, 2);
  ASSERT_EQ(hyp.planes(), 4);
  ASSERT_EQ(hyp.width(), 4);
  const double interval = 9.99 / 47.0 / 2.0;
  EXPECT_NEAR(interval, 0.1063, 5e-5);
  // center +- (k - 1.5) * interval
  const double expected[4] = {1.8406, 1.9469, 2.0531, 2.1594};
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(hyp.depths(k, 3, 1), 2.0 + (k - 1.5) * interval, 1e-12);
    EXPECT_NEAR(hyp.depths(k, 3, 1), expected[k], 1e-4);
  }
}

TEST(Hypotheses, StageIntervalsHalveAndQuarter) {
  const MvsConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.stage_interval(2) / cfg.stage_interval(1), 0.5);
  EXPECT_DOUBLE_EQ(cfg.stage_interval(3) / cfg.stage_interval(1), 0.25);
  EXPECT_NEAR(cfg.stage_interval(2), 0.1063, 5e-4);
  EXPECT_NEAR(cfg.stage_interval(3), 0.0532, 5e-4);
}

TEST(Hypotheses, LowPriorIsClampedAndStillIncreasing) {
  const MvsConfig cfg;
  DepthMap prior(1, 1);
  prior.set(0, 0, 0.02);
  const auto hyp = hypotheses_refined(prior, cfg, 3);
  EXPECT_GE(hyp.depths(0, 0, 0), kMinDepthFloor);
  for (int k = 1; k < hyp.planes(); ++k) EXPECT_GT(hyp.depths(k, 1, 1), hyp.depths(k - 1, 1, 1));
}

TEST(Hypotheses, EmptyPriorIsRejected) {
  EXPECT_EQ(code_of([] { hypotheses_refined(DepthMap(3, 3), MvsConfig{}, 2); }), ErrorCode::EmptyPrior);
}

// --- warping -----------------------------------------------------------------------------------

TEST(WarpFeatures, IdentityReplicatesReference) {
  std::mt19937_64 rng(1);
  Tensor<float, 3> f({2, 6, 8});
  std::uniform_real_distribution<float> u(0.f, 1.f);
  for (float& v : f.values()) v = u(rng);
  const CameraIntrinsics intr{8.0, 8.0, 3.5, 2.5, 8, 6};
  const auto vol = warp_features(f, PoseSE3::identity(), intr, constant_hypotheses({1.0, 2.0, 3.0}, 6, 8));
  for (int c = 0; c < 2; ++c)
    for (int d = 0; d < 3; ++d)
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 8; ++x) {
          ASSERT_EQ(vol.values(c, d, y, x), f(c, y, x));
          ASSERT_EQ(vol.valid(d, y, x), 1);
        }
}

TEST(WarpFeatures, ForwardTranslationOnLinearFeatureIsExact) {
  // Bilinear interpolation reproduces an affine function of the pixel coordinates exactly,
  // so the warp can be checked against the pinhole model evaluated by hand.
  const CameraIntrinsics intr{50.0, 50.0, 31.5, 23.5, 64, 48};
  Tensor<float, 3> f({1, 48, 64});
  auto field = [](double u, double v) { return 0.01 * u - 0.02 * v + 0.5; };
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) f(0, y, x) = static_cast<float>(field(x, y));
  const double plane = 2.0, forward = 0.2;
  const PoseSE3 view(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0.0, 0.0, forward));
  const auto vol = warp_features(f, view.inverse(), intr, constant_hypotheses({plane}, 48, 64));
  int checked = 0;
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) {
      const double s = plane / (plane - forward);
      const double u = intr.cx + (x - intr.cx) * s, v = intr.cy + (y - intr.cy) * s;
      const bool inside = u >= 0 && v >= 0 && u <= 63 && v <= 47;
      ASSERT_EQ(vol.valid(0, y, x) != 0, inside) << x << "," << y;
      if (!inside) continue;
      EXPECT_NEAR(vol.values(0, 0, y, x), field(u, v), 1e-5);
      ++checked;
    }
  EXPECT_GT(checked, 1000);
}

TEST(WarpFeatures, TexturedPlaneMatchesAtTrueDepth) {
  synth::SyntheticScene scene;
  scene.primitives = {{synth::PlaneShape{Eigen::Vector3d(0, 0, 2.0), -Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitX()},
                       synth::Material{5, 3.0, 3, 2.0, {1.f, 1.f, 1.f}}}};
  const auto intr = synth::centered_intrinsics(96, 64);
  const PoseSE3 ref = PoseSE3::identity();
  const PoseSE3 view(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0.0, 0.0, 0.2));
  const auto a = synth::render(scene, ref, intr), b = synth::render(scene, view, intr);
  Tensor<float, 3> fb({1, 64, 96});
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 96; ++x) fb(0, y, x) = b.image.intensity(x, y);
  const auto vol = warp_features(fb, relative_pose(view, ref), intr, constant_hypotheses({2.0, 2.3}, 64, 96));
  double err_true = 0.0, err_off = 0.0;
  int n = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 96; ++x)
      if (vol.valid(0, y, x) && vol.valid(1, y, x)) {
        err_true += std::abs(vol.values(0, 0, y, x) - a.image.intensity(x, y));
        err_off += std::abs(vol.values(0, 1, y, x) - a.image.intensity(x, y));
        ++n;
      }
  ASSERT_GT(n, 2000);
  EXPECT_LT(err_true / n, 0.01);
  EXPECT_GT(err_off / n, 3.0 * err_true / n);
}

TEST(WarpFeatures, ViewLookingAwayIsInvalid) {
  Tensor<float, 3> f({1, 8, 8}, 1.f);
  const CameraIntrinsics intr{8.0, 8.0, 3.5, 3.5, 8, 8};
  const PoseSE3 turned(Eigen::AngleAxisd(test::kPi, Eigen::Vector3d::UnitY()).toRotationMatrix(), Eigen::Vector3d::Zero());
  const auto vol = warp_features(f, turned, intr, constant_hypotheses({1.0, 2.0}, 8, 8));
  for (auto v : vol.valid.values()) ASSERT_EQ(v, 0);
}

// --- costs -------------------------------------------------------------------------------------

TEST(VarianceCost, IdenticalViewsCostNothing) {
  std::mt19937_64 rng(2);
  const auto v = random_volume(rng, 3, 4, 5, 6);
  const std::vector<FeatureVolume> vols{v, v, v};
  const auto c = variance_cost(vols);
  for (double x : c.values.values()) ASSERT_EQ(x, 0.0);
}

TEST(VarianceCost, TwoViewsGiveQuarterSquaredDifference) {
  std::mt19937_64 rng(3);
  const std::vector<FeatureVolume> vols{random_volume(rng, 3, 2, 3, 4), random_volume(rng, 3, 2, 3, 4)};
  const auto c = variance_cost(vols);
  for (int d = 0; d < 2; ++d)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 4; ++x) EXPECT_NEAR(c.values(d, y, x), channel_mean_sq(vols[0], vols[1], d, y, x) / 4.0, 1e-12);
}

TEST(VarianceCost, SingleValidViewIsInvalidAtMaxCost) {
  std::mt19937_64 rng(4);
  std::vector<FeatureVolume> vols{random_volume(rng, 1, 1, 2, 2), random_volume(rng, 1, 1, 2, 2)};
  vols[1].valid(0, 1, 1) = 0;
  const auto c = variance_cost(vols, 4.0);
  EXPECT_FALSE(c.valid(0, 1, 1));
  EXPECT_EQ(c.values(0, 1, 1), 4.0);
  EXPECT_TRUE(c.valid(0, 0, 0));
}

TEST(AggregationWeights, EqualErrorsGiveZeroWeights) {
  std::mt19937_64 rng(5);
  const auto ref = random_volume(rng, 2, 3, 4, 4);
  auto other = ref;
  for (float& x : other.values.values()) x += 0.5f;
  const std::vector<FeatureVolume> vols{other, other, other, ref};
  const auto w = aggregation_weights(vols, 3);
  for (int i = 0; i < 3; ++i)
    for (double x : w[static_cast<std::size_t>(i)].values()) EXPECT_NEAR(x, 0.0, 1e-12);
}

TEST(AggregationWeights, OccludedViewLosesItsWeight) {
  std::mt19937_64 rng(6);
  const auto ref = random_volume(rng, 1, 1, 1, 1);
  auto close = ref, far = ref;
  close.values(0, 0, 0, 0) += 0.1f;
  far.values(0, 0, 0, 0) += 1e3f;
  const std::vector<FeatureVolume> vols{close, far, ref};
  const auto w = aggregation_weights(vols, 2, 1.0);
  EXPECT_NEAR(1.0 + w[1](0, 0, 0), 0.0, 1e-12);
  EXPECT_NEAR(1.0 + w[0](0, 0, 0), 2.0, 1e-12);
}

TEST(AggregationWeights, SingleSourceViewHasZeroWeight) {
  std::mt19937_64 rng(7);
  const std::vector<FeatureVolume> vols{random_volume(rng, 3, 4, 3, 3), random_volume(rng, 3, 4, 3, 3)};
  const auto w = aggregation_weights(vols, 1);
  for (double x : w[0].values()) EXPECT_NEAR(x, 0.0, 1e-15);
}

TEST(AggregatedCost, ZeroWeightsTwoViewsIsFourTimesVariance) {
  std::mt19937_64 rng(8);
  const std::vector<FeatureVolume> vols{random_volume(rng, 3, 8, 16, 16), random_volume(rng, 3, 8, 16, 16)};
  const auto agg = aggregated_cost(vols, zero_weights(2, 8, 16, 16), 1);
  const auto var = variance_cost(vols);
  double worst = 0.0;
  for (std::size_t i = 0; i < agg.values.size(); ++i)
    worst = std::max(worst, std::abs(agg.values.values()[i] - 4.0 * var.values.values()[i]));
  EXPECT_LT(worst, 1e-12);
}

TEST(AggregatedCost, IdenticalViewsCostNothing) {
  std::mt19937_64 rng(9);
  const auto v = random_volume(rng, 2, 3, 3, 3);
  const std::vector<FeatureVolume> vols{v, v, v, v};
  const auto c = aggregated_cost(vols, aggregation_weights(vols, 3), 3);
  for (double x : c.values.values()) ASSERT_EQ(x, 0.0);
}

TEST(AggregatedCost, ConcentratedWeightSelectsOneView) {
  std::mt19937_64 rng(10);
  const std::vector<FeatureVolume> vols{random_volume(rng, 3, 2, 2, 2), random_volume(rng, 3, 2, 2, 2),
                                        random_volume(rng, 3, 2, 2, 2)};
  auto w = zero_weights(3, 2, 2, 2);
  for (double& x : w[0].values()) x = 1.0;   // 1 + W = n - 1 = 2
  for (double& x : w[1].values()) x = -1.0;  // 1 + W = 0
  const auto c = aggregated_cost(vols, w, 2);
  for (int d = 0; d < 2; ++d)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) EXPECT_NEAR(c.values(d, y, x), channel_mean_sq(vols[0], vols[2], d, y, x), 1e-12);
}

// --- regularization and probability ------------------------------------------------------------

TEST(RegularizeCost, RadiusZeroIsIdentity) {
  std::mt19937_64 rng(11);
  auto c = full_cost(3, 4, 5);
  std::uniform_real_distribution<double> u;
  for (double& x : c.values.values()) x = u(rng);
  EXPECT_EQ(regularize_cost(c, 0).values, c.values);
}

TEST(RegularizeCost, ConstantVolumeUnchanged) {
  const auto c = full_cost(5, 6, 7, 0.37);
  for (int r : {1, 2, 4})
    for (double x : regularize_cost(c, r).values.values()) ASSERT_NEAR(x, 0.37, 1e-15);
}

TEST(RegularizeCost, ImpulseSpreadsOverCube) {
  auto c = full_cost(7, 7, 7);
  c.values(3, 3, 3) = 1.0;
  const auto out = regularize_cost(c, 1);
  double total = 0.0;
  for (int d = 0; d < 7; ++d)
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 7; ++x) {
        const bool near = std::abs(d - 3) <= 1 && std::abs(y - 3) <= 1 && std::abs(x - 3) <= 1;
        EXPECT_NEAR(out.values(d, y, x), near ? 1.0 / 27.0 : 0.0, 1e-15);
        total += out.values(d, y, x);
      }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(CostToProbability, UniformCostGivesUniformProbability) {
  const auto p = cost_to_probability(full_cost(8, 2, 3, 1.5), 0.01);
  for (double x : p.values.values()) EXPECT_NEAR(x, 1.0 / 8.0, 1e-15);
}

TEST(CostToProbability, SumsToOne) {
  std::mt19937_64 rng(12);
  auto c = full_cost(16, 6, 6);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (double& x : c.values.values()) x = u(rng);
  const auto p = cost_to_probability(c, 0.05);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      double s = 0.0;
      for (int d = 0; d < 16; ++d) s += p.values(d, y, x);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(CostToProbability, SharpMinimumTakesAllMass) {
  auto c = full_cost(5, 1, 1, 4.0);
  c.values(2, 0, 0) = 0.0;
  const auto p = cost_to_probability(c, 0.01);
  EXPECT_NEAR(p.values(2, 0, 0), 1.0, 1e-12);
}

TEST(ExpectedDepth, DeltaSelectsPlane) {
  const auto hyp = constant_hypotheses({0.5, 1.0, 1.5, 2.0}, 1, 1);
  ProbabilityVolume p{Tensor<double, 3>({4, 1, 1}, 0.0)};
  p.values(2, 0, 0) = 1.0;
  EXPECT_EQ(expected_depth(p, hyp).depth(0, 0), 1.5);
}

TEST(ExpectedDepth, UniformOverTwoPlanesIsMean) {
  const auto hyp = constant_hypotheses({1.0, 3.0}, 1, 1);
  ProbabilityVolume p{Tensor<double, 3>({2, 1, 1}, 0.5)};
  EXPECT_EQ(expected_depth(p, hyp).depth(0, 0), 2.0);
}

TEST(ExpectedDepth, ConfidenceFloorInvalidatesFlatPixels) {
  const auto hyp = constant_hypotheses({1.0, 2.0, 3.0, 4.0}, 1, 2);
  ProbabilityVolume p{Tensor<double, 3>({4, 1, 2}, 0.25)};
  p.values(0, 0, 1) = 0.7;
  p.values(1, 0, 1) = 0.1;
  p.values(2, 0, 1) = 0.1;
  p.values(3, 0, 1) = 0.1;
  const auto d = expected_depth(p, hyp, 2.0 / 4.0);
  EXPECT_FALSE(d.is_valid(0, 0));
  EXPECT_TRUE(d.is_valid(1, 0));
  EXPECT_FLOAT_EQ(d.confidence(1, 0), 0.7f);
}

TEST(ExpectedDepth, StaysInsideHypothesisRange) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  MvsConfig cfg;
  DepthMap prior(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) prior.set(x, y, 0.5 + u(rng));
  const auto hyp = hypotheses_refined(prior, cfg, 2);
  auto c = full_cost(hyp.planes(), 8, 8);
  for (double& x : c.values.values()) x = u(rng);
  const auto d = expected_depth(cost_to_probability(c, 0.3), hyp);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      EXPECT_GE(d.depth(x, y), hyp.depths(0, y, x));
      EXPECT_LE(d.depth(x, y), hyp.depths(hyp.planes() - 1, y, x));
    }
}

// --- depth range -------------------------------------------------------------------------------

TEST(DepthRange, FirstCallSpansTenTimesMeanDepth) {
  const auto r = depth_range_schedule(true, 1.0, 0.0);
  EXPECT_EQ(r.d_min, 0.01);
  EXPECT_EQ(r.d_max, 10.0);
}

TEST(DepthRange, LaterCallsGrowPreviousMaximum) {
  const auto r = depth_range_schedule(false, 0.0, 4.0);
  EXPECT_EQ(r.d_min, 0.01);
  EXPECT_EQ(r.d_max, 6.0);
  DepthRangeSchedule s;
  s.next(2.0, std::nullopt);
  EXPECT_EQ(s.next(std::nullopt, 3.0).d_max, 4.5);
}

TEST(DepthRange, ZeroMeanDepthIsRejected) {
  EXPECT_EQ(code_of([] { depth_range_schedule(true, 0.0, 1.0); }), ErrorCode::NonPositiveInput);
}

// --- cascade -----------------------------------------------------------------------------------

TEST(Cascade, TwoViewWindowRunsWithStageResolutions) {
  const auto o = test::render_orbit(2, 64, 48);
  KeyframeWindow win;
  win.intrinsics = o.intr;
  for (std::size_t i = 0; i < 2; ++i) {
    auto kf = std::make_shared<Keyframe>();
    kf->image = o.frames[i].image;
    kf->pose = o.poses[i];
    kf->features = extract_classical(kf->image);
    win.frames.push_back(kf);
  }
  const auto r = cascade_estimate(win, MvsConfig{});
  EXPECT_EQ(r.stages[0].width(), 16);
  EXPECT_EQ(r.stages[0].height(), 12);
  EXPECT_EQ(r.stages[1].width(), 32);
  EXPECT_EQ(r.stages[1].height(), 24);
  EXPECT_EQ(r.depth.width(), 64);
  EXPECT_EQ(r.depth.height(), 48);
  EXPECT_GT(r.depth.valid_count(), 0u);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x)
      if (r.depth.is_valid(x, y)) ASSERT_TRUE(std::isfinite(r.depth.depth(x, y)) && r.depth.depth(x, y) > 0.0);
}

TEST(Cascade, SingleFrameWindowIsRejected) {
  KeyframeWindow win;
  win.intrinsics = synth::centered_intrinsics(64, 48);
  win.frames.push_back(std::make_shared<Keyframe>());
  EXPECT_EQ(code_of([&] { cascade_estimate(win, MvsConfig{}); }), ErrorCode::TooFewViews);
}

TEST(Cascade, SevenViewOrbitIsAccurate) {
  const auto o = test::render_orbit(7);
  KeyframeWindow win;
  win.intrinsics = o.intr;
  for (std::size_t i = 0; i < o.frames.size(); ++i) {
    auto kf = std::make_shared<Keyframe>();
    kf->image = o.frames[i].image;
    kf->pose = o.poses[i];
    kf->features = extract_classical(kf->image);
    win.frames.push_back(kf);
  }
  const auto r = cascade_estimate(win, MvsConfig{});
  const auto m = eval::depth_metrics(r.depth, o.frames.back().depth);
  EXPECT_GE(m.a1, 95.0);
  EXPECT_LE(m.abs_cm, 3.0);
}
