#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/SVD>

#include "corrkit/geometry.hpp"
#include "scenes.hpp"

using namespace corrkit;
using corrkit::testing::random_rotation;

namespace {

Pose random_pose(Rng& rng) {
  return {random_rotation(rng, 180.0), Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3))};
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Intrinsics, ValidateRejectsBadValues) {
  EXPECT_NO_THROW((CameraIntrinsics{500, 500, 320, 240, 640, 480}.validate()));
  EXPECT_THROW((CameraIntrinsics{0, 500, 320, 240, 640, 480}.validate()), Error);
  EXPECT_THROW((CameraIntrinsics{500, 500, 640, 240, 640, 480}.validate()), Error);
  EXPECT_THROW((CameraIntrinsics{500, 500, 320, -1, 640, 480}.validate()), Error);
}

TEST(RelativePose, SelfIsIdentity) {
  Rng rng(1);
  const Pose p = random_pose(rng);
  const Pose r = relative_pose(p, p);
  EXPECT_LT((r.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(r.translation.norm(), 1e-12);
}

TEST(RelativePose, IdentityLeftOperand) {
  Pose b;
  b.rotation = rotation_from_axis_angle(Vec3::UnitZ(), kPi / 2);
  b.translation = Vec3(1, 2, 3);
  const Pose r = relative_pose(Pose::identity(), b);
  EXPECT_LT((r.rotation - b.rotation).norm(), 1e-15);
  EXPECT_EQ(r.translation, b.translation);
}

TEST(RelativePose, TransportsWorldPoints) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    const Pose r = relative_pose(a, b);
    for (int i = 0; i < 20; ++i) {
      const Vec3 x(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
      EXPECT_LT((r.apply(a.apply(x)) - b.apply(x)).norm(), 1e-12);
    }
  }
}

TEST(AngularError, RotationCases) {
  Rng rng(3);
  const Mat3 r = random_rotation(rng, 180);
  EXPECT_EQ(rotation_angular_error(r, r), 0.0);
  EXPECT_NEAR(rotation_angular_error(Mat3::Identity(), rotation_from_axis_angle(Vec3::UnitX(), kPi / 2)), 90.0, 1e-12);
  for (int i = 0; i < 200; ++i) {
    const Mat3 base = random_rotation(rng, 180);
    Vec3 axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
    const double theta = rng.uniform(0.0, 179.0);
    const Mat3 rotated = rotation_from_axis_angle(axis.normalized(), to_radians(theta)) * base;
    EXPECT_NEAR(rotation_angular_error(rotated, base), theta, 1e-6);
    EXPECT_NEAR(rotation_angular_error(base, rotated), rotation_angular_error(rotated, base), 1e-9);
  }
}

TEST(AngularError, RotationZeroOnlyForEqualInputs) {
  const Mat3 a = Mat3::Identity();
  const Mat3 b = rotation_from_axis_angle(Vec3::UnitY(), 1e-7);
  EXPECT_GT(rotation_angular_error(a, b), 0.0);
}

TEST(AngularError, TranslationCases) {
  const Vec3 v(0.3, -1.2, 2.0);
  EXPECT_EQ(translation_angular_error(v, v), 0.0);
  EXPECT_EQ(translation_angular_error(v, -v), 0.0);
  EXPECT_EQ(translation_angular_error(v, 7.5 * v), 0.0);
  EXPECT_NEAR(translation_angular_error(Vec3(1, 0, 0), Vec3(1, 1, 0)), 45.0, 1e-12);
  EXPECT_NEAR(translation_angular_error(Vec3(1, 0, 0), Vec3(0, 1, 0)), 90.0, 1e-12);
  EXPECT_EQ(code_of([&] { translation_angular_error(Vec3::Zero(), v); }), ErrorCode::DegenerateTranslation);
}

TEST(PoseError, MaxOfComponents) {
  Pose gt;
  gt.translation = Vec3(1, 0, 0);
  EXPECT_EQ(pose_error(gt, gt).degrees, 0.0);

  Pose est;
  est.rotation = rotation_from_axis_angle(Vec3::UnitZ(), to_radians(3.0));
  est.translation = rotation_from_axis_angle(Vec3::UnitY(), to_radians(7.0)) * gt.translation;
  const PoseError e = pose_error(est, gt);
  EXPECT_NEAR(e.degrees, 7.0, 1e-9);
  EXPECT_FALSE(e.degenerate);

  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    const double r = rotation_angular_error(a.rotation, b.rotation);
    const double t = translation_angular_error(a.translation, b.translation);
    const double p = pose_error(a, b).degrees;
    EXPECT_TRUE(p == r || p == t);
    EXPECT_GE(p, r);
    EXPECT_GE(p, t);
  }
}

TEST(PoseError, DegenerateTranslationScoresWorst) {
  Pose est;
  Pose gt;
  gt.translation = Vec3(0, 0, 1);
  const PoseError e = pose_error(est, gt);
  EXPECT_TRUE(e.degenerate);
  EXPECT_EQ(e.degrees, 180.0);
}

TEST(Projection, AnalyticCases) {
  const CameraIntrinsics k{500, 450, 320, 240, 640, 480};
  EXPECT_EQ(unproject(k, 3.0, Vec2(320, 240)), Vec3(0, 0, 3));
  const Vec3 x = unproject(k, 1.0, Vec2(820, 240));
  EXPECT_NEAR(x.x(), 1.0, 1e-15);
  EXPECT_NEAR(x.y(), 0.0, 1e-15);
  EXPECT_EQ(x.z(), 1.0);
  EXPECT_EQ(code_of([&] { unproject(k, 0.0, Vec2(1, 1)); }), ErrorCode::InvalidDepth);
  EXPECT_EQ(code_of([&] { project(k, Vec3(0, 0, -1)); }), ErrorCode::InvalidDepth);
}

TEST(Projection, RoundTrip) {
  Rng rng(5);
  const CameraIntrinsics k{612.3, 598.1, 311.2, 250.7, 640, 480};
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec2 p(rng.uniform(0, 640), rng.uniform(0, 480));
    const double d = rng.uniform(0.1, 100.0);
    worst = std::max(worst, (project(k, unproject(k, d, p)) - p).norm());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(HomographyOps, ApplyCases) {
  const Vec2 p(12.5, -3.25);
  EXPECT_LT((apply_homography(Homography::identity(), p) - p).norm(), 1e-12);
  EXPECT_LT((apply_homography(Homography::translation(5, -3), p) - (p + Vec2(5, -3))).norm(), 1e-12);
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = rng.uniform(-1, 1);
    m(2, 2) = 2.0;
    const Vec3 q = m * Vec3(p.x(), p.y(), 1.0);
    const Vec2 got = apply_homography(m, p);
    EXPECT_NEAR(got.x(), q.x() / q.z(), 1e-12 * (1.0 + std::abs(q.x() / q.z())));
    EXPECT_NEAR(got.y(), q.y() / q.z(), 1e-12 * (1.0 + std::abs(q.y() / q.z())));
  }
  Mat3 at_infinity = Mat3::Identity();
  at_infinity(2, 2) = 0.0;
  EXPECT_EQ(code_of([&] { apply_homography(at_infinity, Vec2(0, 0)); }), ErrorCode::PointAtInfinity);
}

TEST(HomographyOps, CanonicalForm) {
  Rng rng(7);
  const Homography h = corrkit::testing::random_homography(rng, {640, 480}, 0.2);
  EXPECT_NEAR(h.matrix().norm(), 1.0, 1e-12);
  EXPECT_GE(h.matrix()(2, 2), 0.0);
  const Homography scaled(-3.7 * h.matrix());
  EXPECT_LT((scaled.matrix() - h.matrix()).norm(), 1e-14);
  const Homography round = h.compose(h.inverse());
  EXPECT_LT((round.matrix() - Homography::identity().matrix()).norm(), 1e-12);
  EXPECT_THROW(Homography(Mat3::Zero()), Error);
}

TEST(Essential, DecompositionRecoversPose) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Pose rel{random_rotation(rng, 90), Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian())};
    const EssentialMatrix e = EssentialMatrix::from_pose(rel);
    const auto svd = e.matrix().jacobiSvd();
    EXPECT_NEAR(svd.singularValues()(0), svd.singularValues()(1), 1e-8);
    EXPECT_NEAR(svd.singularValues()(2), 0.0, 1e-8);
    EXPECT_NEAR(e.matrix().norm(), std::sqrt(2.0), 1e-12);

    const auto cands = decompose_essential(e);
    int hits = 0;
    for (const Pose& c : cands) {
      EXPECT_LT((c.rotation.transpose() * c.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_NEAR(c.rotation.determinant(), 1.0, 1e-9);
      EXPECT_NEAR(c.translation.norm(), 1.0, 1e-12);
      // [t]x R reconstructs E up to sign and scale.
      Mat3 recon = skew(c.translation) * c.rotation;
      recon *= std::sqrt(2.0) / recon.norm();
      const double err = std::min((recon - e.matrix()).norm(), (recon + e.matrix()).norm()) / e.matrix().norm();
      EXPECT_LT(err, 1e-6);
      if ((c.rotation - rel.rotation).norm() < 1e-6 && (c.translation - rel.translation.normalized()).norm() < 1e-6) {
        ++hits;
      }
    }
    EXPECT_EQ(hits, 1);
  }
}

TEST(Essential, ProjectionIsIdempotent) {
  Rng rng(9);
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = rng.uniform(-1, 1);
  const EssentialMatrix once = EssentialMatrix::project(m);
  const EssentialMatrix twice = EssentialMatrix::project(once.matrix());
  EXPECT_LT((once.matrix() - twice.matrix()).norm(), 1e-12);
  const auto sv = once.matrix().jacobiSvd().singularValues();
  EXPECT_NEAR(sv(0), sv(1), 1e-10);
}

TEST(Essential, RankDeficientRejected) {
  Mat3 m = Mat3::Zero();
  EXPECT_EQ(code_of([&] { EssentialMatrix::project(m); }), ErrorCode::RankDeficient);
  m(0, 0) = 1.0;
  m(1, 1) = 1e-9;
  EXPECT_EQ(code_of([&] { EssentialMatrix::project(m); }), ErrorCode::RankDeficient);
  Pose no_baseline;
  no_baseline.rotation = rotation_from_axis_angle(Vec3::UnitZ(), 0.3);
  EXPECT_EQ(code_of([&] { EssentialMatrix::from_pose(no_baseline); }), ErrorCode::DegenerateTranslation);
}

TEST(Cheirality, SelectsGroundTruthCandidate) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto scene = corrkit::testing::random_two_view_scene(rng, 50, 45.0);
    const Pose rel = relative_pose(scene.pose_a, scene.pose_b);
    const auto cands = decompose_essential(EssentialMatrix::from_pose(rel));
    std::vector<NormalizedMatch> nm;
    const Mat3 kinv = scene.k.inverse_matrix();
    for (const auto& m : scene.matches) {
      const Vec3 a = kinv * Vec3(m.pa.x(), m.pa.y(), 1);
      const Vec3 b = kinv * Vec3(m.pb.x(), m.pb.y(), 1);
      nm.push_back({a.head<2>(), b.head<2>()});
    }
    const auto chosen = cheirality_select(cands, nm);
    EXPECT_EQ(chosen.counts[chosen.index], nm.size());
    EXPECT_LT(pose_error(chosen.pose, rel).degrees, 1e-6);
  }
}

TEST(Cheirality, SingleMatchHasUniqueWinnerAndBehindFails) {
  Pose rel{rotation_from_axis_angle(Vec3(0.1, 1, 0).normalized(), 0.2), Vec3(1, 0.1, 0.05)};
  const auto cands = decompose_essential(EssentialMatrix::from_pose(rel));
  const Vec3 x(0.2, -0.1, 5.0);
  const Vec3 xb = rel.apply(x);
  const std::vector<NormalizedMatch> one{{x.head<2>() / x.z(), xb.head<2>() / xb.z()}};
  const auto r = cheirality_select(cands, one);
  int winners = 0;
  for (auto c : r.counts) winners += c == 1;
  EXPECT_EQ(winners, 1);

  // Rays diverging behind both cameras under every candidate: parallel rays.
  const std::vector<NormalizedMatch> none{{Vec2(0, 0), Vec2(0, 0)}};
  const Pose pure_x{Mat3::Identity(), Vec3(0, 0, 1)};
  EXPECT_EQ(code_of([&] { cheirality_select(decompose_essential(EssentialMatrix::from_pose(pure_x)), none); }),
            ErrorCode::NoValidCandidate);
}

TEST(Sampson, ExactPairScaleAndFirstOrder) {
  Rng rng(11);
  const auto scene = corrkit::testing::random_two_view_scene(rng, 20, 30.0);
  const Pose rel = relative_pose(scene.pose_a, scene.pose_b);
  const Mat3 kinv = scene.k.inverse_matrix();
  const Mat3 f = kinv.transpose() * skew(rel.translation) * rel.rotation * kinv;
  for (const auto& m : scene.matches) {
    EXPECT_LT(sampson_distance(f, m.pa, m.pb), 1e-9);
    EXPECT_NEAR(sampson_distance(5.0 * f, m.pa, m.pb), sampson_distance(f, m.pa, m.pb), 1e-9);
  }
  // Move q by delta along the epipolar line normal: distance ~ delta^2 / 2
  // (both image terms contribute to the denominator, only q moved).
  const auto& m = scene.matches.front();
  const Vec3 line = f * Vec3(m.pa.x(), m.pa.y(), 1.0);
  const Vec2 normal = line.head<2>().normalized();
  const double delta = 1e-3;
  const double d = sampson_distance(f, m.pa, m.pb + delta * normal);
  const Vec3 lt = f.transpose() * Vec3(m.pb.x(), m.pb.y(), 1.0);
  const double g2 = line.head<2>().squaredNorm();
  const double expected = delta * delta * g2 / (g2 + lt.head<2>().squaredNorm());
  EXPECT_NEAR(d, expected, 1e-3 * expected);
  EXPECT_TRUE(std::isinf(sampson_distance(Mat3::Zero(), m.pa, m.pb)));
}

TEST(Depth, BilinearRequiresValidNeighbours) {
  DepthMap d(4, 4, 2.0f);
  d.at(2, 2) = 0.0f;
  EXPECT_DOUBLE_EQ(*sample_depth_bilinear(d, Vec2(0.5, 0.5)), 2.0);
  EXPECT_FALSE(sample_depth_bilinear(d, Vec2(1.5, 1.5)).has_value());
  EXPECT_DOUBLE_EQ(*sample_depth_bilinear(d, Vec2(1.0, 1.0)), 2.0);  // zero-weight neighbour ignored
  EXPECT_FALSE(sample_depth_bilinear(d, Vec2(3.5, 0)).has_value());
  EXPECT_EQ(d.valid_count(), 15u);
}
