#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include <Eigen/SVD>

#include "corrkit/robust.hpp"
#include "scenes.hpp"

using namespace corrkit;
using namespace corrkit::testing;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

double rel_diff_up_to_sign(const Mat3& a, const Mat3& b) {
  return std::min((a - b).norm(), (a + b).norm()) / b.norm();
}

std::vector<Match> homography_matches(Rng& rng, const Homography& h, std::size_t n, ImageBounds size) {
  std::vector<Match> out;
  while (out.size() < n) {
    const Vec2 pa(rng.uniform(0, size.width), rng.uniform(0, size.height));
    out.push_back({pa, apply_homography(h, pa), 1.0, "m"});
  }
  return out;
}

double max_corner_error(const Mat3& est, const Homography& gt, ImageBounds size) {
  const double w = size.width - 1.0;
  const double hh = size.height - 1.0;
  double worst = 0.0;
  for (const Vec2& c : {Vec2(0, 0), Vec2(w, 0), Vec2(w, hh), Vec2(0, hh)}) {
    worst = std::max(worst, (apply_homography(est, c) - apply_homography(gt, c)).norm());
  }
  return worst;
}

}  // namespace

TEST(Dlt, TranslationMinimalCase) {
  const std::vector<Vec2> src{{0, 0}, {100, 0}, {100, 80}, {0, 80}};
  std::vector<Vec2> dst;
  for (const auto& p : src) dst.push_back(p + Vec2(7.5, -2.0));
  const Homography h = estimate_homography_dlt(src, dst);
  EXPECT_LT((h.matrix() - Homography::translation(7.5, -2.0).matrix()).norm(), 1e-9);
}

TEST(Dlt, RandomHomographyRecovered) {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const Homography gt = random_homography(rng, {640, 480}, 0.2);
    const auto matches = homography_matches(rng, gt, 20, {640, 480});
    const Homography est = estimate_homography_dlt(matches);
    EXPECT_LT((est.matrix() - gt.matrix()).norm() / gt.matrix().norm(), 1e-7);
  }
}

TEST(Dlt, CollinearAndTooFewRejected) {
  const std::vector<Vec2> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  EXPECT_EQ(code_of([&] { estimate_homography_dlt(line, line); }), ErrorCode::DegenerateConfiguration);
  const std::vector<Vec2> three{{0, 0}, {1, 0}, {2, 5}, {3, 1}};
  const std::vector<Vec2> partly{{0, 0}, {1, 0}, {2, 0}, {3, 1}};
  EXPECT_EQ(code_of([&] { estimate_homography_dlt(partly, three); }), ErrorCode::DegenerateConfiguration);
  const std::vector<Vec2> few{{0, 0}, {1, 0}, {0, 1}};
  EXPECT_THROW(estimate_homography_dlt(few, few), Error);
}

TEST(Dlt, EquivariantUnderSimilarities) {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const Homography gt = random_homography(rng, {640, 480}, 0.15);
    const auto matches = homography_matches(rng, gt, 30, {640, 480});
    auto similarity = [&] {
      const double th = rng.uniform(-kPi, kPi);
      const double s = rng.uniform(0.5, 2.0);
      Mat3 m;
      m << s * std::cos(th), -s * std::sin(th), rng.uniform(-100, 100), s * std::sin(th), s * std::cos(th),
          rng.uniform(-100, 100), 0, 0, 1;
      return m;
    };
    const Mat3 sa = similarity();
    const Mat3 sb = similarity();
    std::vector<Vec2> pa, pb;
    for (const auto& m : matches) {
      pa.push_back(apply_homography(sa, m.pa));
      pb.push_back(apply_homography(sb, m.pb));
    }
    const Homography h = estimate_homography_dlt(matches);
    const Homography hs = estimate_homography_dlt(pa, pb);
    const Homography expected(sb * h.matrix() * sa.inverse());
    EXPECT_LT((hs.matrix() - expected.matrix()).norm() / expected.matrix().norm(), 1e-7);
  }
}

TEST(EightPoint, NoiselessSceneSatisfiesConstraint) {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const auto scene = random_two_view_scene(rng, 20, 40.0);
    const Mat3 f = estimate_fundamental_8pt(scene.matches);
    EXPECT_NEAR(f.norm(), 1.0, 1e-12);
    EXPECT_NEAR(f.jacobiSvd().singularValues()(2), 0.0, 1e-12);
    for (const auto& m : scene.matches) EXPECT_LT(sampson_distance(f, m.pa, m.pb), 1e-6);
  }
}

TEST(EightPoint, DuplicatePointsRejected) {
  std::vector<Match> dup(8, Match{{10, 20}, {30, 40}, 1.0, "m"});
  dup[1].pa = {50, 60};
  dup[1].pb = {55, 66};
  EXPECT_EQ(code_of([&] { estimate_fundamental_8pt(dup); }), ErrorCode::DegenerateConfiguration);
  EXPECT_THROW(estimate_fundamental_8pt(std::span<const Match>(dup.data(), 7)), Error);
}

TEST(EightPoint, PlanarSceneFlagged) {
  Rng rng(44);
  const Homography h = random_homography(rng, {640, 480}, 0.1);
  const auto matches = homography_matches(rng, h, 200, {640, 480});
  EXPECT_GT(planar_degeneracy_score(matches, RansacConfig{}), 0.95);
  const auto scene = random_two_view_scene(rng, 200, 30.0);
  EXPECT_LT(planar_degeneracy_score(scene.matches, RansacConfig{}), 0.95);
}

TEST(EssentialEstimate, RecoversKnownMatrix) {
  Rng rng(45);
  for (int trial = 0; trial < 20; ++trial) {
    const auto scene = random_two_view_scene(rng, 30, 45.0);
    const EssentialMatrix est = estimate_essential(scene.matches, scene.k, scene.k);
    const EssentialMatrix gt = EssentialMatrix::from_pose(relative_pose(scene.pose_a, scene.pose_b));
    EXPECT_LT(rel_diff_up_to_sign(est.matrix(), gt.matrix()), 1e-6);
    const auto sv = est.matrix().jacobiSvd().singularValues();
    EXPECT_NEAR(sv(0), sv(1), 1e-10);
    EXPECT_NEAR(est.matrix().norm(), std::sqrt(2.0), 1e-12);
  }
}

TEST(EssentialEstimate, PureRotationDegenerate) {
  Rng rng(46);
  const CameraIntrinsics k{500, 500, 320, 240, 640, 480};
  const Mat3 r = random_rotation(rng, 10.0);
  std::vector<Match> matches;
  while (matches.size() < 30) {
    const Vec2 pa(rng.uniform(100, 540), rng.uniform(100, 380));
    const Vec3 xb = r * unproject(k, 5.0, pa);
    const Vec2 pb = project(k, xb);
    if (k.contains(pb)) matches.push_back({pa, pb, 1.0, "m"});
  }
  EXPECT_EQ(code_of([&] { estimate_essential(matches, k, k); }), ErrorCode::DegenerateConfiguration);
}

TEST(Ransac, CleanDataAllInliers) {
  Rng rng(47);
  const Homography gt = random_homography(rng, {640, 480}, 0.1);
  const auto matches = homography_matches(rng, gt, 100, {640, 480});
  const auto model = ransac(ModelKind::Homography, matches, RansacConfig{});
  EXPECT_EQ(model.inlier_count(), 100u);
  EXPECT_LT(max_corner_error(model.matrix, gt, {640, 480}), 1e-6);

  const auto scene = random_two_view_scene(rng, 100, 30.0);
  const auto fm = ransac(ModelKind::Fundamental, scene.matches, RansacConfig{});
  EXPECT_EQ(fm.inlier_count(), 100u);
  const Calibration calib{scene.k, scene.k};
  const auto em = ransac(ModelKind::Essential, scene.matches, RansacConfig{}, &calib);
  EXPECT_EQ(em.inlier_count(), 100u);
  EXPECT_EQ(code_of([&] { ransac(ModelKind::Essential, scene.matches, RansacConfig{}); }), ErrorCode::InvalidArgument);
}

TEST(Ransac, DeterministicAndSound) {
  Rng rng(48);
  const auto scene = random_two_view_scene(rng, 300, 30.0, 0.5);
  std::vector<Match> matches = scene.matches;
  for (std::size_t i = 0; i < 100; ++i) matches[i].pb = {rng.uniform(0, 640), rng.uniform(0, 480)};
  RansacConfig cfg;
  cfg.seed = 99;
  for (ModelKind kind : {ModelKind::Fundamental, ModelKind::Homography}) {
    const auto a = ransac(kind, matches, cfg);
    const auto b = ransac(kind, matches, cfg);
    EXPECT_EQ(a.inlier_mask, b.inlier_mask);
    EXPECT_EQ(a.iterations_run, b.iterations_run);
    EXPECT_EQ(a.matrix, b.matrix);
    const auto res = model_residuals(kind, a.matrix, matches);
    for (std::size_t i = 0; i < matches.size(); ++i) {
      if (a.inlier_mask[i]) {
        EXPECT_LT(res[i], cfg.threshold * cfg.threshold);
      }
    }
    EXPECT_GE(a.inlier_count(), minimal_sample_size(kind));
  }
}

// The refined model should fit noisy inliers at least as well as the truth.
TEST(Ransac, FundamentalRefitReachesNoiseFloor) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(SeedHasher(7).add(seed).finish());
    const auto scene = random_two_view_scene(rng, 400, 30.0, 0.5);
    const Pose rel = relative_pose(scene.pose_a, scene.pose_b);
    const Mat3 f_true = scene.k.inverse_matrix().transpose() * skew(rel.translation) * rel.rotation *
                        scene.k.inverse_matrix();
    RansacConfig cfg;
    cfg.seed = seed;
    const auto model = ransac(ModelKind::Fundamental, scene.matches, cfg);
    const auto res = model_residuals(ModelKind::Fundamental, model.matrix, scene.matches);
    double est = 0.0, truth = 0.0;
    for (std::size_t i = 0; i < scene.matches.size(); ++i) {
      est += res[i];
      truth += sampson_distance(f_true, scene.matches[i].pa, scene.matches[i].pb);
    }
    EXPECT_LE(est, truth * 1.001) << "seed " << seed;
  }
}

// A first sample with tiny support must not end the search after one iteration.
TEST(Ransac, WeakFirstConsensusKeepsSearching) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(SeedHasher(11).add(seed).finish());
    const auto scene = random_two_view_scene(rng, 1000, 30.0, 0.5);
    std::vector<Match> matches = scene.matches;
    for (std::size_t i = 0; i < 400; ++i) matches[i].pb = {rng.uniform(0, 640), rng.uniform(0, 480)};
    RansacConfig cfg;
    cfg.seed = seed;
    const auto model = ransac(ModelKind::Fundamental, matches, cfg);
    EXPECT_GT(model.iterations_run, 1) << "seed " << seed;
    EXPECT_GE(model.inlier_count(), 570u) << "seed " << seed;
  }
}

TEST(Ransac, FewerOutliersNeverWorse) {
  Rng rng(49);
  const Homography gt = random_homography(rng, {640, 480}, 0.1);
  const auto clean = homography_matches(rng, gt, 200, {640, 480});
  std::vector<Vec2> junk;
  for (int i = 0; i < 200; ++i) junk.emplace_back(rng.uniform(0, 640), rng.uniform(0, 480));
  RansacConfig cfg;
  cfg.seed = 5;
  std::size_t prev = 0;
  for (std::size_t outliers : {120u, 80u, 40u, 0u}) {
    auto m = clean;
    for (std::size_t i = 0; i < outliers; ++i) m[i].pb = junk[i];
    const auto model = ransac(ModelKind::Homography, m, cfg);
    EXPECT_GE(model.inlier_count(), prev);
    prev = model.inlier_count();
  }
}

TEST(Ransac, ErrorsReported) {
  std::vector<Match> few(5, Match{{1, 1}, {2, 2}, 1.0, "m"});
  EXPECT_EQ(code_of([&] { ransac(ModelKind::Fundamental, few, RansacConfig{}); }), ErrorCode::InsufficientMatches);
  RansacConfig bad;
  bad.confidence = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  Rng rng(50);
  std::vector<Match> noise;
  for (int i = 0; i < 40; ++i) {
    noise.push_back({{rng.uniform(0, 640), rng.uniform(0, 480)}, {rng.uniform(0, 640), rng.uniform(0, 480)}, 1.0, "m"});
  }
  RansacConfig tight;
  tight.threshold = 1e-6;
  tight.max_iterations = 50;
  // A minimal homography fits its own four points exactly, so only the
  // rank-2 projected fundamental matrix can miss all of its sample here.
  EXPECT_EQ(code_of([&] { ransac(ModelKind::Fundamental, noise, tight); }), ErrorCode::NoModelFound);
}

TEST(Filter, StatusesAndPlantedOutliers) {
  Rng rng(51);
  const auto scene = random_two_view_scene(rng, 400, 30.0);
  const CorrespondenceSet clean{{"v", 0}, {"v", 20}, scene.matches};
  const auto kept = filter_matches(clean, ModelKind::Fundamental, RansacConfig{});
  EXPECT_EQ(kept.status, FilterStatus::Ok);
  EXPECT_EQ(canonical_rows(kept.set), canonical_rows(clean));

  CorrespondenceSet tiny{{"v", 0}, {"v", 20}, std::vector<Match>(scene.matches.begin(), scene.matches.begin() + 5)};
  const auto r = filter_matches(tiny, ModelKind::Fundamental, RansacConfig{});
  EXPECT_TRUE(r.set.empty());
  EXPECT_EQ(r.status, FilterStatus::InsufficientMatches);

  // 30% outliers violating the epipolar constraint by more than 10 px.
  const Pose rel = relative_pose(scene.pose_a, scene.pose_b);
  const Mat3 kinv = scene.k.inverse_matrix();
  const Mat3 f = kinv.transpose() * skew(rel.translation) * rel.rotation * kinv;
  CorrespondenceSet dirty = clean;
  std::vector<bool> planted(dirty.size(), false);
  for (std::size_t i = 0; i < 120; ++i) {
    do {
      dirty.matches[i].pb = {rng.uniform(0, 640), rng.uniform(0, 480)};
    } while (std::sqrt(sampson_distance(f, dirty.matches[i].pa, dirty.matches[i].pb)) <= 10.0);
    dirty.matches[i].source = "planted";
    planted[i] = true;
  }
  const auto filtered = filter_matches(dirty, ModelKind::Fundamental, RansacConfig{});
  std::size_t inliers_kept = 0;
  for (const auto& m : filtered.set.matches) {
    EXPECT_NE(m.source, "planted");
    inliers_kept += m.source != "planted";
  }
  EXPECT_GE(inliers_kept, static_cast<std::size_t>(0.95 * 280));
}
