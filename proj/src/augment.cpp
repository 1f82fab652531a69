#include <algorithm>
#include <array>
#include <cmath>

#include <spdlog/spdlog.h>

#include "corrkit/pipeline.hpp"

namespace corrkit {

namespace {

constexpr int kMaxPerspectiveAttempts = 20;
// Minimum |det| of the affine part of H / h22; rejects near-folding warps.
constexpr double kMinAffineDet = 0.1;

// Image point under h, or nullopt when it lands at or behind infinity.
std::optional<Vec2> warp(const Mat3& h, const Vec2& p) {
  const Vec3 q = h * Vec3(p.x(), p.y(), 1.0);
  if (!(q.z() > 1e-12)) return std::nullopt;
  return Vec2(q.x() / q.z(), q.y() / q.z());
}

bool inside(const Vec2& p, ImageBounds b) {
  return p.x() >= 0.0 && p.y() >= 0.0 && p.x() < b.width && p.y() < b.height;
}

}  // namespace

PerspectiveResult random_perspective(ImageBounds size, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  if (size.width < 2 || size.height < 2) throw Error(ErrorCode::InvalidArgument, "image too small to warp");
  PerspectiveResult out;
  const double w = size.width - 1.0;
  const double h = size.height - 1.0;
  const double m = cfg.max_corner_perturbation * std::min(size.width, size.height);
  if (m == 0.0) {
    out.h = Homography::identity();
    out.attempts = 1;
    return out;
  }
  const std::array<Vec2, 4> corners{Vec2(0, 0), Vec2(w, 0), Vec2(w, h), Vec2(0, h)};
  for (int attempt = 1; attempt <= kMaxPerspectiveAttempts; ++attempt) {
    out.attempts = attempt;
    std::array<Vec2, 4> moved;
    for (std::size_t i = 0; i < 4; ++i) {
      const double dx = rng.uniform(-m, m);
      const double dy = rng.uniform(-m, m);
      moved[i] = corners[i] + Vec2(dx, dy);
    }
    Homography hom;
    try {
      hom = estimate_homography_dlt(corners, moved);
    } catch (const Error&) {
      continue;
    }
    const Mat3& mat = hom.matrix();
    if (!(std::fabs(mat(2, 2)) > 1e-12)) continue;
    const Mat3 n = mat / mat(2, 2);
    if (std::fabs(n(0, 0) * n(1, 1) - n(0, 1) * n(1, 0)) < kMinAffineDet) continue;
    bool ok = true;
    for (const auto& c : corners) {
      const auto q = warp(mat, c);
      if (!q || q->x() < -0.5 * size.width || q->x() > 1.5 * size.width || q->y() < -0.5 * size.height ||
          q->y() > 1.5 * size.height) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    out.h = hom;
    return out;
  }
  return out;
}

TrainingPair apply_augmentation(const TrainingPair& pair, const Homography& h_a, const Homography& h_b,
                                std::size_t min_correspondences) {
  TrainingPair out = pair;
  out.correspondences.matches.clear();
  for (const auto& m : pair.correspondences.matches) {
    const auto pa = warp(h_a.matrix(), m.pa);
    const auto pb = warp(h_b.matrix(), m.pb);
    if (!pa || !pb || !inside(*pa, pair.size_a) || !inside(*pb, pair.size_b)) continue;
    Match w = m;
    w.pa = *pa;
    w.pb = *pb;
    out.correspondences.matches.push_back(std::move(w));
  }
  if (!meets_budget(out.correspondences, min_correspondences)) {
    TrainingPair kept = pair;
    kept.flags.emplace_back("BudgetUnderflow");
    return kept;
  }
  out.augment_a = pair.augment_a ? h_a.compose(*pair.augment_a) : h_a;
  out.augment_b = pair.augment_b ? h_b.compose(*pair.augment_b) : h_b;
  out.provenance = source_histogram(out.correspondences);
  return out;
}

std::size_t augment_pairs(std::vector<TrainingPair>& pairs, const PipelineConfig& cfg) {
  cfg.augmentation.validate();
  std::size_t flagged = 0;
  for (auto& pair : pairs) {
    Rng rng_a(pair_seed(cfg.seed ^ cfg.augmentation.seed, "augment", pair.frame_a, pair.frame_b, 0));
    Rng rng_b(pair_seed(cfg.seed ^ cfg.augmentation.seed, "augment", pair.frame_a, pair.frame_b, 1));
    const auto ha = random_perspective(pair.size_a, cfg.augmentation, rng_a);
    const auto hb = random_perspective(pair.size_b, cfg.augmentation, rng_b);
    if (!ha.h || !hb.h) {
      pair.flags.emplace_back("AugmentationRejected");
      ++flagged;
      spdlog::warn("augmentation rejected for {}->{}", pair.frame_a.to_string(), pair.frame_b.to_string());
      continue;
    }
    const std::size_t flags_before = pair.flags.size();
    pair = apply_augmentation(pair, *ha.h, *hb.h, cfg.min_correspondences);
    if (pair.flags.size() > flags_before) {
      ++flagged;
      spdlog::warn("augmentation left too few matches for {}->{}", pair.frame_a.to_string(),
                   pair.frame_b.to_string());
    }
  }
  return flagged;
}

}  // namespace corrkit
