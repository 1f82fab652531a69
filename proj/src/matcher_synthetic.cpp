#include <cmath>

#include "corrkit/matcher.hpp"
#include "corrkit/random.hpp"

namespace corrkit {
namespace {

bool inside(const Vec2& p, const ImageBounds& b) {
  return p.x() >= 0.0 && p.y() >= 0.0 && p.x() < b.width && p.y() < b.height;
}

}  // namespace

MatchOutcome match_synthetic(const FrameSource& a, const FrameSource& b, const GroundTruth& gt,
                             const SyntheticParams& params, const std::string& source) {
  MatchOutcome out;
  out.set.frame_a = a.id;
  out.set.frame_b = b.id;
  Rng rng(SeedHasher(params.seed)
              .add(a.id.video)
              .add(static_cast<std::uint64_t>(a.id.index))
              .add(b.id.video)
              .add(static_cast<std::uint64_t>(b.id.index))
              .finish());

  auto emit = [&](const Vec2& pa) {
    const auto pb = ground_truth_transfer(gt, pa);
    if (!pb || !inside(*pb, b.size)) return;
    Vec2 noisy = *pb;
    if (params.noise_sigma > 0.0) {
      const double gx = rng.gaussian();
      const double gy = rng.gaussian();
      noisy += params.noise_sigma * Vec2(gx, gy);
      if (!inside(noisy, b.size)) return;
    }
    out.set.matches.push_back({pa, noisy, 1.0, source});
  };

  if (params.grid_spacing > 0.0) {
    const double s = params.grid_spacing;
    for (double y = 0.5 * s; y < a.size.height; y += s) {
      for (double x = 0.5 * s; x < a.size.width; x += s) emit({x, y});
    }
  } else {
    const std::size_t max_attempts = 50 * params.count + 100;
    for (std::size_t attempt = 0; attempt < max_attempts && out.set.size() < params.count; ++attempt) {
      emit({rng.uniform(0.0, a.size.width), rng.uniform(0.0, a.size.height)});
    }
  }

  const std::size_t n = out.set.size();
  out.planted_outliers.assign(n, false);
  const auto n_out = static_cast<std::size_t>(std::llround(params.outlier_rate * static_cast<double>(n)));
  for (std::size_t idx : rng.sample_without_replacement(n, n_out)) {
    Match& m = out.set.matches[idx];
    for (int tries = 0; tries < 1000; ++tries) {
      m.pa = {rng.uniform(0.0, a.size.width), rng.uniform(0.0, a.size.height)};
      m.pb = {rng.uniform(0.0, b.size.width), rng.uniform(0.0, b.size.height)};
      if (params.outlier_min_violation <= 0.0 ||
          ground_truth_violation(gt, m.pa, m.pb) > params.outlier_min_violation) {
        break;
      }
    }
    out.planted_outliers[idx] = true;
  }
  return out;
}

}  // namespace corrkit
