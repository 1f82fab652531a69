#include "scenes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <unistd.h>

#include <json.hpp>

#include "corrkit/interchange.hpp"
#include "corrkit/robust.hpp"

namespace corrkit::testing {

namespace {

double lattice_value(std::uint64_t seed, std::int64_t x, std::int64_t y) {
  const std::uint64_t h = SeedHasher(seed).add(static_cast<std::uint64_t>(x)).add(static_cast<std::uint64_t>(y)).finish();
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(std::uint64_t seed, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double tx = smooth(x - fx);
  const double ty = smooth(y - fy);
  const double v00 = lattice_value(seed, ix, iy);
  const double v10 = lattice_value(seed, ix + 1, iy);
  const double v01 = lattice_value(seed, ix, iy + 1);
  const double v11 = lattice_value(seed, ix + 1, iy + 1);
  return (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
}

}  // namespace

Texture::Texture(std::uint64_t seed) {
  octaves_ = {{23.0, 0.5, seed}, {11.0, 0.3, seed + 1}, {5.0, 0.2, seed + 2}};
}

double Texture::operator()(double x, double y) const {
  double v = 0.0;
  for (const auto& o : octaves_) v += o.amp * value_noise(o.seed, x / o.scale, y / o.scale);
  return v;
}

GrayImage render(const Texture& tex, int width, int height, const Mat3& world_to_image) {
  GrayImage img(width, height);
  const Mat3 inv = world_to_image.inverse();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Vec3 w = inv * Vec3(x, y, 1.0);
      const double v = tex(w.x() / w.z(), w.y() / w.z());
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
    }
  }
  return img;
}

Mat3 random_rotation(Rng& rng, double max_degrees) {
  Vec3 axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
  while (axis.norm() < 1e-6) axis = Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
  return rotation_from_axis_angle(axis.normalized(), to_radians(rng.uniform(0.0, max_degrees)));
}

Homography random_homography(Rng& rng, ImageBounds size, double corner_jitter) {
  const double w = size.width - 1.0;
  const double h = size.height - 1.0;
  const double m = corner_jitter * std::min(size.width, size.height);
  const std::vector<Vec2> src{{0, 0}, {w, 0}, {w, h}, {0, h}};
  std::vector<Vec2> dst;
  for (const auto& c : src) dst.push_back(c + Vec2(rng.uniform(-m, m), rng.uniform(-m, m)));
  return estimate_homography_dlt(src, dst);
}

void write_translation_video(const std::filesystem::path& dir, int frames, ImageBounds size, Vec2 shift_per_frame,
                             bool render_images, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  const Texture tex(seed);
  nlohmann::json gt;
  gt["homographies"] = nlohmann::json::array();
  for (int i = 0; i < frames; ++i) {
    Mat3 h = Mat3::Identity();
    h(0, 2) = shift_per_frame.x() * i;
    h(1, 2) = shift_per_frame.y() * i;
    gt["homographies"].push_back({h(0, 0), h(0, 1), h(0, 2), h(1, 0), h(1, 1), h(1, 2), h(2, 0), h(2, 1), h(2, 2)});
    char name[32];
    std::snprintf(name, sizeof(name), "%08d.pgm", i);
    if (render_images) {
      write_pgm(dir / name, render(tex, size.width, size.height, h));
    } else {
      write_pgm(dir / name, GrayImage(size.width, size.height, 128));
    }
  }
  write_text_file_atomic(dir / "ground_truth.json", gt.dump() + "\n");
}

TwoViewScene random_two_view_scene(Rng& rng, std::size_t n, double max_rot_deg, double noise_sigma) {
  TwoViewScene s;
  s.k = {500.0, 500.0, 320.0, 240.0, 640, 480};
  s.pose_a.rotation = random_rotation(rng, 180.0);
  s.pose_a.translation = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));

  // B looks at the scene centre (on A's optical axis) from a rotated viewpoint.
  const double centre_depth = 8.0;
  const Mat3 r_rel = random_rotation(rng, max_rot_deg);
  const Vec3 centre(0.0, 0.0, centre_depth);
  Vec3 offset(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  Vec3 o_b = centre - r_rel.transpose() * Vec3(0.0, 0.0, centre_depth) + offset;
  if (o_b.norm() < 0.5) o_b += Vec3(1.0, 0.3, 0.2);
  const Vec3 t_rel = -r_rel * o_b;
  s.pose_b.rotation = r_rel * s.pose_a.rotation;
  s.pose_b.translation = r_rel * s.pose_a.translation + t_rel;

  const Pose rel{r_rel, t_rel};
  for (std::size_t attempt = 0; s.matches.size() < n && attempt < 1000 * n; ++attempt) {
    const Vec2 pa(rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0));
    const double depth = rng.uniform(centre_depth - 3.0, centre_depth + 4.0);
    const Vec3 xa = unproject(s.k, depth, pa);
    const Vec3 xb = rel.apply(xa);
    if (xb.z() < 0.5) continue;
    const Vec2 pb = project(s.k, xb);
    Vec2 na = pa;
    Vec2 nb = pb;
    if (noise_sigma > 0.0) {
      na += Vec2(rng.gaussian(), rng.gaussian()) * noise_sigma;
      nb += Vec2(rng.gaussian(), rng.gaussian()) * noise_sigma;
    }
    if (!s.k.contains(na) || !s.k.contains(nb)) continue;
    s.points.push_back(s.pose_a.rotation.transpose() * (xa - s.pose_a.translation));
    s.matches.push_back({na, nb, 1.0, "synthetic"});
  }
  return s;
}

EvalPair depth_scene_pair(Rng& rng, double max_rot_deg, const std::string& id, ImageBounds size) {
  EvalPair p;
  p.dataset = "scenes";
  p.id = id;
  const CameraIntrinsics k{0.8 * size.width, 0.8 * size.width, 0.5 * size.width, 0.5 * size.height,
                           size.width, size.height};
  auto depth = std::make_shared<DepthMap>(size.width, size.height);
  const double phase = rng.uniform(0.0, 6.0);
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      depth->at(x, y) = static_cast<float>(6.0 + 1.5 * std::sin(x / 23.0 + phase) + 1.0 * std::cos(y / 17.0));
    }
  }
  p.a.id = {id, 0};
  p.a.k = k;
  p.a.pose.rotation = random_rotation(rng, 180.0);
  p.a.pose.translation = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  p.a.depth = depth;

  // B orbits the surface centre, which sits on A's optical axis at depth 6.
  const Mat3 r_rel = random_rotation(rng, max_rot_deg);
  const Vec3 centre(0.0, 0.0, 6.0);
  Vec3 o_b = centre - r_rel.transpose() * centre +
             Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
  if (o_b.norm() < 0.3) o_b += Vec3(0.4, 0.1, 0.0);
  const Vec3 t_rel = -r_rel * o_b;
  p.b.id = {id, 1};
  p.b.k = k;
  p.b.pose.rotation = r_rel * p.a.pose.rotation;
  p.b.pose.translation = r_rel * p.a.pose.translation + t_rel;
  return p;
}

EvalFrame plane_frame(const CameraIntrinsics& k, const Pose& pose, double depth, int index) {
  EvalFrame f;
  f.id = {"plane", index};
  f.k = k;
  f.pose = pose;
  f.depth = std::make_shared<DepthMap>(k.width, k.height, static_cast<float>(depth));
  return f;
}

CorrespondenceSet random_set(Rng& rng, std::size_t n, ImageBounds a, ImageBounds b, const FrameId& fa,
                             const FrameId& fb) {
  static const char* kSources[] = {"builtin", "synthetic", "propagated", "ext-1", "m"};
  CorrespondenceSet s{fa, fb, {}};
  for (std::size_t i = 0; i < n; ++i) {
    Match m;
    m.pa = {rng.uniform(0.0, a.width), rng.uniform(0.0, a.height)};
    m.pb = {rng.uniform(0.0, b.width), rng.uniform(0.0, b.height)};
    m.confidence = rng.uniform();
    m.source = kSources[rng.below(5)];
    s.matches.push_back(std::move(m));
  }
  return s;
}

CorrespondenceSet propagate_oracle(const CorrespondenceSet& ab, const CorrespondenceSet& bc, double threshold) {
  CorrespondenceSet out{ab.frame_a, bc.frame_b, {}};
  const double t2 = threshold * threshold;
  for (const auto& m : ab.matches) {
    std::size_t best = bc.size();
    double best_d2 = 0.0;
    for (std::size_t j = 0; j < bc.size(); ++j) {
      const double ex = m.pb.x() - bc.matches[j].pa.x();
      const double ey = m.pb.y() - bc.matches[j].pa.y();
      const double d2 = ex * ex + ey * ey;
      if (!(d2 < t2 || d2 == 0.0)) continue;
      if (best == bc.size() || d2 < best_d2) {
        best = j;
        best_d2 = d2;
      }
    }
    if (best == bc.size()) continue;
    out.matches.push_back({m.pa, bc.matches[best].pb, std::min(m.confidence, bc.matches[best].confidence),
                           "propagated"});
  }
  return out;
}

std::size_t dedup_count_oracle(const std::vector<Match>& priority_ordered, double radius) {
  std::vector<const Match*> kept;
  const double r2 = radius * radius;
  for (const auto& m : priority_ordered) {
    bool dup = false;
    for (const Match* k : kept) {
      if ((k->pa - m.pa).squaredNorm() <= r2 && (k->pb - m.pb).squaredNorm() <= r2) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(&m);
  }
  return kept.size();
}

std::vector<std::string> canonical_rows(const CorrespondenceSet& s) {
  std::vector<std::string> rows;
  char buf[256];
  for (const auto& m : s.matches) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %s", m.pa.x(), m.pa.y(), m.pb.x(), m.pb.y(),
                  m.confidence, m.source.c_str());
    rows.emplace_back(buf);
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

std::filesystem::path temp_dir(const std::string& tag) {
  const auto base = std::filesystem::temp_directory_path() / "corrkit_tests";
  const auto dir = base / (tag + "_" + std::to_string(static_cast<unsigned long long>(::getpid())));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace corrkit::testing
