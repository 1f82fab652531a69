#include <algorithm>
#include <cmath>
#include <limits>

#include "corrkit/kernels.hpp"
#include "corrkit/matcher.hpp"

namespace corrkit {
namespace {

struct Descriptors {
  std::size_t stride = 0;  // padded to a multiple of 8
  std::vector<float> data;
  std::vector<Keypoint> keypoints;

  const float* row(std::size_t i) const { return data.data() + i * stride; }
  std::size_t size() const { return keypoints.size(); }
};

// Zero-mean unit-norm patches; flat patches are skipped.
Descriptors describe(const GrayImage& img, const std::vector<Keypoint>& kps, int patch) {
  const int r = patch / 2;
  const std::size_t len = static_cast<std::size_t>(patch) * patch;
  Descriptors d;
  d.stride = (len + 7) / 8 * 8;
  std::vector<float> buf(len);
  for (const Keypoint& kp : kps) {
    double mean = 0.0;
    std::size_t k = 0;
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        buf[k] = static_cast<float>(img.at(kp.x + dx, kp.y + dy));
        mean += buf[k++];
      }
    }
    mean /= static_cast<double>(len);
    double norm2 = 0.0;
    for (float& v : buf) {
      v = static_cast<float>(v - mean);
      norm2 += static_cast<double>(v) * v;
    }
    if (norm2 < 1e-6) continue;
    const float inv = static_cast<float>(1.0 / std::sqrt(norm2));
    const std::size_t base = d.data.size();
    d.data.resize(base + d.stride, 0.0f);
    for (std::size_t i = 0; i < len; ++i) d.data[base + i] = buf[i] * inv;
    d.keypoints.push_back(kp);
  }
  return d;
}

double descriptor_distance(float dot) { return std::sqrt(std::max(0.0, 2.0 - 2.0 * static_cast<double>(dot))); }

}  // namespace

std::vector<Keypoint> detect_harris(const GrayImage& img, const BuiltinParams& p) {
  const int w = img.width;
  const int h = img.height;
  std::vector<Keypoint> out;
  if (w < 3 || h < 3) return out;

  // Sobel gradients.
  std::vector<double> ixx(static_cast<std::size_t>(w) * h, 0.0), iyy(ixx.size(), 0.0), ixy(ixx.size(), 0.0);
  auto px = [&](int x, int y) { return static_cast<double>(img.at(x, y)); };
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      ixx[i] = gx * gx;
      iyy[i] = gy * gy;
      ixy[i] = gx * gy;
    }
  }

  // Box-window structure tensor and Harris response.
  const int wr = p.window_radius;
  const int margin = std::max(p.patch_size / 2, wr + 1);
  std::vector<double> resp(ixx.size(), 0.0);
  double max_resp = 0.0;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      double sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (int dy = -wr; dy <= wr; ++dy) {
        for (int dx = -wr; dx <= wr; ++dx) {
          const std::size_t i = static_cast<std::size_t>(y + dy) * w + (x + dx);
          sxx += ixx[i];
          syy += iyy[i];
          sxy += ixy[i];
        }
      }
      const double tr = sxx + syy;
      const double r = sxx * syy - sxy * sxy - p.harris_k * tr * tr;
      resp[static_cast<std::size_t>(y) * w + x] = r;
      max_resp = std::max(max_resp, r);
    }
  }
  if (!(max_resp > 0.0)) return out;

  const double floor = p.quality * max_resp;
  const int nr = p.nms_radius;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      const double r = resp[static_cast<std::size_t>(y) * w + x];
      if (!(r > floor)) continue;
      bool is_max = true;
      for (int dy = -nr; dy <= nr && is_max; ++dy) {
        for (int dx = -nr; dx <= nr; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          const double o = resp[static_cast<std::size_t>(yy) * w + xx];
          // Plateaus keep their first pixel in raster order.
          if (o > r || (o == r && (yy < y || (yy == y && xx < x)))) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) out.push_back({x, y, r});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Keypoint& a, const Keypoint& b) { return a.response > b.response; });
  if (out.size() > static_cast<std::size_t>(p.max_keypoints)) out.resize(static_cast<std::size_t>(p.max_keypoints));
  return out;
}

MatchOutcome match_builtin(const FrameSource& a, const FrameSource& b, const BuiltinParams& params,
                           const std::string& source) {
  MatchOutcome out;
  out.set.frame_a = a.id;
  out.set.frame_b = b.id;
  const GrayImage ia = load_image(a);
  const GrayImage ib = load_image(b);
  if (ia.empty() || ib.empty()) {
    out.status = MatchStatus::EmptyImage;
    out.message = "empty image";
    return out;
  }
  const Descriptors da = describe(ia, detect_harris(ia, params), params.patch_size);
  const Descriptors db = describe(ib, detect_harris(ib, params), params.patch_size);
  if (da.size() == 0 || db.size() == 0) {
    out.status = MatchStatus::NoKeypoints;
    out.message = "no keypoints detected";
    return out;
  }

  const auto dot = kernels::active().dot;
  const std::size_t na = da.size();
  const std::size_t nb = db.size();
  std::vector<float> sim(na * nb);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) sim[i * nb + j] = dot(da.row(i), db.row(j), da.stride);
  }

  std::vector<std::size_t> best_for_b(nb, na);
  for (std::size_t j = 0; j < nb; ++j) {
    float best = -std::numeric_limits<float>::infinity();
    for (std::size_t i = 0; i < na; ++i) {
      if (sim[i * nb + j] > best) {
        best = sim[i * nb + j];
        best_for_b[j] = i;
      }
    }
  }
  for (std::size_t i = 0; i < na; ++i) {
    std::size_t best = nb;
    float s1 = -std::numeric_limits<float>::infinity();
    float s2 = -std::numeric_limits<float>::infinity();
    for (std::size_t j = 0; j < nb; ++j) {
      const float s = sim[i * nb + j];
      if (s > s1) {
        s2 = s1;
        s1 = s;
        best = j;
      } else if (s > s2) {
        s2 = s;
      }
    }
    if (best == nb || best_for_b[best] != i) continue;
    const double d1 = descriptor_distance(s1);
    double ratio = 0.0;
    if (nb > 1) {
      const double d2 = descriptor_distance(s2);
      ratio = d2 > 0.0 ? d1 / d2 : 1.0;
    }
    if (!(ratio < params.ratio)) continue;
    const Keypoint& ka = da.keypoints[i];
    const Keypoint& kb = db.keypoints[best];
    out.set.matches.push_back({Vec2(ka.x, ka.y), Vec2(kb.x, kb.y), 1.0 - ratio, source});
  }
  return out;
}

}  // namespace corrkit
