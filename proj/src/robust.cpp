#include "corrkit/robust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "corrkit/kernels.hpp"
#include "corrkit/random.hpp"

namespace corrkit {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Homography: return "homography";
    case ModelKind::Fundamental: return "fundamental";
    case ModelKind::Essential: return "essential";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "homography") return ModelKind::Homography;
  if (text == "fundamental") return ModelKind::Fundamental;
  if (text == "essential") return ModelKind::Essential;
  throw Error(ErrorCode::ConfigError, "unknown model kind '" + std::string(text) + "'");
}

std::size_t minimal_sample_size(ModelKind kind) { return kind == ModelKind::Homography ? 4 : 8; }

void RansacConfig::validate() const {
  if (!(threshold > 0.0)) throw Error(ErrorCode::ConfigError, "ransac threshold must be positive");
  if (!(confidence > 0.0 && confidence < 1.0)) throw Error(ErrorCode::ConfigError, "ransac confidence must be in (0,1)");
  if (max_iterations < 1) throw Error(ErrorCode::ConfigError, "ransac max_iterations must be >= 1");
}

std::size_t TwoViewModel::inlier_count() const {
  return static_cast<std::size_t>(std::count(inlier_mask.begin(), inlier_mask.end(), true));
}

namespace {

using DesignMatrix = Eigen::Matrix<double, Eigen::Dynamic, 9>;

// Similarity moving the centroid to the origin with mean distance sqrt(2).
Mat3 hartley_transform(std::span<const Vec2> pts) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean = 0.0;
  for (const auto& p : pts) mean += (p - c).norm();
  mean /= static_cast<double>(pts.size());
  const double s = mean > 0.0 ? std::sqrt(2.0) / mean : 1.0;
  Mat3 t;
  t << s, 0.0, -s * c.x(), 0.0, s, -s * c.y(), 0.0, 0.0, 1.0;
  return t;
}

Vec2 transform_point(const Mat3& t, const Vec2& p) {
  return {t(0, 0) * p.x() + t(0, 2), t(1, 1) * p.y() + t(1, 2)};
}

// Null vector of the design matrix; throws when its null space is not 1-D.
Eigen::Matrix<double, 9, 1> null_vector(const DesignMatrix& a, const char* what) {
  DesignMatrix padded = a;
  if (padded.rows() < 9) {
    padded.conservativeResize(9, Eigen::NoChange);
    padded.bottomRows(9 - a.rows()).setZero();
  }
  Eigen::JacobiSVD<DesignMatrix> svd(padded, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (!(s(0) > 0.0) || s(7) / s(0) < 1e-8) {
    throw Error(ErrorCode::DegenerateConfiguration, std::string(what) + " design matrix is rank deficient");
  }
  return svd.matrixV().col(8);
}

bool has_collinear_triple(std::span<const Vec2> p) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      for (std::size_t k = j + 1; k < p.size(); ++k) {
        const Vec2 u = p[j] - p[i];
        const Vec2 v = p[k] - p[i];
        const double cross = u.x() * v.y() - u.y() * v.x();
        const double scale = std::max(u.squaredNorm(), v.squaredNorm());
        if (std::fabs(cross) <= 1e-10 * scale || scale == 0.0) return true;
      }
    }
  }
  return false;
}

Mat3 eight_point_raw(std::span<const Vec2> pa, std::span<const Vec2> pb, bool rank2) {
  if (pa.size() != pb.size()) throw Error(ErrorCode::InvalidArgument, "point lists differ in length");
  if (pa.size() < 8) throw Error(ErrorCode::InsufficientMatches, "8-point needs at least 8 matches");
  const Mat3 ta = hartley_transform(pa);
  const Mat3 tb = hartley_transform(pb);
  DesignMatrix a(static_cast<Eigen::Index>(pa.size()), 9);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const Vec2 p = transform_point(ta, pa[i]);
    const Vec2 q = transform_point(tb, pb[i]);
    a.row(static_cast<Eigen::Index>(i)) << q.x() * p.x(), q.x() * p.y(), q.x(), q.y() * p.x(),
        q.y() * p.y(), q.y(), p.x(), p.y(), 1.0;
  }
  const auto v = null_vector(a, "8-point");
  Mat3 f;
  f << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  if (rank2) {
    Eigen::JacobiSVD<Mat3> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d s = svd.singularValues();
    s(2) = 0.0;
    f = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  }
  return tb.transpose() * f * ta;
}

struct SoA {
  std::vector<double> xa, ya, xb, yb;

  explicit SoA(std::span<const Match> m) : xa(m.size()), ya(m.size()), xb(m.size()), yb(m.size()) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      xa[i] = m[i].pa.x();
      ya[i] = m[i].pa.y();
      xb[i] = m[i].pb.x();
      yb[i] = m[i].pb.y();
    }
  }
  kernels::PointPairsSoA view() const { return {xa, ya, xb, yb}; }
};

void to_row_major(const Mat3& m, kernels::Mat3& out) {
  for (int i = 0; i < 9; ++i) out[i] = m(i / 3, i % 3);
}

// Residuals (px^2) of a candidate model over all matches.
void score_residuals(ModelKind kind, const Mat3& model, const Calibration* calib, const SoA& pts,
                     std::span<double> out) {
  const auto& k = kernels::active();
  kernels::Mat3 m{};
  if (kind == ModelKind::Homography) {
    kernels::Mat3 mi{};
    to_row_major(model, m);
    to_row_major(model.inverse(), mi);
    k.transfer(m, mi, pts.view(), out);
    return;
  }
  to_row_major(kind == ModelKind::Essential ? fundamental_from_essential(model, *calib) : model, m);
  k.sampson(m, pts.view(), out);
}

struct Consensus {
  std::size_t count = 0;
  double residual_sum = 0.0;
};

Consensus consensus(std::span<const double> residuals, double thr2) {
  Consensus c;
  for (double r : residuals) {
    if (r < thr2) {
      ++c.count;
      c.residual_sum += r;
    }
  }
  return c;
}

std::vector<Vec2> normalized_points(std::span<const Vec2> pts, const CameraIntrinsics& k) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.emplace_back((p.x() - k.cx) / k.fx, (p.y() - k.cy) / k.fy);
  return out;
}

// Levenberg-Marquardt on the pixel Sampson error over rank-2 matrices in
// Hartley coordinates, G = U diag(1, sigma, 0) V^T with rotation updates on U
// and V. Returns f0 when no step lowers the cost.
Mat3 refine_fundamental_sampson(const Mat3& f0, std::span<const Vec2> pa, std::span<const Vec2> pb) {
  const std::size_t n = pa.size();
  if (n < 8) return f0;
  const Mat3 ta = hartley_transform(pa);
  const Mat3 tb = hartley_transform(pb);
  const double sa2 = ta(0, 0) * ta(0, 0);
  const double sb2 = tb(0, 0) * tb(0, 0);
  std::vector<Vec3> np(n), nq(n);
  for (std::size_t i = 0; i < n; ++i) {
    np[i] = transform_point(ta, pa[i]).homogeneous();
    nq[i] = transform_point(tb, pb[i]).homogeneous();
  }
  using Vec7 = Eigen::Matrix<double, 7, 1>;
  using Mat7 = Eigen::Matrix<double, 7, 7>;
  using Residuals = Eigen::VectorXd;
  auto residuals = [&](const Mat3& g, Residuals& r) {
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 a = g * np[i];
      const Vec3 b = g.transpose() * nq[i];
      const double d = sb2 * (a(0) * a(0) + a(1) * a(1)) + sa2 * (b(0) * b(0) + b(1) * b(1));
      r(static_cast<Eigen::Index>(i)) = d > 1e-300 ? nq[i].dot(a) / std::sqrt(d) : 0.0;
    }
  };
  struct Factors {
    Mat3 u, v;
    double sigma;
    Mat3 compose() const { return u * Eigen::Vector3d(1.0, sigma, 0.0).asDiagonal() * v.transpose(); }
    Factors step(const Vec7& x) const {
      auto rot = [](const Vec3& w) {
        const double angle = w.norm();
        return angle > 0.0 ? rotation_from_axis_angle(w / angle, angle) : Mat3::Identity();
      };
      return {u * rot(x.head<3>()), v * rot(x.segment<3>(3)), sigma + x(6)};
    }
  };

  Mat3 g0 = tb.transpose().inverse() * f0 * ta.inverse();
  Eigen::JacobiSVD<Mat3> svd(g0, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0)) return f0;
  Factors cur{svd.matrixU(), svd.matrixV(), sv(1) / sv(0)};
  Residuals r(n), rp(n), rm(n);
  residuals(cur.compose(), r);
  double cost = r.squaredNorm();
  const double start_cost = cost;
  Eigen::Matrix<double, Eigen::Dynamic, 7> jac(static_cast<Eigen::Index>(n), 7);
  double lambda = 1e-3;
  bool fresh = false;
  for (int iter = 0; iter < 50 && lambda < 1e12; ++iter) {
    if (!fresh) {
      constexpr double h = 1e-6;
      for (int k = 0; k < 7; ++k) {
        Vec7 dx = Vec7::Zero();
        dx(k) = h;
        residuals(cur.step(dx).compose(), rp);
        residuals(cur.step(-dx).compose(), rm);
        jac.col(k) = (rp - rm) / (2.0 * h);
      }
      fresh = true;
    }
    Mat7 a = jac.transpose() * jac;
    a.diagonal() *= 1.0 + lambda;
    const Vec7 x = a.ldlt().solve(-jac.transpose() * r);
    const Factors cand = cur.step(x);
    residuals(cand.compose(), rp);
    const double c = rp.squaredNorm();
    if (c < cost) {
      const bool converged = cost - c < 1e-12 * cost;
      cur = cand;
      r = rp;
      cost = c;
      fresh = false;
      lambda = std::max(lambda * 0.1, 1e-12);
      if (converged) break;
    } else {
      lambda *= 10.0;
    }
  }
  if (!(cost < start_cost)) return f0;
  return tb.transpose() * cur.compose() * ta;
}

Mat3 fit_model(ModelKind kind, std::span<const Vec2> pa, std::span<const Vec2> pb,
               const Calibration* calib) {
  switch (kind) {
    case ModelKind::Homography:
      return estimate_homography_dlt(pa, pb).matrix();
    case ModelKind::Fundamental:
      return estimate_fundamental_8pt(pa, pb);
    case ModelKind::Essential: {
      const auto na = normalized_points(pa, calib->a);
      const auto nb = normalized_points(pb, calib->b);
      return EssentialMatrix::project(eight_point_raw(na, nb, false)).matrix();
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown model kind");
}

}  // namespace

Homography estimate_homography_dlt(std::span<const Vec2> src, std::span<const Vec2> dst) {
  if (src.size() != dst.size()) throw Error(ErrorCode::InvalidArgument, "point lists differ in length");
  if (src.size() < 4) throw Error(ErrorCode::InsufficientMatches, "DLT needs at least 4 matches");
  if (src.size() == 4 && (has_collinear_triple(src) || has_collinear_triple(dst))) {
    throw Error(ErrorCode::DegenerateConfiguration, "three of the four points are collinear");
  }
  const Mat3 ta = hartley_transform(src);
  const Mat3 tb = hartley_transform(dst);
  DesignMatrix a(static_cast<Eigen::Index>(2 * src.size()), 9);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec2 p = transform_point(ta, src[i]);
    const Vec2 q = transform_point(tb, dst[i]);
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << -p.x(), -p.y(), -1.0, 0.0, 0.0, 0.0, q.x() * p.x(), q.x() * p.y(), q.x();
    a.row(r + 1) << 0.0, 0.0, 0.0, -p.x(), -p.y(), -1.0, q.y() * p.x(), q.y() * p.y(), q.y();
  }
  const auto v = null_vector(a, "DLT");
  Mat3 hn;
  hn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  const Mat3 h = tb.inverse() * hn * ta;
  try {
    return Homography(h);
  } catch (const Error&) {
    throw Error(ErrorCode::DegenerateConfiguration, "DLT produced a singular homography");
  }
}

Homography estimate_homography_dlt(std::span<const Match> matches) {
  std::vector<Vec2> a, b;
  for (const auto& m : matches) {
    a.push_back(m.pa);
    b.push_back(m.pb);
  }
  return estimate_homography_dlt(a, b);
}

Mat3 estimate_fundamental_8pt(std::span<const Vec2> pa, std::span<const Vec2> pb) {
  return canonicalize_sign_scale(eight_point_raw(pa, pb, true), 1.0);
}

Mat3 estimate_fundamental_8pt(std::span<const Match> matches) {
  std::vector<Vec2> a, b;
  for (const auto& m : matches) {
    a.push_back(m.pa);
    b.push_back(m.pb);
  }
  return estimate_fundamental_8pt(a, b);
}

EssentialMatrix estimate_essential(std::span<const Match> matches, const CameraIntrinsics& k_a,
                                   const CameraIntrinsics& k_b) {
  std::vector<Vec2> a, b;
  for (const auto& m : matches) {
    a.push_back(m.pa);
    b.push_back(m.pb);
  }
  return EssentialMatrix::project(eight_point_raw(normalized_points(a, k_a), normalized_points(b, k_b), false));
}

Mat3 fundamental_from_essential(const Mat3& e, const Calibration& calib) {
  return calib.b.inverse_matrix().transpose() * e * calib.a.inverse_matrix();
}

std::vector<double> model_residuals(ModelKind kind, const Mat3& matrix,
                                    std::span<const Match> matches, const Calibration* calib) {
  if (kind == ModelKind::Essential && calib == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "essential residuals need a calibration");
  }
  const SoA pts(matches);
  std::vector<double> out(matches.size());
  score_residuals(kind, matrix, calib, pts, out);
  return out;
}

TwoViewModel ransac(ModelKind kind, std::span<const Match> matches, const RansacConfig& config,
                    const Calibration* calib) {
  config.validate();
  if (kind == ModelKind::Essential && calib == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "essential RANSAC needs a calibration");
  }
  const std::size_t n = matches.size();
  const std::size_t s = minimal_sample_size(kind);
  if (n < s) {
    throw Error(ErrorCode::InsufficientMatches,
                std::to_string(n) + " matches, need " + std::to_string(s));
  }

  const SoA pts(matches);
  const double thr2 = config.threshold * config.threshold;
  std::vector<double> residuals(n);
  Rng rng(config.seed);

  Mat3 best_model = Mat3::Zero();
  Consensus best;
  bool have_best = false;
  std::vector<Vec2> sa(s), sb(s);
  long needed = config.max_iterations;
  int it = 0;
  for (; it < needed; ++it) {
    const auto sample = rng.sample_without_replacement(n, s);
    for (std::size_t k = 0; k < s; ++k) {
      sa[k] = matches[sample[k]].pa;
      sb[k] = matches[sample[k]].pb;
    }
    Mat3 model;
    try {
      model = fit_model(kind, sa, sb, calib);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateConfiguration || e.code() == ErrorCode::RankDeficient ||
          e.code() == ErrorCode::InvalidArgument) {
        continue;
      }
      throw;
    }
    score_residuals(kind, model, calib, pts, residuals);
    const Consensus c = consensus(residuals, thr2);
    if (!have_best || c.count > best.count ||
        (c.count == best.count && c.residual_sum < best.residual_sum)) {
      have_best = true;
      best = c;
      best_model = model;
      const double w = static_cast<double>(c.count) / static_cast<double>(n);
      const double ws = std::pow(w, static_cast<double>(s));
      if (ws >= 1.0 - 1e-15) {
        needed = it + 1;
      } else if (ws > 0.0) {
        // log1p keeps tiny ws from rounding 1 - ws to 1 (which would stop the loop).
        const double denom = std::log1p(-ws);
        const double est = denom < 0.0 ? std::ceil(std::log(1.0 - config.confidence) / denom)
                                       : static_cast<double>(config.max_iterations);
        needed = static_cast<long>(std::min<double>(config.max_iterations, std::max(est, 1.0)));
      }
    }
  }
  if (!have_best || best.count < s) {
    throw Error(ErrorCode::NoModelFound, "no sample reached minimal inlier support");
  }

  TwoViewModel out;
  out.kind = kind;
  out.iterations_run = it;
  out.threshold = config.threshold;

  // Refits on the current consensus set until that set stops changing.
  constexpr int kMaxRefits = 10;
  Mat3 chosen = best_model;
  score_residuals(kind, chosen, calib, pts, residuals);
  std::vector<Vec2> ia, ib;
  std::vector<double> refit_res(n);
  for (int round = 0; round < kMaxRefits; ++round) {
    ia.clear();
    ib.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (residuals[i] < thr2) {
        ia.push_back(matches[i].pa);
        ib.push_back(matches[i].pb);
      }
    }
    Mat3 refit;
    try {
      refit = fit_model(kind, ia, ib, calib);
      if (kind == ModelKind::Fundamental) refit = refine_fundamental_sampson(refit, ia, ib);
    } catch (const Error& e) {
      spdlog::debug("ransac refit failed, keeping previous model: {}", e.what());
      break;
    }
    score_residuals(kind, refit, calib, pts, refit_res);
    const std::size_t count = consensus(refit_res, thr2).count;
    if (count < s) break;
    const bool same_set = std::equal(residuals.begin(), residuals.end(), refit_res.begin(),
                                     [&](double a, double b) { return (a < thr2) == (b < thr2); });
    chosen = refit;
    residuals.swap(refit_res);
    if (same_set) break;
  }
  score_residuals(kind, chosen, calib, pts, residuals);
  out.matrix = chosen;
  out.inlier_mask.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.inlier_mask[i] = residuals[i] < thr2;
  return out;
}

FilterResult filter_matches(const CorrespondenceSet& raw, ModelKind kind, const RansacConfig& config,
                            const Calibration* calib) {
  FilterResult result;
  result.set.frame_a = raw.frame_a;
  result.set.frame_b = raw.frame_b;
  if (raw.size() < minimal_sample_size(kind)) {
    result.status = FilterStatus::InsufficientMatches;
    spdlog::warn("filter {}->{}: {} matches, below minimal sample", raw.frame_a.to_string(),
                 raw.frame_b.to_string(), raw.size());
    return result;
  }
  try {
    TwoViewModel model = ransac(kind, raw.matches, config, calib);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (model.inlier_mask[i]) result.set.matches.push_back(raw.matches[i]);
    }
    result.model = std::move(model);
  } catch (const Error& e) {
    result.status = e.code() == ErrorCode::NoModelFound ? FilterStatus::NoModelFound
                                                        : FilterStatus::Degenerate;
    if (e.code() != ErrorCode::NoModelFound && e.code() != ErrorCode::DegenerateConfiguration &&
        e.code() != ErrorCode::RankDeficient) {
      throw;
    }
    spdlog::warn("filter {}->{}: {}", raw.frame_a.to_string(), raw.frame_b.to_string(), e.what());
  }
  return result;
}

double planar_degeneracy_score(std::span<const Match> matches, const RansacConfig& config) {
  if (matches.size() < 4) return 0.0;
  try {
    const auto model = ransac(ModelKind::Homography, matches, config);
    return static_cast<double>(model.inlier_count()) / static_cast<double>(matches.size());
  } catch (const Error&) {
    return 0.0;
  }
}

}  // namespace corrkit
