#include "corrkit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace corrkit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidDepth: return "InvalidDepth";
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::DegenerateTranslation: return "DegenerateTranslation";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NoValidCandidate: return "NoValidCandidate";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::InsufficientMatches: return "InsufficientMatches";
    case ErrorCode::NoModelFound: return "NoModelFound";
    case ErrorCode::MismatchedPair: return "MismatchedPair";
    case ErrorCode::ChainMismatch: return "ChainMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NoValidDepth: return "NoValidDepth";
    case ErrorCode::EmptyErrors: return "EmptyErrors";
    case ErrorCode::IncompleteGrid: return "IncompleteGrid";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "image size must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error(ErrorCode::InvalidArgument, "principal point outside the image");
  }
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Mat3 CameraIntrinsics::inverse_matrix() const {
  Mat3 k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

bool Pose::is_valid(double tol) const {
  const Mat3 d = rotation.transpose() * rotation - Mat3::Identity();
  return d.cwiseAbs().maxCoeff() < tol && std::fabs(rotation.determinant() - 1.0) < tol &&
         translation.allFinite();
}

std::size_t DepthMap::valid_count() const {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](float d) { return d > 0.0f; }));
}

Mat3 canonicalize_homography(const Mat3& h) {
  const double n = h.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::InvalidArgument, "zero or non-finite homography");
  Mat3 out = h / n;
  double sign = 1.0;
  if (std::fabs(out(2, 2)) > 1e-12) {
    sign = out(2, 2) < 0.0 ? -1.0 : 1.0;
  } else {
    for (int i = 0; i < 9; ++i) {
      const double v = out(i / 3, i % 3);
      if (v != 0.0) {
        sign = v < 0.0 ? -1.0 : 1.0;
        break;
      }
    }
  }
  return out * sign;
}

Mat3 canonicalize_sign_scale(const Mat3& m, double frobenius) {
  const double n = m.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::InvalidArgument, "zero or non-finite matrix");
  int best = 0;
  for (int i = 1; i < 9; ++i) {
    if (std::fabs(m(i / 3, i % 3)) > std::fabs(m(best / 3, best % 3))) best = i;
  }
  const double sign = m(best / 3, best % 3) < 0.0 ? -1.0 : 1.0;
  return m * (sign * frobenius / n);
}

Homography::Homography(const Mat3& h) : h_(canonicalize_homography(h)) {
  if (std::fabs(h_.determinant()) < 1e-14) {
    throw Error(ErrorCode::InvalidArgument, "homography is singular");
  }
}

Homography Homography::translation(double tx, double ty) {
  Mat3 h = Mat3::Identity();
  h(0, 2) = tx;
  h(1, 2) = ty;
  return Homography(h);
}

Mat3 Homography::normalized_matrix() const {
  if (std::fabs(h_(2, 2)) > 1e-12) return h_ / h_(2, 2);
  return h_;
}

Homography Homography::inverse() const { return Homography(h_.inverse()); }

Homography Homography::compose(const Homography& other) const {
  return Homography(h_ * other.h_);
}

std::array<double, 9> Homography::row_major() const {
  const Mat3 m = normalized_matrix();
  std::array<double, 9> out{};
  for (int i = 0; i < 9; ++i) out[i] = m(i / 3, i % 3);
  return out;
}

EssentialMatrix EssentialMatrix::project(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();
  // Below rank 2 the two leading singular directions are not determined.
  if (!(s(0) > 0.0) || s(1) / s(0) < 1e-6) {
    throw Error(ErrorCode::RankDeficient, "matrix below rank 2 has no essential projection");
  }
  const Mat3 e = svd.matrixU() * Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal() *
                 svd.matrixV().transpose();
  return EssentialMatrix(canonicalize_sign_scale(e, std::sqrt(2.0)));
}

EssentialMatrix EssentialMatrix::from_pose(const Pose& relative) {
  if (relative.translation.norm() < 1e-12) {
    throw Error(ErrorCode::DegenerateTranslation, "essential matrix needs a nonzero baseline");
  }
  return project(skew(relative.translation) * relative.rotation);
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

Pose relative_pose(const Pose& pose_a, const Pose& pose_b) {
  Pose out;
  out.rotation = pose_b.rotation * pose_a.rotation.transpose();
  out.translation = pose_b.translation - out.rotation * pose_a.translation;
  return out;
}

double rotation_angular_error(const Mat3& r_est, const Mat3& r_gt) {
  // atan2 form of arccos((tr(Q) - 1) / 2); accurate near 0 and 180 degrees.
  const Mat3 q = r_gt.transpose() * r_est;
  const Vec3 v(q(2, 1) - q(1, 2), q(0, 2) - q(2, 0), q(1, 0) - q(0, 1));
  const double c = std::clamp(q.trace() - 1.0, -2.0, 2.0);
  return to_degrees(std::atan2(v.norm(), c));
}

double translation_angular_error(const Vec3& t_est, const Vec3& t_gt) {
  const double ne = t_est.norm();
  const double ng = t_gt.norm();
  if (ne < 1e-12 || ng < 1e-12) {
    throw Error(ErrorCode::DegenerateTranslation, "translation norm below 1e-12");
  }
  const Vec3 a = t_est / ne;
  const Vec3 b = t_gt / ng;
  const double c = std::clamp(std::fabs(a.dot(b)), 0.0, 1.0);
  return to_degrees(std::atan2(a.cross(b).norm(), c));
}

PoseError pose_error(const Pose& est, const Pose& gt) {
  const double rot = rotation_angular_error(est.rotation, gt.rotation);
  try {
    const double trans = translation_angular_error(est.translation, gt.translation);
    return {std::max(rot, trans), false};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateTranslation) throw;
    return {180.0, true};
  }
}

Vec3 unproject(const CameraIntrinsics& k, double depth, const Vec2& pixel) {
  if (!(depth > 0.0)) throw Error(ErrorCode::InvalidDepth, "depth must be positive");
  return {depth * (pixel.x() - k.cx) / k.fx, depth * (pixel.y() - k.cy) / k.fy, depth};
}

Vec2 project(const CameraIntrinsics& k, const Vec3& x_cam) {
  if (!(x_cam.z() > 0.0)) throw Error(ErrorCode::InvalidDepth, "point is not in front of the camera");
  return {k.fx * x_cam.x() / x_cam.z() + k.cx, k.fy * x_cam.y() / x_cam.z() + k.cy};
}

Vec2 apply_homography(const Mat3& h, const Vec2& p) {
  const double w = h(2, 0) * p.x() + h(2, 1) * p.y() + h(2, 2);
  if (!(std::fabs(w) > 1e-12)) throw Error(ErrorCode::PointAtInfinity, "projective depth vanishes");
  return {(h(0, 0) * p.x() + h(0, 1) * p.y() + h(0, 2)) / w,
          (h(1, 0) * p.x() + h(1, 1) * p.y() + h(1, 2)) / w};
}

Vec2 apply_homography(const Homography& h, const Vec2& p) { return apply_homography(h.matrix(), p); }

std::array<Pose, 4> decompose_essential(const EssentialMatrix& e) {
  Eigen::JacobiSVD<Mat3> svd(e.matrix(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();
  if (!(s(0) > 0.0) || s(1) / s(0) < 1e-6) {
    throw Error(ErrorCode::RankDeficient, "essential matrix has fewer than two nonzero singular values");
  }
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;
  Mat3 w;
  w << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  const Mat3 r1 = u * w * v.transpose();
  const Mat3 r2 = u * w.transpose() * v.transpose();
  const Vec3 t = u.col(2).normalized();
  return {Pose{r1, t}, Pose{r1, -t}, Pose{r2, t}, Pose{r2, -t}};
}

bool triangulate_midpoint(const Pose& relative, const Vec2& a, const Vec2& b, Vec3& x_a) {
  const Mat3 rt = relative.rotation.transpose();
  const Vec3 da(a.x(), a.y(), 1.0);
  const Vec3 db = rt * Vec3(b.x(), b.y(), 1.0);
  const Vec3 cb = -rt * relative.translation;
  const double aa = da.dot(da);
  const double ab = da.dot(db);
  const double bb = db.dot(db);
  const double det = ab * ab - aa * bb;
  if (std::fabs(det) < 1e-12 * aa * bb) return false;
  const double rhs_s = da.dot(cb);
  const double rhs_u = db.dot(cb);
  // s*aa - u*ab = rhs_s ; s*ab - u*bb = rhs_u
  const double s = (-rhs_s * bb + ab * rhs_u) / det;
  const double u = (aa * rhs_u - ab * rhs_s) / det;
  x_a = 0.5 * (s * da + cb + u * db);
  return true;
}

CheiralityResult cheirality_select(std::span<const Pose> candidates,
                                   std::span<const NormalizedMatch> matches) {
  if (matches.empty()) throw Error(ErrorCode::InvalidArgument, "cheirality needs at least one match");
  if (candidates.empty() || candidates.size() > 4) {
    throw Error(ErrorCode::InvalidArgument, "expected one to four candidates");
  }
  CheiralityResult result;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    std::size_t count = 0;
    for (const auto& m : matches) {
      Vec3 x;
      if (!triangulate_midpoint(candidates[c], m.a, m.b, x)) continue;
      if (x.z() > 0.0 && candidates[c].apply(x).z() > 0.0) ++count;
    }
    result.counts[c] = count;
    if (count > result.counts[result.index]) result.index = c;
  }
  if (result.counts[result.index] == 0) {
    throw Error(ErrorCode::NoValidCandidate, "no candidate places any point in front of both cameras");
  }
  result.pose = candidates[result.index];
  return result;
}

double sampson_distance(const Mat3& f, const Vec2& p, const Vec2& q) {
  const Vec3 ph(p.x(), p.y(), 1.0);
  const Vec3 qh(q.x(), q.y(), 1.0);
  const Vec3 fp = f * ph;
  const Vec3 ftq = f.transpose() * qh;
  const double num = qh.dot(fp);
  const double den = fp.x() * fp.x() + fp.y() * fp.y() + ftq.x() * ftq.x() + ftq.y() * ftq.y();
  if (!(den >= 1e-18)) return std::numeric_limits<double>::infinity();
  return num * num / den;
}

Mat3 rotation_from_axis_angle(const Vec3& axis, double radians) {
  return Eigen::AngleAxisd(radians, axis.normalized()).toRotationMatrix();
}

std::optional<double> sample_depth_bilinear(const DepthMap& d, const Vec2& p) {
  if (!(p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= d.width - 1 && p.y() <= d.height - 1)) return std::nullopt;
  const int x0 = static_cast<int>(std::floor(p.x()));
  const int y0 = static_cast<int>(std::floor(p.y()));
  const double fx = p.x() - x0;
  const double fy = p.y() - y0;
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
      if (w == 0.0) continue;
      const float v = d.at(std::min(x0 + dx, d.width - 1), std::min(y0 + dy, d.height - 1));
      if (!(v > 0.0f)) return std::nullopt;
      acc += w * v;
    }
  }
  return acc;
}


}  // namespace corrkit
