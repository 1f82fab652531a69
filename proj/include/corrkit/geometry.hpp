#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "corrkit/error.hpp"

namespace corrkit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Pinhole calibration. Inputs are assumed undistorted.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  // Throws Error(InvalidArgument) when an invariant is violated.
  void validate() const;
  Mat3 matrix() const;
  Mat3 inverse_matrix() const;
  bool contains(const Vec2& p) const {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() < width && p.y() < height;
  }
};

// World-to-camera rigid transform: x_cam = rotation * x_world + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  bool is_valid(double tol = 1e-9) const;
};

// Projective 2D transform, stored canonically: unit Frobenius norm, sign fixed
// by h(2,2) >= 0 (or the first nonzero entry when h(2,2) is ~0).
class Homography {
 public:
  Homography() : h_(Mat3::Identity() / std::sqrt(3.0)) {}
  explicit Homography(const Mat3& h);

  static Homography identity() { return Homography(); }
  static Homography translation(double tx, double ty);

  const Mat3& matrix() const { return h_; }
  // Matrix scaled so that h(2,2) == 1 (when possible); convenient for display.
  Mat3 normalized_matrix() const;
  Homography inverse() const;
  // (*this) after other: x -> this(other(x)).
  Homography compose(const Homography& other) const;

  std::array<double, 9> row_major() const;

 private:
  Mat3 h_;
};

// Calibrated two-view constraint x_b^T E x_a = 0, canonical ||E||_F = sqrt(2).
class EssentialMatrix {
 public:
  // Projects an arbitrary 3x3 matrix onto the essential manifold.
  static EssentialMatrix project(const Mat3& m);
  static EssentialMatrix from_pose(const Pose& relative);

  const Mat3& matrix() const { return e_; }

 private:
  explicit EssentialMatrix(const Mat3& e) : e_(e) {}
  Mat3 e_;
};

// Per-pixel depth, 0 marks invalid.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  DepthMap() = default;
  DepthMap(int w, int h, float fill = 0.0f)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  std::span<const float> row(int y) const {
    return {values.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)};
  }
  std::size_t valid_count() const;
};

// Bilinear depth at a subpixel location inside [0, w-1] x [0, h-1]; nullopt
// when any neighbour carrying nonzero weight is invalid.
std::optional<double> sample_depth_bilinear(const DepthMap& d, const Vec2& p);

// Scales to unit Frobenius norm and fixes the sign as documented on Homography.
Mat3 canonicalize_homography(const Mat3& h);
// Scales to a target Frobenius norm and makes the largest-magnitude entry positive.
Mat3 canonicalize_sign_scale(const Mat3& m, double frobenius = 1.0);

Mat3 skew(const Vec3& v);

// Transform mapping camera-A coordinates to camera-B coordinates.
Pose relative_pose(const Pose& pose_a, const Pose& pose_b);

// Degrees in [0, 180].
double rotation_angular_error(const Mat3& r_est, const Mat3& r_gt);
// Degrees in [0, 90], sign-ambiguity collapsed. Throws DegenerateTranslation.
double translation_angular_error(const Vec3& t_est, const Vec3& t_gt);

struct PoseError {
  double degrees = 0.0;
  bool degenerate = false;
};
// max(rotation error, translation error); degenerate translations score 180.
PoseError pose_error(const Pose& est, const Pose& gt);

Vec3 unproject(const CameraIntrinsics& k, double depth, const Vec2& pixel);
// Throws InvalidDepth when the point is not strictly in front of the camera.
Vec2 project(const CameraIntrinsics& k, const Vec3& x_cam);

Vec2 apply_homography(const Homography& h, const Vec2& p);
Vec2 apply_homography(const Mat3& h, const Vec2& p);

// The four {R1, R2} x {t, -t} candidates; throws RankDeficient.
std::array<Pose, 4> decompose_essential(const EssentialMatrix& e);

struct NormalizedMatch {
  Vec2 a;  // K_a^-1 applied
  Vec2 b;
};

struct CheiralityResult {
  Pose pose;
  std::size_t index = 0;
  std::array<std::size_t, 4> counts{};
};

// Candidate with most points in front of both cameras (midpoint
// triangulation). Throws NoValidCandidate when every count is zero.
CheiralityResult cheirality_select(std::span<const Pose> candidates,
                                   std::span<const NormalizedMatch> matches);

// Midpoint triangulation in camera-A coordinates; false for parallel rays.
bool triangulate_midpoint(const Pose& relative, const Vec2& a, const Vec2& b, Vec3& x_a);

// (q^T F p)^2 / (|Fp|_12^2 + |F^T q|_12^2); +inf for a vanishing denominator.
double sampson_distance(const Mat3& f, const Vec2& p, const Vec2& q);

Mat3 rotation_from_axis_angle(const Vec3& axis, double radians);

inline constexpr double kPi = 3.14159265358979323846;
inline double to_degrees(double rad) { return rad * 180.0 / kPi; }
inline double to_radians(double deg) { return deg * kPi / 180.0; }

}  // namespace corrkit
