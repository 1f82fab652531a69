#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corrkit/correspondence.hpp"
#include "corrkit/geometry.hpp"

namespace corrkit {

enum class ModelKind { Homography, Fundamental, Essential };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);
std::size_t minimal_sample_size(ModelKind kind);

struct RansacConfig {
  // px; compared against sqrt of the residual (Sampson for F/E, symmetric
  // transfer for H), i.e. residual < threshold^2.
  double threshold = 2.0;
  double confidence = 0.99999;
  int max_iterations = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Calibration {
  CameraIntrinsics a;
  CameraIntrinsics b;
};

struct TwoViewModel {
  ModelKind kind = ModelKind::Fundamental;
  Mat3 matrix = Mat3::Identity();
  std::vector<bool> inlier_mask;
  int iterations_run = 0;
  double threshold = 0.0;

  std::size_t inlier_count() const;
};

// Normalized DLT. Throws DegenerateConfiguration.
Homography estimate_homography_dlt(std::span<const Vec2> src, std::span<const Vec2> dst);
Homography estimate_homography_dlt(std::span<const Match> matches);

// Normalized 8-point, rank 2, ||F||_F = 1, q^T F p = 0 for p in A, q in B.
Mat3 estimate_fundamental_8pt(std::span<const Vec2> pa, std::span<const Vec2> pb);
Mat3 estimate_fundamental_8pt(std::span<const Match> matches);

// 8-point on K^-1-normalized coordinates projected to the essential manifold.
EssentialMatrix estimate_essential(std::span<const Match> matches, const CameraIntrinsics& k_a,
                                   const CameraIntrinsics& k_b);

// Fundamental matrix in pixel space equivalent to an essential matrix.
Mat3 fundamental_from_essential(const Mat3& e, const Calibration& calib);

// Per-match residuals (px^2) of a model: Sampson for F/E (E evaluated in pixel
// space through the calibration), symmetric transfer error for H.
std::vector<double> model_residuals(ModelKind kind, const Mat3& matrix,
                                    std::span<const Match> matches,
                                    const Calibration* calib = nullptr);

// Seeded RANSAC with adaptive termination and a least-squares refit on the
// best consensus set. Throws InsufficientMatches or NoModelFound.
TwoViewModel ransac(ModelKind kind, std::span<const Match> matches, const RansacConfig& config,
                    const Calibration* calib = nullptr);

enum class FilterStatus { Ok, InsufficientMatches, Degenerate, NoModelFound };

struct FilterResult {
  CorrespondenceSet set;
  FilterStatus status = FilterStatus::Ok;
  std::optional<TwoViewModel> model;
};

// Keeps the inliers of a RANSAC fit; degenerate inputs give an empty set and
// a status flag instead of an exception.
FilterResult filter_matches(const CorrespondenceSet& raw, ModelKind kind, const RansacConfig& config,
                            const Calibration* calib = nullptr);

// Inlier ratio of a RANSAC homography fit; values near 1 flag scenes where an
// 8-point F is not well determined.
double planar_degeneracy_score(std::span<const Match> matches, const RansacConfig& config);

}  // namespace corrkit
