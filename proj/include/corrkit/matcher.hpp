#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "corrkit/correspondence.hpp"
#include "corrkit/geometry.hpp"
#include "corrkit/image.hpp"

namespace corrkit {

enum class MatcherKind { Builtin, Synthetic, External };

// Harris corners + normalized intensity patches + mutual NN with ratio test.
struct BuiltinParams {
  double harris_k = 0.04;
  int nms_radius = 3;
  int max_keypoints = 1000;
  int patch_size = 11;     // odd
  double ratio = 0.9;      // Lowe ratio on descriptor distances
  double quality = 0.01;   // response threshold relative to the strongest corner
  int window_radius = 2;   // structure tensor window (2r+1)^2
};

// Ground-truth driven matcher for tests and synthetic videos.
struct SyntheticParams {
  std::size_t count = 2000;  // ignored when grid_spacing > 0
  double outlier_rate = 0.0;
  double noise_sigma = 0.0;  // px, added to the B endpoint
  std::uint64_t seed = 0;
  // > 0: A endpoints on a regular lattice with this spacing (offset by half a
  // spacing), every lattice point visible in B is emitted.
  double grid_spacing = 0.0;
  // Planted outliers are redrawn until their ground-truth violation (transfer
  // error for H, sqrt Sampson for depth+poses) exceeds this many px.
  double outlier_min_violation = 0.0;
};

// Out-of-process matcher: `<cmd> {image_a} {image_b} {out}`.
struct ExternalParams {
  std::string command;  // whitespace-separated template
  std::filesystem::path working_dir;
  double timeout_seconds = 300.0;
};

struct MatcherSpec {
  MatcherKind kind = MatcherKind::Builtin;
  std::string name = "builtin";
  std::variant<BuiltinParams, SyntheticParams, ExternalParams> params;

  void validate() const;
};

MatcherSpec matcher_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MatcherSpec& spec);
// Inline form `<kind>:<name>[,key=value...]`, or a path to a JSON file.
MatcherSpec parse_matcher_spec(const std::string& text);

struct FrameSource {
  FrameId id;
  std::filesystem::path path;              // PGM on disk, may be empty
  std::shared_ptr<const GrayImage> image;  // in-memory alternative
  std::optional<CameraIntrinsics> intrinsics;
  ImageBounds size;
};

// Image held in memory, else read from path.
GrayImage load_image(const FrameSource& frame);

struct DepthPoseTruth {
  CameraIntrinsics k_a;
  CameraIntrinsics k_b;
  Pose pose_a;
  Pose pose_b;
  std::shared_ptr<const DepthMap> depth_a;
};

// Homography maps A pixels to B pixels.
using GroundTruth = std::variant<Homography, DepthPoseTruth>;

// Exact transfer of an A pixel into B; nullopt when invisible or undefined.
std::optional<Vec2> ground_truth_transfer(const GroundTruth& gt, const Vec2& pa);
// Distance of a pair from the ground-truth relation (px).
double ground_truth_violation(const GroundTruth& gt, const Vec2& pa, const Vec2& pb);

enum class MatchStatus { Ok, EmptyImage, NoKeypoints, ProcessFailure, Timeout, ParseError, MissingGroundTruth };
std::string_view to_string(MatchStatus status);

struct MatchOutcome {
  CorrespondenceSet set;
  MatchStatus status = MatchStatus::Ok;
  std::string message;
  std::size_t dropped_out_of_bounds = 0;
  std::vector<bool> planted_outliers;  // synthetic matcher only
};

struct Keypoint {
  int x = 0;
  int y = 0;
  double response = 0.0;
};

std::vector<Keypoint> detect_harris(const GrayImage& image, const BuiltinParams& params);

MatchOutcome match_builtin(const FrameSource& a, const FrameSource& b, const BuiltinParams& params,
                           const std::string& source = "builtin");

MatchOutcome match_synthetic(const FrameSource& a, const FrameSource& b, const GroundTruth& gt,
                             const SyntheticParams& params, const std::string& source = "synthetic");

MatchOutcome match_external(const FrameSource& a, const FrameSource& b, const ExternalParams& params,
                            const std::string& source);

// Dispatches on the spec kind, stamps the pair's frame ids and drops matches
// outside either image (counted in dropped_out_of_bounds).
MatchOutcome run_matcher(const MatcherSpec& spec, const FrameSource& a, const FrameSource& b,
                         const GroundTruth* gt = nullptr);

}  // namespace corrkit
