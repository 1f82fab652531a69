#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "corrkit/correspondence.hpp"
#include "corrkit/matcher.hpp"
#include "corrkit/random.hpp"
#include "corrkit/robust.hpp"

namespace corrkit {

enum class FilterStage { PerMethod, PostFusion };

struct AugmentConfig {
  bool enabled = true;
  // Fraction of min(width, height) by which each corner may move.
  double max_corner_perturbation = 0.15;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PipelineConfig {
  int frame_interval = 20;
  std::vector<int> base_offsets{20, 40, 80};
  std::size_t min_correspondences = 1024;
  double propagation_pixel_threshold = 1.0;
  double dedup_radius = 1.0;
  std::vector<MatcherSpec> matchers;
  RansacConfig ransac;
  ModelKind filter_kind = ModelKind::Fundamental;
  FilterStage filter_stage = FilterStage::PerMethod;
  AugmentConfig augmentation;
  std::uint64_t seed = 0;
  int parallelism = 1;
  std::filesystem::path output_dir;

  void validate() const;
};

PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
// Hex digest of the canonical serialization of every field that can change
// results (parallelism and output_dir are execution knobs and excluded).
std::string config_hash(const PipelineConfig& cfg);

struct TrainingPair {
  FrameId frame_a;
  FrameId frame_b;
  ImageBounds size_a;
  ImageBounds size_b;
  CorrespondenceSet correspondences;
  std::optional<Homography> augment_a;
  std::optional<Homography> augment_b;
  std::map<std::string, std::size_t> provenance;  // matches per source tag
  int propagation_rounds = 0;                     // interval doublings past the base
  std::vector<std::string> flags;

  int interval() const { return frame_b.index - frame_a.index; }
};

// [0, interval, 2*interval, ...] below video_length.
std::vector<int> sample_frames(int video_length, int interval);

// (X, X+d) for every sampled X and offset d whose endpoint is also sampled.
std::vector<std::pair<int, int>> schedule_base_pairs(std::span<const int> frames,
                                                     std::span<const int> base_offsets);

struct MatcherFailure {
  std::string matcher;
  MatchStatus status = MatchStatus::Ok;
  std::string message;
};

struct BaseLabelResult {
  CorrespondenceSet set;
  bool dropped = false;  // fused count below the minimal sample size
  std::vector<MatcherFailure> failures;
  std::map<std::string, std::size_t> raw_counts;
};

// Seed for a stochastic step on one pair, independent of execution order.
std::uint64_t pair_seed(std::uint64_t global_seed, std::string_view stage, const FrameId& a,
                        const FrameId& b, std::uint64_t salt = 0);

// Runs every matcher, robust-filters (per method or after fusion) and fuses.
BaseLabelResult generate_base_labels(const FrameSource& a, const FrameSource& b,
                                     const PipelineConfig& cfg, const GroundTruth* gt = nullptr);

// Base sets of one video keyed by (frame_a, frame_b) index.
using BaseLabels = std::map<std::pair<int, int>, CorrespondenceSet>;

// Interval-doubling propagation: merging with base sets while base offsets
// exist, pure propagation afterwards, each chain stopping when the budget
// fails. Emits the most distant surviving pair per starting frame.
std::vector<TrainingPair> propagate_video(const BaseLabels& base, std::span<const int> frames,
                                          const PipelineConfig& cfg,
                                          const std::map<int, ImageBounds>& sizes = {});

struct PerspectiveResult {
  std::optional<Homography> h;  // nullopt when every resample was rejected
  int attempts = 0;
};

PerspectiveResult random_perspective(ImageBounds size, const AugmentConfig& cfg, Rng& rng);

// Warps correspondence endpoints; drops those leaving the image. Returns the
// input pair (flagged BudgetUnderflow) when the warped set misses the budget.
TrainingPair apply_augmentation(const TrainingPair& pair, const Homography& h_a,
                                const Homography& h_b, std::size_t min_correspondences);

// One interchange file per pair under pairs/ plus manifest.json. Throws
// Error(IoError) after leaving a MANIFEST_PARTIAL marker.
nlohmann::json emit_dataset(std::span<const TrainingPair> pairs,
                            const std::filesystem::path& output_dir, const PipelineConfig& cfg);
std::vector<TrainingPair> load_dataset(const std::filesystem::path& dir);

// Frame directory of %08d.pgm files plus optional ground_truth.json.
struct VideoFrames {
  std::string video;
  std::filesystem::path dir;
  std::vector<FrameSource> frames;  // index == frame number
  std::vector<std::optional<Homography>> homographies;  // frame 0 -> frame i
  struct Camera {
    CameraIntrinsics k;
    Pose pose;
    std::shared_ptr<const DepthMap> depth;
  };
  std::vector<Camera> cameras;

  // Ground truth for (a, b) when ground_truth.json provided it.
  std::optional<GroundTruth> ground_truth(int a, int b) const;
};

VideoFrames scan_frames(const std::filesystem::path& dir);

struct LabelReport {
  std::vector<TrainingPair> pairs;
  std::size_t base_pairs = 0;
  std::size_t dropped_pairs = 0;
  std::size_t matcher_failures = 0;
  std::size_t augment_flags = 0;
  nlohmann::json manifest;
};

// Full labeling run: base labels (cached under <out>/base), propagation,
// augmentation, emission to <out>.
LabelReport run_label(const VideoFrames& video, const PipelineConfig& cfg);
// Propagation + augmentation + emission from a base-label cache.
LabelReport run_propagate(const std::filesystem::path& base_dir, const PipelineConfig& cfg);
// Re-augments an emitted dataset into cfg.output_dir.
LabelReport run_augment(const std::filesystem::path& dataset_dir, const PipelineConfig& cfg);

// Augments emitted pairs in place with per-pair seeded homographies.
std::size_t augment_pairs(std::vector<TrainingPair>& pairs, const PipelineConfig& cfg);

}  // namespace corrkit
