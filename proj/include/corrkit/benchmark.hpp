#pragma once

// Zero-shot evaluation: overlap-ratio binning, relative pose AUC, mean rank
// and homography corner error.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "corrkit/geometry.hpp"
#include "corrkit/matcher.hpp"
#include "corrkit/robust.hpp"

namespace corrkit {

struct EvalFrame {
  FrameId id;
  std::filesystem::path image;
  CameraIntrinsics k;
  Pose pose;
  std::shared_ptr<const DepthMap> depth;
  std::filesystem::path depth_path;  // as referenced on disk, may be empty
};

struct EvalPair {
  std::string dataset;
  std::string id;
  EvalFrame a;
  EvalFrame b;
  double overlap_ratio = -1.0;  // < 0 when unknown
  int bin = -1;                 // -1 outside [0.1, 0.5]
};

inline constexpr int kOverlapBins = 5;
inline constexpr double kOverlapMin = 0.1;
inline constexpr double kOverlapMax = 0.5;
inline constexpr double kOverlapBinWidth = 0.08;

// Fraction of A's valid-depth pixels that land inside B with consistent depth.
double directional_overlap(const EvalFrame& a, const EvalFrame& b, double depth_tolerance = 0.05);
// min of both directions. Throws NoValidDepth.
double overlap_ratio(const EvalFrame& a, const EvalFrame& b, double depth_tolerance = 0.05);
// 0..4 inside [0.1, 0.5] (upper end of the last bin closed), else -1.
int overlap_bin(double ratio);

struct SampledPairs {
  std::vector<EvalPair> pairs;  // bin-major, pool order within a bin
  std::array<std::size_t, kOverlapBins> per_bin_counts{};
  std::vector<std::string> warnings;
};

SampledPairs sample_eval_pairs(std::span<const EvalPair> pool, std::size_t per_bin = 760,
                               std::uint64_t seed = 0);

struct PairEvaluation {
  double error_deg = 180.0;
  bool failed = true;
  std::string reason;
};

inline constexpr double kFailureScore = 180.0;

// Essential RANSAC, decomposition, cheirality, pose error vs ground truth.
// Failures score 180 degrees.
PairEvaluation evaluate_pair_detailed(const CorrespondenceSet& corrs, const EvalPair& pair,
                                      const RansacConfig& config);
double evaluate_pair(const CorrespondenceSet& corrs, const EvalPair& pair, const RansacConfig& config);

// Exact normalized area under the recall curve up to threshold. Errors must
// be in [0, 180] or +inf. Throws EmptyErrors.
double auc(std::span<const double> errors, double threshold);
std::vector<double> auc(std::span<const double> errors, std::span<const double> thresholds);

struct ScoreTable {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  // auc[m][d] at 5 degrees; NaN marks a missing cell.
  std::vector<std::vector<double>> auc;
  // Cells whose evaluation coverage fell below 90%.
  std::vector<std::vector<bool>> flagged;

  std::vector<double> mean_auc() const;
};

// Average per-dataset rank (1 = best, ties averaged). Throws IncompleteGrid.
std::vector<double> mean_rank(const ScoreTable& table);

// Mean distance between the four image corners mapped by both homographies;
// +inf when either sends a corner to infinity.
double corner_error(const Homography& h_est, const Homography& h_gt, ImageBounds size);

struct HomographyCase {
  Homography estimate;
  Homography truth;
  ImageBounds size;
};

inline constexpr std::array<double, 3> kCornerThresholds{3.0, 5.0, 10.0};

std::vector<double> homography_corner_auc(std::span<const HomographyCase> cases,
                                          std::span<const double> thresholds = kCornerThresholds);

struct EvalDataset {
  std::string name;
  std::filesystem::path dir;
  std::vector<EvalPair> pairs;
};

// Reads <dir>/pairs.json and the referenced depth grids; overlap ratios
// missing from the file are computed when both depths are present.
EvalDataset load_eval_dataset(const std::filesystem::path& dir);
// Writes <dataset.dir>/pairs.json (depth grids must already exist on disk).
void save_eval_dataset(const EvalDataset& dataset);

struct BenchmarkConfig {
  RansacConfig ransac;
  std::uint64_t seed = 0;
  int parallelism = 1;
  double min_coverage = 0.9;
};

struct ReportRecord {
  std::string method;
  std::string dataset;
  double auc5 = 0.0;
  double auc10 = 0.0;
  double auc20 = 0.0;
  std::size_t n_pairs = 0;
  std::size_t n_failures = 0;
};

struct BenchmarkResult {
  ScoreTable table;
  std::vector<ReportRecord> records;
  // errors[m][d] per pair, in dataset order.
  std::vector<std::vector<std::vector<double>>> errors;
};

// Throws ConfigError on an empty method or dataset list.
BenchmarkResult run_benchmark(std::span<const EvalDataset> datasets, std::span<const MatcherSpec> methods,
                              const BenchmarkConfig& cfg);

nlohmann::json report_to_json(std::span<const ReportRecord> records);
std::vector<ReportRecord> report_from_json(const nlohmann::json& j);
// Table from records; cells with failures above 1 - min_coverage are flagged.
ScoreTable score_table(std::span<const ReportRecord> records, double min_coverage = 0.9);
// Method | Mean Rank | Mean AUC@5 | per-dataset AUC@5 (percent), '*' on flagged cells.
std::string format_table(const ScoreTable& table);

}  // namespace corrkit
