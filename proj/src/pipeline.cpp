#include <algorithm>
#include <cstdio>
#include <set>

#include <Eigen/Geometry>
#include <spdlog/spdlog.h>

#include "corrkit/image.hpp"
#include "corrkit/interchange.hpp"
#include "corrkit/parallel.hpp"
#include "corrkit/pipeline.hpp"

namespace corrkit {

std::vector<int> sample_frames(int video_length, int interval) {
  if (video_length < 1) throw Error(ErrorCode::InvalidArgument, "video_length must be >= 1");
  if (interval < 1) throw Error(ErrorCode::InvalidArgument, "interval must be >= 1");
  std::vector<int> out;
  for (int f = 0; f < video_length; f += interval) out.push_back(f);
  return out;
}

std::vector<std::pair<int, int>> schedule_base_pairs(std::span<const int> frames,
                                                     std::span<const int> base_offsets) {
  const std::set<int> sampled(frames.begin(), frames.end());
  std::vector<std::pair<int, int>> out;
  for (int x : frames) {
    for (int d : base_offsets) {
      if (sampled.count(x + d)) out.emplace_back(x, x + d);
    }
  }
  return out;
}

std::uint64_t pair_seed(std::uint64_t global_seed, std::string_view stage, const FrameId& a,
                        const FrameId& b, std::uint64_t salt) {
  return SeedHasher(global_seed)
      .add(stage)
      .add(a.video)
      .add(static_cast<std::uint64_t>(a.index))
      .add(b.video)
      .add(static_cast<std::uint64_t>(b.index))
      .add(salt)
      .finish();
}

namespace {

std::optional<Calibration> calibration_of(const FrameSource& a, const FrameSource& b) {
  if (a.intrinsics && b.intrinsics) return Calibration{*a.intrinsics, *b.intrinsics};
  return std::nullopt;
}

CorrespondenceSet filter_with(const CorrespondenceSet& raw, const PipelineConfig& cfg,
                              const std::optional<Calibration>& calib, std::uint64_t salt) {
  RansacConfig rc = cfg.ransac;
  rc.seed = pair_seed(cfg.seed ^ cfg.ransac.seed, "ransac", raw.frame_a, raw.frame_b, salt);
  if (cfg.filter_kind == ModelKind::Essential && !calib) {
    throw Error(ErrorCode::ConfigError, "essential filtering needs frame intrinsics");
  }
  return filter_matches(raw, cfg.filter_kind, rc, calib ? &*calib : nullptr).set;
}

}  // namespace

BaseLabelResult generate_base_labels(const FrameSource& a, const FrameSource& b,
                                     const PipelineConfig& cfg, const GroundTruth* gt) {
  BaseLabelResult result;
  const auto calib = calibration_of(a, b);
  std::vector<CorrespondenceSet> sets;
  std::vector<std::string> order;
  for (std::size_t mi = 0; mi < cfg.matchers.size(); ++mi) {
    MatcherSpec spec = cfg.matchers[mi];
    order.push_back(spec.name);
    if (auto* s = std::get_if<SyntheticParams>(&spec.params)) {
      s->seed = SeedHasher(cfg.seed).add(s->seed).finish();
    }
    MatchOutcome outcome = run_matcher(spec, a, b, gt);
    result.raw_counts[spec.name] = outcome.set.size();
    if (outcome.status != MatchStatus::Ok) {
      spdlog::warn("matcher {} failed on {}->{}: {} {}", spec.name, a.id.to_string(), b.id.to_string(),
                   to_string(outcome.status), outcome.message);
      result.failures.push_back({spec.name, outcome.status, outcome.message});
      continue;
    }
    if (cfg.filter_stage == FilterStage::PerMethod) {
      sets.push_back(filter_with(outcome.set, cfg, calib, mi));
    } else {
      sets.push_back(std::move(outcome.set));
    }
  }
  if (sets.empty()) {
    result.set = CorrespondenceSet{a.id, b.id, {}};
  } else {
    result.set = fuse(sets, cfg.dedup_radius, order);
  }
  if (cfg.filter_stage == FilterStage::PostFusion && !result.set.empty()) {
    result.set = filter_with(result.set, cfg, calib, cfg.matchers.size());
  }
  result.dropped = result.set.size() < minimal_sample_size(cfg.filter_kind);
  return result;
}

std::vector<TrainingPair> propagate_video(const BaseLabels& base, std::span<const int> frames,
                                          const PipelineConfig& cfg,
                                          const std::map<int, ImageBounds>& sizes) {
  std::vector<TrainingPair> out;
  if (cfg.base_offsets.empty() || frames.empty()) return out;
  const int i0 = cfg.base_offsets.front();
  std::set<int> ladder;
  for (int i = i0; i <= cfg.base_offsets.back(); i *= 2) ladder.insert(i);
  for (int d : cfg.base_offsets) {
    if (!ladder.count(d)) spdlog::warn("base offset {} is not on the doubling ladder from {}; unused", d, i0);
  }
  const std::set<int> sampled(frames.begin(), frames.end());
  const int span = frames.back() - frames.front();

  // survivors[level][x] = set between x and x + i0 * 2^level meeting the budget.
  std::vector<std::map<int, CorrespondenceSet>> survivors;
  {
    std::map<int, CorrespondenceSet> level0;
    for (int x : frames) {
      const auto it = base.find({x, x + i0});
      if (it != base.end() && meets_budget(it->second, cfg.min_correspondences)) level0.emplace(x, it->second);
    }
    survivors.push_back(std::move(level0));
  }

  for (int level = 1;; ++level) {
    const int interval = i0 << level;
    if (interval > span) break;
    const int half = interval / 2;
    const auto& prev = survivors.back();
    const bool merge_base = std::binary_search(cfg.base_offsets.begin(), cfg.base_offsets.end(), interval);
    if (prev.empty() && !merge_base) break;

    std::vector<int> starts;
    for (int x : frames) {
      if (sampled.count(x + interval)) starts.push_back(x);
    }
    std::vector<std::optional<CorrespondenceSet>> slots(starts.size());
    parallel_for(starts.size(), cfg.parallelism, [&](std::size_t k) {
      const int x = starts[k];
      std::optional<CorrespondenceSet> composed;
      const auto first = prev.find(x);
      const auto second = prev.find(x + half);
      if (first != prev.end() && second != prev.end()) {
        composed = propagate(first->second, second->second, cfg.propagation_pixel_threshold);
      }
      if (merge_base) {
        const auto b = base.find({x, x + interval});
        if (b != base.end()) {
          composed = composed ? merge(b->second, *composed, cfg.dedup_radius) : b->second;
        }
      }
      if (composed && meets_budget(*composed, cfg.min_correspondences)) slots[k] = std::move(composed);
    });
    std::map<int, CorrespondenceSet> current;
    for (std::size_t k = 0; k < starts.size(); ++k) {
      if (slots[k]) current.emplace(starts[k], std::move(*slots[k]));
    }
    if (current.empty() && interval >= cfg.base_offsets.back()) break;
    survivors.push_back(std::move(current));
  }

  auto size_of = [&](int f) {
    const auto it = sizes.find(f);
    return it == sizes.end() ? ImageBounds{} : it->second;
  };
  for (int x : frames) {
    for (int level = static_cast<int>(survivors.size()) - 1; level >= 0; --level) {
      const auto it = survivors[static_cast<std::size_t>(level)].find(x);
      if (it == survivors[static_cast<std::size_t>(level)].end()) continue;
      TrainingPair p;
      p.frame_a = it->second.frame_a;
      p.frame_b = it->second.frame_b;
      p.size_a = size_of(p.frame_a.index);
      p.size_b = size_of(p.frame_b.index);
      p.correspondences = it->second;
      p.provenance = source_histogram(it->second);
      p.propagation_rounds = level;
      out.push_back(std::move(p));
      break;
    }
  }
  return out;
}

std::optional<GroundTruth> VideoFrames::ground_truth(int a, int b) const {
  const auto ua = static_cast<std::size_t>(a);
  const auto ub = static_cast<std::size_t>(b);
  if (ua < homographies.size() && ub < homographies.size() && homographies[ua] && homographies[ub]) {
    return GroundTruth{homographies[ub]->compose(homographies[ua]->inverse())};
  }
  if (ua < cameras.size() && ub < cameras.size() && cameras[ua].depth) {
    return GroundTruth{DepthPoseTruth{cameras[ua].k, cameras[ub].k, cameras[ua].pose, cameras[ub].pose,
                                      cameras[ua].depth}};
  }
  return std::nullopt;
}

namespace {

std::filesystem::path frame_path(const std::filesystem::path& dir, int index) {
  char name[32];
  std::snprintf(name, sizeof(name), "%08d.pgm", index);
  return dir / name;
}

Pose pose_from_json(const nlohmann::json& j) {
  const auto q = j.at("q").get<std::vector<double>>();
  const auto t = j.at("t").get<std::vector<double>>();
  if (q.size() != 4 || t.size() != 3) throw Error(ErrorCode::ParseError, "pose needs q[4] and t[3]");
  Pose p;
  p.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized().toRotationMatrix();
  p.translation = Vec3(t[0], t[1], t[2]);
  return p;
}

CameraIntrinsics intrinsics_from_json(const nlohmann::json& k, ImageBounds size) {
  const auto v = k.get<std::vector<double>>();
  if (v.size() != 4) throw Error(ErrorCode::ParseError, "intrinsics need [fx, fy, cx, cy]");
  CameraIntrinsics out{v[0], v[1], v[2], v[3], size.width, size.height};
  out.validate();
  return out;
}

}  // namespace

VideoFrames scan_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
  VideoFrames v;
  v.dir = dir;
  auto name_source = dir;
  if (name_source.filename().empty()) name_source = name_source.parent_path();
  v.video = name_source.filename().string();
  if (v.video.empty()) v.video = "video";
  for (char& c : v.video) {
    if (c == ' ' || c == '\t') c = '_';
  }
  for (int i = 0;; ++i) {
    const auto path = frame_path(dir, i);
    if (!std::filesystem::exists(path)) break;
    FrameSource f;
    f.id = {v.video, i};
    f.path = path;
    f.size = read_pgm_size(path);
    v.frames.push_back(std::move(f));
  }
  if (v.frames.empty()) throw Error(ErrorCode::IoError, "no %08d.pgm frames in " + dir.string());

  const auto gt_path = dir / "ground_truth.json";
  if (std::filesystem::exists(gt_path)) {
    try {
      const auto j = nlohmann::json::parse(read_text_file(gt_path));
      if (j.contains("homographies")) {
        for (const auto& h : j.at("homographies")) {
          if (h.is_null()) {
            v.homographies.emplace_back();
            continue;
          }
          const auto e = h.get<std::vector<double>>();
          if (e.size() != 9) throw Error(ErrorCode::ParseError, "homography needs 9 numbers");
          Mat3 m;
          m << e[0], e[1], e[2], e[3], e[4], e[5], e[6], e[7], e[8];
          v.homographies.emplace_back(Homography(m));
        }
      }
      if (j.contains("cameras")) {
        std::size_t i = 0;
        for (const auto& c : j.at("cameras")) {
          const ImageBounds size = i < v.frames.size() ? v.frames[i].size : ImageBounds{};
          VideoFrames::Camera cam;
          cam.k = intrinsics_from_json(c.at("K"), size);
          cam.pose = pose_from_json(c.at("pose"));
          if (c.contains("depth")) {
            cam.depth = std::make_shared<DepthMap>(read_depth(dir / c.at("depth").get<std::string>()));
          }
          if (i < v.frames.size()) v.frames[i].intrinsics = cam.k;
          v.cameras.push_back(std::move(cam));
          ++i;
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, gt_path.string() + ": " + e.what());
    }
  }
  return v;
}

namespace {

std::string pair_stem(const FrameId& a, const FrameId& b) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "_%08d_%08d", a.index, b.index);
  return a.video + buf;
}

void write_base_cache(const std::filesystem::path& dir, const VideoFrames& video,
                      std::span<const int> frames, const BaseLabels& base, const PipelineConfig& cfg) {
  std::filesystem::create_directories(dir);
  nlohmann::json index;
  index["video"] = video.video;
  index["frames_dir"] = std::filesystem::absolute(video.dir).string();
  index["frames"] = std::vector<int>(frames.begin(), frames.end());
  nlohmann::json sizes = nlohmann::json::object();
  for (int f : frames) {
    const auto& s = video.frames[static_cast<std::size_t>(f)].size;
    sizes[std::to_string(f)] = {s.width, s.height};
  }
  index["sizes"] = sizes;
  index["pairs"] = nlohmann::json::array();
  for (const auto& [key, set] : base) {
    const std::string file = pair_stem(set.frame_a, set.frame_b) + ".corrs";
    write_corrs(dir / file, set);
    index["pairs"].push_back({{"a", key.first}, {"b", key.second}, {"file", file}});
  }
  index["config_hash"] = config_hash(cfg);
  write_text_file_atomic(dir / "index.json", index.dump(2) + "\n");
}

}  // namespace

LabelReport run_label(const VideoFrames& video, const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.matchers.empty()) throw Error(ErrorCode::ConfigError, "no matchers configured");
  if (cfg.output_dir.empty()) throw Error(ErrorCode::ConfigError, "no output directory");

  LabelReport report;
  const auto frames = sample_frames(static_cast<int>(video.frames.size()), cfg.frame_interval);
  const auto pairs = schedule_base_pairs(frames, cfg.base_offsets);
  report.base_pairs = pairs.size();
  spdlog::info("{}: {} frames, {} sampled, {} base pairs", video.video, video.frames.size(),
               frames.size(), pairs.size());

  std::vector<BaseLabelResult> results(pairs.size());
  parallel_for(pairs.size(), cfg.parallelism, [&](std::size_t i) {
    const auto [a, b] = pairs[i];
    const auto gt = video.ground_truth(a, b);
    results[i] = generate_base_labels(video.frames[static_cast<std::size_t>(a)],
                                      video.frames[static_cast<std::size_t>(b)], cfg,
                                      gt ? &*gt : nullptr);
  });

  BaseLabels base;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    report.matcher_failures += results[i].failures.size();
    if (results[i].dropped) {
      ++report.dropped_pairs;
      spdlog::warn("dropping base pair {}->{}: {} fused matches", pairs[i].first, pairs[i].second,
                   results[i].set.size());
      continue;
    }
    base.emplace(pairs[i], std::move(results[i].set));
  }
  write_base_cache(cfg.output_dir / "base", video, frames, base, cfg);

  std::map<int, ImageBounds> sizes;
  for (int f : frames) sizes[f] = video.frames[static_cast<std::size_t>(f)].size;
  report.pairs = propagate_video(base, frames, cfg, sizes);
  if (cfg.augmentation.enabled) report.augment_flags = augment_pairs(report.pairs, cfg);
  report.manifest = emit_dataset(report.pairs, cfg.output_dir, cfg);
  spdlog::info("{}: emitted {} training pairs", video.video, report.pairs.size());
  return report;
}

LabelReport run_propagate(const std::filesystem::path& base_dir, const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.output_dir.empty()) throw Error(ErrorCode::ConfigError, "no output directory");
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(read_text_file(base_dir / "index.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, "base index: " + std::string(e.what()));
  }
  LabelReport report;
  std::map<int, ImageBounds> sizes;
  for (const auto& [k, v] : index.at("sizes").items()) sizes[std::stoi(k)] = {v.at(0).get<int>(), v.at(1).get<int>()};
  const auto frames = index.at("frames").get<std::vector<int>>();
  BaseLabels base;
  for (const auto& p : index.at("pairs")) {
    const int a = p.at("a").get<int>();
    const int b = p.at("b").get<int>();
    base.emplace(std::make_pair(a, b), read_corrs(base_dir / p.at("file").get<std::string>(), sizes[a], sizes[b]));
  }
  report.base_pairs = base.size();
  report.pairs = propagate_video(base, frames, cfg, sizes);
  if (cfg.augmentation.enabled) report.augment_flags = augment_pairs(report.pairs, cfg);
  report.manifest = emit_dataset(report.pairs, cfg.output_dir, cfg);
  return report;
}

LabelReport run_augment(const std::filesystem::path& dataset_dir, const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.output_dir.empty()) throw Error(ErrorCode::ConfigError, "no output directory");
  LabelReport report;
  report.pairs = load_dataset(dataset_dir);
  report.augment_flags = augment_pairs(report.pairs, cfg);
  report.manifest = emit_dataset(report.pairs, cfg.output_dir, cfg);
  return report;
}

}  // namespace corrkit
