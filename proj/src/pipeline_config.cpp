#include <cstdio>
#include <set>

#include "corrkit/interchange.hpp"
#include "corrkit/pipeline.hpp"

namespace corrkit {

void AugmentConfig::validate() const {
  if (!(max_corner_perturbation >= 0.0 && max_corner_perturbation < 0.5)) {
    throw Error(ErrorCode::ConfigError, "max_corner_perturbation must be in [0, 0.5)");
  }
}

void PipelineConfig::validate() const {
  if (frame_interval <= 0) throw Error(ErrorCode::ConfigError, "frame_interval must be positive");
  for (std::size_t i = 0; i < base_offsets.size(); ++i) {
    if (base_offsets[i] <= 0 || base_offsets[i] % frame_interval != 0) {
      throw Error(ErrorCode::ConfigError, "base offsets must be positive multiples of frame_interval");
    }
    if (i > 0 && base_offsets[i] <= base_offsets[i - 1]) {
      throw Error(ErrorCode::ConfigError, "base offsets must be strictly increasing");
    }
  }
  if (min_correspondences < 1) throw Error(ErrorCode::ConfigError, "min_correspondences must be >= 1");
  if (!(propagation_pixel_threshold >= 0.0)) throw Error(ErrorCode::ConfigError, "propagation threshold must be >= 0");
  if (!(dedup_radius >= 0.0)) throw Error(ErrorCode::ConfigError, "dedup_radius must be >= 0");
  if (parallelism < 1) throw Error(ErrorCode::ConfigError, "parallelism must be >= 1");
  std::set<std::string> names;
  for (const auto& m : matchers) {
    m.validate();
    if (!names.insert(m.name).second) throw Error(ErrorCode::ConfigError, "duplicate matcher name '" + m.name + "'");
  }
  ransac.validate();
  augmentation.validate();
}

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw Error(ErrorCode::ConfigError, std::string("unknown key '") + key + "' in " + where);
  }
}

}  // namespace

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  try {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
    reject_unknown(j,
                   {"frame_interval", "base_offsets", "min_correspondences",
                    "propagation_pixel_threshold", "dedup_radius", "matchers", "ransac",
                    "filter_kind", "filter_stage", "augmentation", "seed", "parallelism",
                    "output_dir"},
                   "pipeline config");
    cfg.frame_interval = j.value("frame_interval", cfg.frame_interval);
    cfg.base_offsets = j.value("base_offsets", cfg.base_offsets);
    cfg.min_correspondences = j.value("min_correspondences", cfg.min_correspondences);
    cfg.propagation_pixel_threshold = j.value("propagation_pixel_threshold", cfg.propagation_pixel_threshold);
    cfg.dedup_radius = j.value("dedup_radius", cfg.dedup_radius);
    if (j.contains("matchers")) {
      for (const auto& m : j.at("matchers")) cfg.matchers.push_back(matcher_spec_from_json(m));
    }
    if (j.contains("ransac")) {
      const auto& r = j.at("ransac");
      reject_unknown(r, {"threshold", "confidence", "max_iterations", "seed"}, "ransac");
      cfg.ransac.threshold = r.value("threshold", cfg.ransac.threshold);
      cfg.ransac.confidence = r.value("confidence", cfg.ransac.confidence);
      cfg.ransac.max_iterations = r.value("max_iterations", cfg.ransac.max_iterations);
      cfg.ransac.seed = r.value("seed", cfg.ransac.seed);
    }
    if (j.contains("filter_kind")) cfg.filter_kind = parse_model_kind(j.at("filter_kind").get<std::string>());
    if (j.contains("filter_stage")) {
      const auto s = j.at("filter_stage").get<std::string>();
      if (s == "per_method") cfg.filter_stage = FilterStage::PerMethod;
      else if (s == "post_fusion") cfg.filter_stage = FilterStage::PostFusion;
      else throw Error(ErrorCode::ConfigError, "filter_stage must be per_method or post_fusion");
    }
    if (j.contains("augmentation")) {
      const auto& a = j.at("augmentation");
      reject_unknown(a, {"enabled", "max_corner_perturbation", "seed"}, "augmentation");
      cfg.augmentation.enabled = a.value("enabled", cfg.augmentation.enabled);
      cfg.augmentation.max_corner_perturbation =
          a.value("max_corner_perturbation", cfg.augmentation.max_corner_perturbation);
      cfg.augmentation.seed = a.value("seed", cfg.augmentation.seed);
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.parallelism = j.value("parallelism", cfg.parallelism);
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("pipeline config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["frame_interval"] = cfg.frame_interval;
  j["base_offsets"] = cfg.base_offsets;
  j["min_correspondences"] = cfg.min_correspondences;
  j["propagation_pixel_threshold"] = cfg.propagation_pixel_threshold;
  j["dedup_radius"] = cfg.dedup_radius;
  j["matchers"] = nlohmann::json::array();
  for (const auto& m : cfg.matchers) j["matchers"].push_back(to_json(m));
  j["ransac"] = {{"threshold", cfg.ransac.threshold},
                 {"confidence", cfg.ransac.confidence},
                 {"max_iterations", cfg.ransac.max_iterations},
                 {"seed", cfg.ransac.seed}};
  j["filter_kind"] = std::string(to_string(cfg.filter_kind));
  j["filter_stage"] = cfg.filter_stage == FilterStage::PerMethod ? "per_method" : "post_fusion";
  j["augmentation"] = {{"enabled", cfg.augmentation.enabled},
                       {"max_corner_perturbation", cfg.augmentation.max_corner_perturbation},
                       {"seed", cfg.augmentation.seed}};
  j["seed"] = cfg.seed;
  j["parallelism"] = cfg.parallelism;
  j["output_dir"] = cfg.output_dir.string();
  return j;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return pipeline_config_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

std::string config_hash(const PipelineConfig& cfg) {
  nlohmann::json j = to_json(cfg);
  j.erase("parallelism");
  j.erase("output_dir");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace corrkit
