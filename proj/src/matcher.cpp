#include "corrkit/matcher.hpp"

#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "corrkit/interchange.hpp"

namespace corrkit {

std::string_view to_string(MatchStatus status) {
  switch (status) {
    case MatchStatus::Ok: return "ok";
    case MatchStatus::EmptyImage: return "EmptyImage";
    case MatchStatus::NoKeypoints: return "NoKeypoints";
    case MatchStatus::ProcessFailure: return "ProcessFailure";
    case MatchStatus::Timeout: return "Timeout";
    case MatchStatus::ParseError: return "ParseError";
    case MatchStatus::MissingGroundTruth: return "MissingGroundTruth";
  }
  return "unknown";
}

void MatcherSpec::validate() const {
  if (name.empty()) throw Error(ErrorCode::ConfigError, "matcher name must not be empty");
  for (char c : name) {
    if (c == ' ' || c == '\t' || c == '\n') throw Error(ErrorCode::ConfigError, "matcher name must be whitespace-free");
  }
  switch (kind) {
    case MatcherKind::Builtin: {
      const auto& p = std::get<BuiltinParams>(params);
      if (p.patch_size < 3 || p.patch_size % 2 == 0) throw Error(ErrorCode::ConfigError, "patch_size must be odd and >= 3");
      if (!(p.ratio > 0.0 && p.ratio <= 1.0)) throw Error(ErrorCode::ConfigError, "ratio must be in (0,1]");
      if (p.max_keypoints < 1 || p.nms_radius < 0 || p.window_radius < 1) {
        throw Error(ErrorCode::ConfigError, "invalid builtin detector parameters");
      }
      break;
    }
    case MatcherKind::Synthetic: {
      const auto& p = std::get<SyntheticParams>(params);
      if (!(p.outlier_rate >= 0.0 && p.outlier_rate <= 1.0)) throw Error(ErrorCode::ConfigError, "outlier_rate must be in [0,1]");
      if (!(p.noise_sigma >= 0.0) || !(p.grid_spacing >= 0.0) || !(p.outlier_min_violation >= 0.0)) {
        throw Error(ErrorCode::ConfigError, "synthetic parameters must be non-negative");
      }
      break;
    }
    case MatcherKind::External: {
      const auto& p = std::get<ExternalParams>(params);
      for (const char* ph : {"{image_a}", "{image_b}", "{out}"}) {
        if (p.command.find(ph) == std::string::npos) {
          throw Error(ErrorCode::ConfigError, std::string("external command lacks placeholder ") + ph);
        }
      }
      if (!(p.timeout_seconds > 0.0)) throw Error(ErrorCode::ConfigError, "timeout must be positive");
      break;
    }
  }
}

namespace {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

MatcherSpec matcher_spec_from_json(const nlohmann::json& j) {
  MatcherSpec spec;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    spec.name = j.value("name", kind);
    const nlohmann::json p = j.value("params", nlohmann::json::object());
    if (kind == "builtin") {
      spec.kind = MatcherKind::Builtin;
      BuiltinParams b;
      read_opt(p, "harris_k", b.harris_k);
      read_opt(p, "nms_radius", b.nms_radius);
      read_opt(p, "max_keypoints", b.max_keypoints);
      read_opt(p, "patch_size", b.patch_size);
      read_opt(p, "ratio", b.ratio);
      read_opt(p, "quality", b.quality);
      read_opt(p, "window_radius", b.window_radius);
      spec.params = b;
    } else if (kind == "synthetic") {
      spec.kind = MatcherKind::Synthetic;
      SyntheticParams s;
      read_opt(p, "count", s.count);
      read_opt(p, "outlier_rate", s.outlier_rate);
      read_opt(p, "noise_sigma", s.noise_sigma);
      read_opt(p, "seed", s.seed);
      read_opt(p, "grid_spacing", s.grid_spacing);
      read_opt(p, "outlier_min_violation", s.outlier_min_violation);
      spec.params = s;
    } else if (kind == "external") {
      spec.kind = MatcherKind::External;
      ExternalParams e;
      read_opt(p, "command", e.command);
      std::string wd;
      read_opt(p, "working_dir", wd);
      e.working_dir = wd;
      read_opt(p, "timeout_seconds", e.timeout_seconds);
      spec.params = e;
    } else {
      throw Error(ErrorCode::ConfigError, "unknown matcher kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("matcher spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const MatcherSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  switch (spec.kind) {
    case MatcherKind::Builtin: {
      const auto& b = std::get<BuiltinParams>(spec.params);
      j["kind"] = "builtin";
      j["params"] = {{"harris_k", b.harris_k},     {"nms_radius", b.nms_radius},
                     {"max_keypoints", b.max_keypoints}, {"patch_size", b.patch_size},
                     {"ratio", b.ratio},           {"quality", b.quality},
                     {"window_radius", b.window_radius}};
      break;
    }
    case MatcherKind::Synthetic: {
      const auto& s = std::get<SyntheticParams>(spec.params);
      j["kind"] = "synthetic";
      j["params"] = {{"count", s.count},
                     {"outlier_rate", s.outlier_rate},
                     {"noise_sigma", s.noise_sigma},
                     {"seed", s.seed},
                     {"grid_spacing", s.grid_spacing},
                     {"outlier_min_violation", s.outlier_min_violation}};
      break;
    }
    case MatcherKind::External: {
      const auto& e = std::get<ExternalParams>(spec.params);
      j["kind"] = "external";
      j["params"] = {{"command", e.command},
                     {"working_dir", e.working_dir.string()},
                     {"timeout_seconds", e.timeout_seconds}};
      break;
    }
  }
  return j;
}

MatcherSpec parse_matcher_spec(const std::string& text) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(text, ec)) {
    try {
      return matcher_spec_from_json(nlohmann::json::parse(read_text_file(text)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConfigError, "matcher spec file " + text + ": " + e.what());
    }
  }
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorCode::ConfigError, "matcher spec must be a JSON file or <kind>:<name>[,key=value...]");
  }
  nlohmann::json j;
  j["kind"] = text.substr(0, colon);
  nlohmann::json params = nlohmann::json::object();
  std::string rest = text.substr(colon + 1);
  std::size_t pos = 0;
  bool first = true;
  while (pos <= rest.size()) {
    const auto comma = rest.find(',', pos);
    const std::string item = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (first) {
      j["name"] = item;
      first = false;
    } else if (!item.empty()) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "expected key=value, got '" + item + "'");
      const std::string key = item.substr(0, eq);
      const std::string value = item.substr(eq + 1);
      // Numbers stay numbers, anything else is a string.
      try {
        params[key] = nlohmann::json::parse(value);
        if (!params[key].is_number()) params[key] = value;
      } catch (const nlohmann::json::exception&) {
        params[key] = value;
      }
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  j["params"] = params;
  return matcher_spec_from_json(j);
}

GrayImage load_image(const FrameSource& frame) {
  if (frame.image) return *frame.image;
  if (frame.path.empty()) throw Error(ErrorCode::IoError, "frame " + frame.id.to_string() + " has no image");
  return read_pgm(frame.path);
}


std::optional<Vec2> ground_truth_transfer(const GroundTruth& gt, const Vec2& pa) {
  if (const auto* h = std::get_if<Homography>(&gt)) {
    try {
      return apply_homography(*h, pa);
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  const auto& t = std::get<DepthPoseTruth>(gt);
  if (!t.depth_a) return std::nullopt;
  const auto d = sample_depth_bilinear(*t.depth_a, pa);
  if (!d) return std::nullopt;
  const Vec3 xa = unproject(t.k_a, *d, pa);
  const Vec3 xb = relative_pose(t.pose_a, t.pose_b).apply(xa);
  if (!(xb.z() > 0.0)) return std::nullopt;
  return project(t.k_b, xb);
}

double ground_truth_violation(const GroundTruth& gt, const Vec2& pa, const Vec2& pb) {
  if (const auto* h = std::get_if<Homography>(&gt)) {
    try {
      return (apply_homography(*h, pa) - pb).norm();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  }
  const auto& t = std::get<DepthPoseTruth>(gt);
  const Pose rel = relative_pose(t.pose_a, t.pose_b);
  if (rel.translation.norm() < 1e-12) {
    // Pure rotation: the relation is the infinite homography.
    const Mat3 h = t.k_b.matrix() * rel.rotation * t.k_a.inverse_matrix();
    return (apply_homography(h, pa) - pb).norm();
  }
  const Mat3 f = t.k_b.inverse_matrix().transpose() * skew(rel.translation) * rel.rotation *
                 t.k_a.inverse_matrix();
  return std::sqrt(sampson_distance(f, pa, pb));
}

MatchOutcome run_matcher(const MatcherSpec& spec, const FrameSource& a, const FrameSource& b,
                         const GroundTruth* gt) {
  MatchOutcome out;
  switch (spec.kind) {
    case MatcherKind::Builtin:
      out = match_builtin(a, b, std::get<BuiltinParams>(spec.params), spec.name);
      break;
    case MatcherKind::Synthetic:
      if (gt == nullptr) {
        out.status = MatchStatus::MissingGroundTruth;
        out.message = "synthetic matcher needs ground truth";
        break;
      }
      out = match_synthetic(a, b, *gt, std::get<SyntheticParams>(spec.params), spec.name);
      break;
    case MatcherKind::External:
      out = match_external(a, b, std::get<ExternalParams>(spec.params), spec.name);
      break;
  }
  out.set.frame_a = a.id;
  out.set.frame_b = b.id;
  std::vector<Match> kept;
  std::vector<bool> kept_outliers;
  kept.reserve(out.set.size());
  const bool track = out.planted_outliers.size() == out.set.size() && !out.planted_outliers.empty();
  for (std::size_t i = 0; i < out.set.size(); ++i) {
    const Match& m = out.set.matches[i];
    const bool inside = m.pa.x() >= 0.0 && m.pa.y() >= 0.0 && m.pa.x() < a.size.width &&
                        m.pa.y() < a.size.height && m.pb.x() >= 0.0 && m.pb.y() >= 0.0 &&
                        m.pb.x() < b.size.width && m.pb.y() < b.size.height &&
                        m.confidence >= 0.0 && m.confidence <= 1.0;
    if (!inside) {
      ++out.dropped_out_of_bounds;
      continue;
    }
    kept.push_back(m);
    if (track) kept_outliers.push_back(out.planted_outliers[i]);
  }
  if (out.dropped_out_of_bounds > 0) {
    spdlog::warn("matcher {} on {}->{}: dropped {} out-of-bounds matches", spec.name,
                 a.id.to_string(), b.id.to_string(), out.dropped_out_of_bounds);
  }
  out.set.matches = std::move(kept);
  if (track) out.planted_outliers = std::move(kept_outliers);
  return out;
}

}  // namespace corrkit
