#include <algorithm>
#include <cstdio>

#include "corrkit/interchange.hpp"
#include "corrkit/pipeline.hpp"

namespace corrkit {

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kPartialMarker = "MANIFEST_PARTIAL";

std::string pair_file(const TrainingPair& p) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "_%08d_%08d.corrs", p.frame_a.index, p.frame_b.index);
  return "pairs/" + p.frame_a.video + buf;
}

nlohmann::json homography_json(const std::optional<Homography>& h) {
  if (!h) return nullptr;
  const Mat3 n = h->normalized_matrix();
  nlohmann::json out = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.push_back(n(r, c));
  }
  return out;
}

std::optional<Homography> homography_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  const auto e = j.get<std::vector<double>>();
  if (e.size() != 9) throw Error(ErrorCode::ParseError, "augmentation homography needs 9 numbers");
  Mat3 m;
  m << e[0], e[1], e[2], e[3], e[4], e[5], e[6], e[7], e[8];
  return Homography(m);
}

}  // namespace

nlohmann::json emit_dataset(std::span<const TrainingPair> pairs, const std::filesystem::path& output_dir,
                            const PipelineConfig& cfg) {
  std::vector<const TrainingPair*> order;
  for (const auto& p : pairs) order.push_back(&p);
  std::sort(order.begin(), order.end(), [](const TrainingPair* x, const TrainingPair* y) {
    return std::tie(x->frame_a, x->frame_b) < std::tie(y->frame_a, y->frame_b);
  });

  nlohmann::json manifest;
  manifest["config_hash"] = config_hash(cfg);
  manifest["pairs"] = nlohmann::json::array();
  try {
    std::filesystem::create_directories(output_dir / "pairs");
    std::filesystem::remove(output_dir / kPartialMarker);
    for (const TrainingPair* p : order) {
      const std::string file = pair_file(*p);
      write_corrs(output_dir / file, p->correspondences);
      nlohmann::json entry;
      entry["video"] = p->frame_a.video;
      entry["frame_a"] = p->frame_a.index;
      entry["frame_b"] = p->frame_b.index;
      entry["interval"] = p->interval();
      entry["count"] = p->correspondences.size();
      entry["file"] = file;
      entry["size_a"] = {p->size_a.width, p->size_a.height};
      entry["size_b"] = {p->size_b.width, p->size_b.height};
      entry["augment_a"] = homography_json(p->augment_a);
      entry["augment_b"] = homography_json(p->augment_b);
      entry["provenance"] = {{"sources", p->provenance}, {"propagation_rounds", p->propagation_rounds}};
      entry["flags"] = p->flags;
      manifest["pairs"].push_back(std::move(entry));
    }
    write_text_file_atomic(output_dir / kManifest, manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::error_code ec;
    std::filesystem::create_directories(output_dir, ec);
    try {
      write_text_file_atomic(output_dir / kPartialMarker, std::string(e.what()) + "\n");
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::IoError, std::string("dataset emission failed: ") + e.what());
  }
  return manifest;
}

std::vector<TrainingPair> load_dataset(const std::filesystem::path& dir) {
  if (std::filesystem::exists(dir / kPartialMarker)) {
    throw Error(ErrorCode::IoError, dir.string() + " holds a partial dataset");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir / kManifest));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, "manifest: " + std::string(e.what()));
  }
  std::vector<TrainingPair> out;
  try {
    for (const auto& entry : manifest.at("pairs")) {
      TrainingPair p;
      p.size_a = {entry.at("size_a").at(0).get<int>(), entry.at("size_a").at(1).get<int>()};
      p.size_b = {entry.at("size_b").at(0).get<int>(), entry.at("size_b").at(1).get<int>()};
      p.correspondences = read_corrs(dir / entry.at("file").get<std::string>(), p.size_a, p.size_b);
      p.frame_a = p.correspondences.frame_a;
      p.frame_b = p.correspondences.frame_b;
      p.augment_a = homography_from_json(entry.at("augment_a"));
      p.augment_b = homography_from_json(entry.at("augment_b"));
      const auto& prov = entry.at("provenance");
      p.provenance = prov.at("sources").get<std::map<std::string, std::size_t>>();
      p.propagation_rounds = prov.at("propagation_rounds").get<int>();
      p.flags = entry.at("flags").get<std::vector<std::string>>();
      out.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, "manifest: " + std::string(e.what()));
  }
  return out;
}

}  // namespace corrkit
