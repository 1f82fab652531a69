#include <map>

#include <Eigen/Geometry>

#include "corrkit/benchmark.hpp"
#include "corrkit/image.hpp"
#include "corrkit/interchange.hpp"

namespace corrkit {

namespace {

using nlohmann::json;

class DepthCache {
 public:
  explicit DepthCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::shared_ptr<const DepthMap> get(const std::string& rel) {
    auto it = maps_.find(rel);
    if (it == maps_.end()) it = maps_.emplace(rel, std::make_shared<DepthMap>(read_depth(dir_ / rel))).first;
    return it->second;
  }

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::shared_ptr<const DepthMap>> maps_;
};

EvalFrame frame_from_json(const json& j, const std::string& dataset, int index, const std::filesystem::path& dir,
                          DepthCache& depths) {
  EvalFrame f;
  const std::string image = j.value("image", std::string());
  f.id = {dataset, j.value("index", index)};
  if (!image.empty()) f.image = dir / image;
  if (j.contains("depth") && !j.at("depth").is_null()) {
    f.depth_path = j.at("depth").get<std::string>();
    f.depth = depths.get(f.depth_path.string());
  }

  ImageBounds size;
  if (j.contains("size")) {
    size = {j.at("size").at(0).get<int>(), j.at("size").at(1).get<int>()};
  } else if (f.depth) {
    size = {f.depth->width, f.depth->height};
  } else if (!f.image.empty()) {
    size = read_pgm_size(f.image);
  } else {
    throw Error(ErrorCode::ParseError, "frame needs a size, depth or image");
  }
  const auto k = j.at("K").get<std::vector<double>>();
  if (k.size() != 4) throw Error(ErrorCode::ParseError, "K must be [fx, fy, cx, cy]");
  f.k = {k[0], k[1], k[2], k[3], size.width, size.height};
  f.k.validate();

  const auto q = j.at("pose").at("q").get<std::vector<double>>();
  const auto t = j.at("pose").at("t").get<std::vector<double>>();
  if (q.size() != 4 || t.size() != 3) throw Error(ErrorCode::ParseError, "pose needs q[4] (w, x, y, z) and t[3]");
  f.pose.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized().toRotationMatrix();
  f.pose.translation = Vec3(t[0], t[1], t[2]);
  return f;
}

json frame_to_json(const EvalFrame& f, const std::filesystem::path& dir) {
  json j;
  j["index"] = f.id.index;
  j["image"] = f.image.empty() ? std::string() : std::filesystem::relative(f.image, dir).generic_string();
  j["K"] = {f.k.fx, f.k.fy, f.k.cx, f.k.cy};
  j["size"] = {f.k.width, f.k.height};
  const Eigen::Quaterniond q(f.pose.rotation);
  j["pose"] = {{"q", {q.w(), q.x(), q.y(), q.z()}},
               {"t", {f.pose.translation.x(), f.pose.translation.y(), f.pose.translation.z()}}};
  j["depth"] = f.depth_path.empty() ? json(nullptr) : json(f.depth_path.generic_string());
  return j;
}

}  // namespace

EvalDataset load_eval_dataset(const std::filesystem::path& dir) {
  EvalDataset ds;
  ds.dir = dir;
  json j;
  try {
    j = json::parse(read_text_file(dir / "pairs.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, (dir / "pairs.json").string() + ": " + e.what());
  }
  auto name_source = dir;
  if (name_source.filename().empty()) name_source = name_source.parent_path();
  ds.name = j.value("name", name_source.filename().string());
  DepthCache depths(dir);
  try {
    int n = 0;
    for (const auto& p : j.at("pairs")) {
      EvalPair pair;
      pair.dataset = ds.name;
      pair.id = p.value("id", std::to_string(n));
      pair.a = frame_from_json(p.at("a"), ds.name, 2 * n, dir, depths);
      pair.b = frame_from_json(p.at("b"), ds.name, 2 * n + 1, dir, depths);
      if (p.contains("overlap") && !p.at("overlap").is_null()) {
        pair.overlap_ratio = p.at("overlap").get<double>();
      } else if (pair.a.depth && pair.b.depth) {
        pair.overlap_ratio = overlap_ratio(pair.a, pair.b);
      }
      pair.bin = overlap_bin(pair.overlap_ratio);
      ds.pairs.push_back(std::move(pair));
      ++n;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, (dir / "pairs.json").string() + ": " + e.what());
  }
  return ds;
}

void save_eval_dataset(const EvalDataset& dataset) {
  json j;
  j["name"] = dataset.name;
  j["pairs"] = json::array();
  for (const auto& p : dataset.pairs) {
    json e;
    e["id"] = p.id;
    e["a"] = frame_to_json(p.a, dataset.dir);
    e["b"] = frame_to_json(p.b, dataset.dir);
    e["overlap"] = p.overlap_ratio >= 0.0 ? json(p.overlap_ratio) : json(nullptr);
    j["pairs"].push_back(std::move(e));
  }
  std::filesystem::create_directories(dataset.dir);
  write_text_file_atomic(dataset.dir / "pairs.json", j.dump(2) + "\n");
}

}  // namespace corrkit
