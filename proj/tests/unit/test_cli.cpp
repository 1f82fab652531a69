#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "corrkit/benchmark.hpp"
#include "corrkit/image.hpp"
#include "corrkit/interchange.hpp"
#include "scenes.hpp"

using namespace corrkit;
using namespace corrkit::testing;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CORRKIT_CLI_PATH) + " --log-level off " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = temp_dir("cli"); }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }
  std::filesystem::path dir_;
};

}  // namespace

TEST_F(Cli, UsageAndConfigErrors) {
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("label"), 2);
  std::ofstream(path("bad.json")) << "{\"frame_interval\": -3}";
  write_translation_video(dir_ / "clip", 3, {32, 24}, {0.1, 0.0}, false);
  EXPECT_EQ(run_cli("label --frames " + path("clip") + " --config " + path("bad.json") + " --out " + path("o")), 2);
  EXPECT_EQ(run_cli("label --frames " + path("clip") + " --matcher quantum:x --out " + path("o")), 2);
  EXPECT_EQ(run_cli("evaluate --dataset " + path("nowhere")), 2);
}

TEST_F(Cli, IoErrors) {
  EXPECT_EQ(run_cli("label --frames " + path("missing") + " --matcher synthetic:s --out " + path("o")), 4);
  EXPECT_EQ(run_cli("propagate --base " + path("missing") + " --out " + path("o")), 4);
  EXPECT_EQ(run_cli("rank --reports " + path("missing.json")), 4);
}

TEST_F(Cli, LabelPropagateAugment) {
  write_translation_video(dir_ / "clip", 81, {64, 48}, {0.05, 0.0}, false);
  const std::string common =
      " --matcher synthetic:lattice,grid_spacing=4 --min-corrs 20 --filter-kind homography --no-augment";
  ASSERT_EQ(run_cli("label --frames " + path("clip") + " --out " + path("out") + common), 0);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "out" / "manifest.json"));
  ASSERT_EQ(run_cli("propagate --base " + path("out/base") + " --out " + path("again") + common), 0);
  EXPECT_EQ(read_text_file(dir_ / "out" / "manifest.json"), read_text_file(dir_ / "again" / "manifest.json"));
  ASSERT_EQ(run_cli("augment --in " + path("out") + " --out " + path("aug") + " --min-corrs 20"), 0);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "aug" / "manifest.json"));
}

TEST_F(Cli, MatcherFailuresArePartial) {
  // Frames without ground truth: the synthetic matcher fails on every pair.
  write_translation_video(dir_ / "clip", 41, {32, 24}, {0.05, 0.0}, false);
  std::filesystem::remove(dir_ / "clip" / "ground_truth.json");
  EXPECT_EQ(run_cli("label --frames " + path("clip") + " --matcher synthetic:s --out " + path("out")), 3);
}

TEST_F(Cli, EvaluateAndRank) {
  Rng rng(2);
  EvalDataset ds;
  ds.name = "toy";
  ds.dir = dir_ / "toy";
  std::filesystem::create_directories(ds.dir);
  for (int i = 0; i < 4; ++i) {
    auto p = depth_scene_pair(rng, 15.0, "p" + std::to_string(i), {96, 72});
    const std::string depth = "d" + std::to_string(i) + ".depth";
    write_depth(ds.dir / depth, *p.a.depth);
    p.a.depth_path = depth;
    ds.pairs.push_back(p);
  }
  save_eval_dataset(ds);
  ASSERT_EQ(run_cli("evaluate --dataset " + path("toy") + " --method synthetic:oracle,count=300 --method "
                    "synthetic:noisy,count=300,outlier_rate=0.5,noise_sigma=1 --ransac-threshold 1 --report " +
                    path("r.json")),
            0);
  const auto records = report_from_json(nlohmann::json::parse(read_text_file(dir_ / "r.json")));
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].n_pairs, 4u);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "r.json.txt"));
  EXPECT_EQ(run_cli("rank --reports " + path("r.json")), 0);
}
