#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <cmath>
#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "mzi/harness/config.hpp"

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = mzalign::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("mzalign_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

constexpr const char* kTinyConfig =
    "[env]\nobs_mode = vector\n[network]\nvector_width = 16\n"
    "[td3]\ntotal_steps = 300\nstart_train_step = 100\neval_every = 0\ncheckpoint_every = 0\n";

TEST_F(CliTest, ConfigErrorsExitTwo) {
  EXPECT_EQ(run({"train", "--config", write("bad.ini", "[td3]\ngamma = banana\n")}).code, 2);
  EXPECT_EQ(run({"train", "--config", write("unknown.ini", "[td3]\nnot_a_key = 1\n")}).code, 2);
  EXPECT_EQ(run({"train", "--config", path("missing.ini")}).code, 2);
  EXPECT_EQ(run({"evaluate", "--obs-mode", "pixels"}).code, 2);
  EXPECT_EQ(run({"train", "--randomization", "no-such-ablation"}).code, 2);
  EXPECT_EQ(run({"evaluate", "--episodes", "3"}).code, 2);  // no checkpoint
  EXPECT_EQ(run({"bogus"}).code, 2);
}

TEST_F(CliTest, RenderAlignedStateWritesSixteenFrames) {
  const auto r = run({"render", "--state", "0,0,0,0,0", "--out", path("render")});
  ASSERT_EQ(r.code, 0) << r.err;
  int pngs = 0;
  for (const auto& e : fs::directory_iterator(path("render"))) pngs += e.path().extension() == ".png";
  EXPECT_EQ(pngs, 16);
  std::ifstream in(path("render") + "/render.json");
  const auto info = nlohmann::json::parse(in);
  EXPECT_GT(info.at("visibility").get<double>(), 1.0 - 1e-6);
  EXPECT_GT(info.at("visibility_frames").get<double>(), 0.999);
}

TEST_F(CliTest, RenderRejectsMalformedState) {
  EXPECT_EQ(run({"render", "--state", "0,0,0", "--out", path("r")}).code, 2);
  EXPECT_EQ(run({"render", "--state", "0,x,0,0,0", "--out", path("r")}).code, 2);
}

TEST_F(CliTest, TrainEvaluateReplayRoundTrip) {
  const std::string cfg = write("tiny.ini", kTinyConfig);
  auto r = run({"train", "--config", cfg, "--seed", "5", "--out", path("train")});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(path("train/checkpoint.bin")));

  r = run({"evaluate", "--config", cfg, "--checkpoint", path("train/checkpoint.bin"), "--episodes", "2", "--seed",
           "9", "--out", path("eval")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string log = path("eval/trajectory.jsonl");
  ASSERT_TRUE(fs::exists(log));
  ASSERT_TRUE(fs::exists(path("eval/summary.json")));

  r = run({"replay", log});
  EXPECT_EQ(r.code, 0) << r.err;

  // Flip one logged action component by one ulp.
  std::ifstream in(log);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  ASSERT_GT(lines.size(), 2u);
  const std::size_t target = std::min<std::size_t>(20, lines.size() - 1);
  auto rec = nlohmann::json::parse(lines.at(target));
  auto& a = rec.at("physical_action").at(0);
  a = std::nextafter(a.get<double>(), 1.0);
  lines[target] = rec.dump();
  std::ofstream outf(path("tampered.jsonl"));
  for (const auto& l : lines) outf << l << '\n';
  outf.close();
  r = run({"replay", path("tampered.jsonl")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("line " + std::to_string(target + 1)), std::string::npos) << r.err;
}

TEST_F(CliTest, EvaluateRejectsMismatchedObservationMode) {
  const std::string cfg = write("tiny.ini", kTinyConfig);
  ASSERT_EQ(run({"train", "--config", cfg, "--out", path("train")}).code, 0);
  const auto r = run({"evaluate", "--config", cfg, "--obs-mode", "frames", "--checkpoint",
                      path("train/checkpoint.bin"), "--episodes", "1", "--out", path("eval")});
  EXPECT_EQ(r.code, 2);
}

TEST(ShippedConfigTest, ParseAndValidate) {
  const fs::path dir = fs::path(MZI_SOURCE_DIR) / "configs";
  const auto desk = mzi::harness::load_config(dir / "desk.ini");
  EXPECT_NO_THROW(desk.validate());
  EXPECT_EQ(desk.env.obs_mode, mzi::env::ObsMode::kVector);
  EXPECT_EQ(desk.train.total_steps, 100000);
  const auto full = mzi::harness::load_config(dir / "default.ini");
  EXPECT_NO_THROW(full.validate());
  EXPECT_EQ(full.env.obs_mode, mzi::env::ObsMode::kFrames);
  EXPECT_EQ(full.train.total_steps, 1000000);
}

}  // namespace
