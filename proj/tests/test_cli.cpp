#include <gtest/gtest.h>

#include <cstdio>
#include <sys/wait.h>

#include "test_util.hpp"
#include "xrs/metrics.hpp"

using namespace xrs;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run run_cli(const std::string& args) {
  Run r;
  const std::string cmd = std::string(XRS_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

const char* kExperiment = R"([experiment]
name = cli
output_dir = run
[dataset]
root = data
[synth]
enabled = true
image_size = 40
train_images = 10
eval_images = 10
positive_rate = 0.4
scale = 12, 20
seed = 3
[input]
input_scale = 40
crop_scale = 32
[model]
backbone = tiny_cnn
head = plain5
[train]
learning_rate = 0.05
batch_size = 5
epochs = 1
)";

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run_cli("").code, 1);
  EXPECT_EQ(run_cli("frobnicate").code, 1);
  EXPECT_EQ(run_cli("stats").code, 1);
  EXPECT_EQ(run_cli("--help").code, 0);
  const auto r = run_cli("train");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("--config is required"), std::string::npos) << r.output;
}

TEST(Cli, BadConfigReportsTheKey) {
  test::TempDir dir("xrs_cli");
  test::write_file(dir / "bad.ini", std::string(kExperiment) + "bogus_key = 1\n");
  const auto r = run_cli("train --config " + q(dir / "bad.ini"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("bogus_key"), std::string::npos) << r.output;
}

TEST(Cli, SynthIsDeterministicAndStatsReadsIt) {
  test::TempDir dir("xrs_cli");
  test::write_file(dir / "exp.ini", kExperiment);
  ASSERT_EQ(run_cli("--config " + q(dir / "exp.ini") + " synth " + q(dir / "a")).code, 0);
  ASSERT_EQ(run_cli("--config " + q(dir / "exp.ini") + " synth " + q(dir / "b")).code, 0);
  EXPECT_EQ(test::read_file(dir / "a" / "train" / "index.csv"), test::read_file(dir / "b" / "train" / "index.csv"));
  EXPECT_EQ(test::read_file(dir / "a" / "test" / "annotations.csv"),
            test::read_file(dir / "b" / "test" / "annotations.csv"));
  ASSERT_EQ(run_cli("--seed 99 --config " + q(dir / "exp.ini") + " synth " + q(dir / "c")).code, 0);
  EXPECT_NE(test::read_file(dir / "a" / "train" / "index.csv"), test::read_file(dir / "c" / "train" / "index.csv"));

  const auto r = run_cli("--out " + q(dir / "st") + " stats " + q(dir / "a") + " --histograms");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("negative"), std::string::npos);
  EXPECT_NE(r.output.find("object scale"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "st" / "stats.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "st" / "hist_gun.csv"));
}

TEST(Cli, HistogramsWithoutAnnotationsFail) {
  test::TempDir dir("xrs_cli");
  test::write_file(dir / "ds" / "train" / "index.csv", "id,gun,knife,wrench,pliers,scissors\nx1,1,0,0,0,0\n");
  test::write_file(dir / "ds" / "train" / "images" / "x1.png", "");
  const auto plain = run_cli("--out " + q(dir / "st") + " stats " + q(dir / "ds"));
  EXPECT_EQ(plain.code, 0) << plain.output;
  const auto r = run_cli("--out " + q(dir / "st") + " stats " + q(dir / "ds") + " --histograms");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("annotations required"), std::string::npos) << r.output;
}

TEST(Cli, TrainThenEvaluateCheckpointAndScores) {
  test::TempDir dir("xrs_cli");
  test::write_file(dir / "exp.ini", kExperiment);
  const auto t = run_cli("--config " + q(dir / "exp.ini") + " --out " + q(dir / "run") + " train");
  ASSERT_EQ(t.code, 0) << t.output;
  EXPECT_NE(t.output.find("epoch   0"), std::string::npos);
  ASSERT_TRUE(std::filesystem::exists(dir / "run" / "final.ckpt"));

  const auto e = run_cli("--out " + q(dir / "ev") + " eval --checkpoint " + q(dir / "run" / "final.ckpt") +
                         " --dataset " + q(dir / "data") + " --voc11");
  ASSERT_EQ(e.code, 0) << e.output;
  EXPECT_NE(e.output.find("mAP (11-point)"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "ev" / "scores.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "ev" / "pr_gun.csv"));

  // Labels used as scores give a perfect ranking.
  const std::string oracle = test::read_file(dir / "data" / "test" / "index.csv");
  test::write_file(dir / "oracle.csv", oracle);
  const auto o = run_cli("--out " + q(dir / "ev2") + " eval --scores " + q(dir / "oracle.csv") + " --dataset " +
                         q(dir / "data"));
  ASSERT_EQ(o.code, 0) << o.output;
  EXPECT_NE(o.output.find("mAP 1.0000"), std::string::npos) << o.output;
  EXPECT_DOUBLE_EQ(read_report_json(dir / "ev2" / "metrics.json").mean_ap, 1.0);

  const auto c = run_cli("curves " + q(dir / "ev2"));
  EXPECT_EQ(c.code, 0) << c.output;
  EXPECT_TRUE(std::filesystem::exists(dir / "ev2" / "pr_curves.png"));
  EXPECT_EQ(run_cli("curves " + q(dir / "nowhere")).code, 1);
  EXPECT_EQ(run_cli("eval --dataset " + q(dir / "data")).code, 1);
}

TEST(Cli, AblateWritesTableAndFlagsFailures) {
  test::TempDir dir("xrs_cli");
  test::write_file(dir / "exp.ini", kExperiment);
  test::write_file(dir / "grid.ini",
                   "[grid]\nbase = exp.ini\n[row base]\n[row cbam]\nmodel.cbam = true\n");
  const auto r = run_cli("--config " + q(dir / "grid.ini") + " --out " + q(dir / "abl") + " ablate");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto table = test::read_file(dir / "abl" / "ablation.txt");
  EXPECT_NE(table.find("base"), std::string::npos);
  EXPECT_NE(table.find("cbam"), std::string::npos);

  test::write_file(dir / "grid2.ini", "[grid]\nbase = exp.ini\n[row ok]\n[row broken]\ntrain.eval_every = 0\n");
  const auto f = run_cli("--config " + q(dir / "grid2.ini") + " --out " + q(dir / "abl2") + " ablate");
  EXPECT_EQ(f.code, 1);
  EXPECT_NE(test::read_file(dir / "abl2" / "ablation.txt").find("failed"), std::string::npos);
}

}  // namespace
