#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gseg/ops.hpp"
#include "gseg_cli/commands.hpp"

using namespace gseg;
using namespace gseg::cli;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "gseg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::string summary_value(const fs::path& summary, const std::string& key) {
  std::istringstream in(slurp(summary));
  std::string line;
  while (std::getline(in, line))
    if (line.starts_with(key + ",")) return line.substr(key.size() + 1);
  return {};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("gseg_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, GradcheckTensorOpsExitsZero) {
  auto r = invoke({"gradcheck", "--scope", "tensor_ops", "--seeds", "2", "--out", dir_.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.starts_with("op,max_rel_err,samples\n"));
  EXPECT_EQ(lines(r.out), gradcheck_cases(GradScope::tensor_ops).size() + 1);
  EXPECT_EQ(slurp(dir_ / "gradcheck.csv"), r.out);
}

TEST_F(CliTest, GradcheckFaultInjectionNamesTheOp) {
  GradCase broken{"broken_square", GradScope::tensor_ops, [](std::uint64_t seed, const GradCheckOptions& o) {
                    std::vector<Tensor> in{Tensor::from_data({3}, {0.5, -1.0, 2.0}, true)};
                    return check_gradients("broken_square", in,
                                           [&] { return sum(hadamard(in[0], in[0].detach())); }, o, seed);
                  }};
  std::vector<GradCase> cases = gradcheck_cases(GradScope::tensor_ops);
  cases.push_back(broken);
  std::ostringstream out, err;
  EXPECT_EQ(cmd_gradcheck(RunConfig{}, GradcheckArgs{GradScope::tensor_ops, 1, 100}, cases, out, err), 1);
  EXPECT_NE(err.str().find("broken_square"), std::string::npos) << err.str();
  EXPECT_EQ(err.str().find("matmul"), std::string::npos);
}

TEST_F(CliTest, TrainWritesArtifactsAndIsReproducible) {
  const auto a = dir_ / "a", b = dir_ / "b";
  auto ra = invoke({"train", "--out", a.string(), "--override", "steps=40", "--seed", "3"});
  ASSERT_EQ(ra.code, 0) << ra.err;
  for (auto f : {"model.wgts", "loss_curve.csv", "metrics.csv", "summary.csv", "config.txt"})
    EXPECT_TRUE(fs::exists(a / f)) << f;
  EXPECT_EQ(lines(slurp(a / "loss_curve.csv")), 41u);
  EXPECT_TRUE(slurp(a / "metrics.csv").starts_with("class_id,iou\n"));
  auto rb = invoke({"train", "--out", b.string(), "--override", "steps=40", "--seed", "3"});
  ASSERT_EQ(rb.code, 0) << rb.err;
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "model.wgts"), slurp(b / "model.wgts"));
  EXPECT_EQ(summary_value(a / "summary.csv", "param_count"), "7347");
}

TEST_F(CliTest, DisablingGtDropsItsParameters) {
  auto full = invoke({"train", "--out", (dir_ / "full").string(), "--override", "steps=1"});
  auto no_gt = invoke({"train", "--out", (dir_ / "nogt").string(), "--override", "steps=1", "--override",
                    "enable_gt=false"});
  ASSERT_EQ(full.code, 0) << full.err;
  ASSERT_EQ(no_gt.code, 0) << no_gt.err;
  const long a = std::stol(summary_value(dir_ / "full" / "summary.csv", "param_count"));
  const long b = std::stol(summary_value(dir_ / "nogt" / "summary.csv", "param_count"));
  EXPECT_EQ(a - b, 642);
}

TEST_F(CliTest, ConfigFileAndInvalidConfigs) {
  std::ofstream(dir_ / "ok.cfg") << "steps = 2\nchannels = 8\nr_gr = 8\nr_lr = 8\nr_ba = 8\n";
  auto ok = invoke({"train", "--config", (dir_ / "ok.cfg").string(), "--out", (dir_ / "run").string()});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(slurp(dir_ / "run" / "config.txt").find("channels = 8"), std::string::npos);

  std::ofstream(dir_ / "bad.cfg") << "r_gr = 32\n";
  auto bad = invoke({"train", "--config", (dir_ / "bad.cfg").string(), "--out", (dir_ / "bad").string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("r_gr"), std::string::npos) << bad.err;
  EXPECT_EQ(invoke({"train", "--override", "bogus=1"}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST_F(CliTest, EvalReproducesTrainMetrics) {
  ASSERT_EQ(invoke({"train", "--out", dir_.string(), "--override", "steps=20"}).code, 0);
  auto r = invoke({"eval", "--checkpoint", (dir_ / "model.wgts").string(), "--out", (dir_ / "eval").string(),
                "--override", "steps=20"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("miou="), std::string::npos);
  EXPECT_EQ(slurp(dir_ / "eval" / "metrics.csv"), slurp(dir_ / "metrics.csv"));
  auto mismatch = invoke({"eval", "--checkpoint", (dir_ / "model.wgts").string(), "--override", "enable_ba=false"});
  EXPECT_EQ(mismatch.code, 1);
}

TEST_F(CliTest, EvalOnExportedData) {
  ASSERT_EQ(invoke({"train", "--out", dir_.string(), "--override", "steps=5", "--export-data", (dir_ / "data").string()})
                .code,
            0);
  EXPECT_TRUE(fs::exists(dir_ / "data" / "test"));
  auto r = invoke({"eval", "--checkpoint", (dir_ / "model.wgts").string(), "--data", (dir_ / "data" / "test").string()});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, AblationRowCounts) {
  for (auto [axis, rows] : std::vector<std::pair<std::string, std::size_t>>{{"theta", 5}, {"fusion", 3}, {"components", 4}}) {
    auto r = invoke({"ablate", "--axis", axis, "--override", "steps=1", "--out", dir_.string()});
    ASSERT_EQ(r.code, 0) << axis << r.err;
    EXPECT_TRUE(r.out.starts_with("axis,setting,miou,boundary_acc,param_count,status\n"));
    EXPECT_EQ(lines(r.out), rows + 1) << axis;
    EXPECT_EQ(slurp(dir_ / ("ablate_" + axis + ".csv")), r.out);
  }
  auto ratio = invoke({"ablate", "--axis", "ratio", "--override", "steps=1"});
  EXPECT_EQ(ratio.code, 0);
  EXPECT_NE(ratio.out.find("config_error"), std::string::npos);
  EXPECT_EQ(invoke({"ablate", "--axis", "colour"}).code, 2);
}

TEST_F(CliTest, BenchReportsZeroDifference) {
  auto r = invoke({"bench", "--k", "2,4", "--d", "2,8", "--c", "1,0.25", "--reps", "2", "--out", dir_.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.starts_with("K,D,c,dense_ms,sparse_ms,max_abs_diff\n"));
  EXPECT_EQ(lines(r.out), 9u);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) EXPECT_TRUE(line.ends_with(",0")) << line;
  EXPECT_TRUE(fs::exists(dir_ / "bench_stddev.csv"));
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string exe = GSEG_CLI_PATH;
  EXPECT_EQ(std::system((exe + " gradcheck --scope ba --seeds 1 > /dev/null").c_str()), 0);
  const int bad = std::system((exe + " train --override r_ba=5 > /dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(bad));
  EXPECT_EQ(WEXITSTATUS(bad), 2);
}
