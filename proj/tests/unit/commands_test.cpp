#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "cavit/binary_io.hpp"
#include "cavit/commands.hpp"
#include "cavit/errors.hpp"

namespace fs = std::filesystem;
using cavit::RunConfig;
using cavit::Source;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("cavit_cmd_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RunConfig small_run(const fs::path& dir) {
  RunConfig rc;
  rc.out = dir;
  rc.data = dir / "bars.cavd";
  rc.synthetic_count = 40;
  rc.train.epochs = 1;
  return rc;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CAVIT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Commands, CountReportsPaperBaselineNearPublishedSize) {
  TempDir tmp("count");
  RunConfig rc;
  rc.out = tmp.path;
  rc.model = cavit::ModelConfig::paper_scale(cavit::Variant::kBaselineVit);
  std::ostringstream out;
  EXPECT_EQ(cavit::cmd_count(rc, {}, out), 0);
  EXPECT_NE(out.str().find("5717416"), std::string::npos) << out.str();
  EXPECT_TRUE(fs::exists(tmp.path / "cost_baseline_vit.csv"));
}

TEST(Commands, GradcheckPassesOnSmallConfig) {
  RunConfig rc;
  rc.model = cavit::ModelConfig::gradcheck(cavit::Variant::kCavit);
  std::ostringstream out;
  EXPECT_EQ(cavit::cmd_gradcheck(rc, {}, out), 0) << out.str();
  EXPECT_EQ(cavit::cmd_gradcheck(rc, {0.0}, out), 1);
}

TEST(Commands, GenerateTrainEvaluate) {
  TempDir tmp("flow");
  auto rc = small_run(tmp.path);
  std::ostringstream out;
  EXPECT_EQ(cavit::cmd_gen_data(rc, out), 0);
  EXPECT_EQ(cavit::load_dataset(rc.data).count, 40u);
  EXPECT_EQ(cavit::cmd_train(rc, out), 0);
  for (auto* f : {"history.csv", "config.txt", "best.cavt"})
    EXPECT_TRUE(fs::exists(tmp.path / f)) << f;
  EXPECT_EQ(cavit::cmd_eval(rc, out), 0);
  cavit::AttnmapOptions opts;
  EXPECT_EQ(cavit::cmd_attnmap(rc, opts, out), 0);
  EXPECT_TRUE(fs::exists(tmp.path / "attn_0_b1.pgm"));
  EXPECT_TRUE(fs::exists(tmp.path / "attn_0_b1_x8.pgm"));
  EXPECT_TRUE(fs::exists(tmp.path / "attn_0_b1.csv"));
}

TEST(Commands, AblationWritesOneRowPerVariant) {
  TempDir tmp("ablate");
  auto rc = small_run(tmp.path);
  std::ostringstream out;
  cavit::cmd_gen_data(rc, out);
  EXPECT_EQ(cavit::cmd_ablate(rc, {}, out), 0);
  std::ifstream in(tmp.path / "ablation.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "variant,accuracy,params,flops");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream fields(line);
    std::string variant, acc, params, flops;
    std::getline(fields, variant, ',');
    std::getline(fields, acc, ',');
    std::getline(fields, params, ',');
    std::getline(fields, flops, ',');
    EXPECT_GT(std::stoull(params), 0u) << line;
    EXPECT_GT(std::stoull(flops), 0u) << line;
  }
  EXPECT_EQ(rows, 5u);
}

TEST(Commands, MissingDataIsAnIoError) {
  TempDir tmp("missing");
  auto rc = small_run(tmp.path);
  std::ostringstream out;
  EXPECT_THROW(cavit::cmd_train(rc, out), cavit::IoError);
}

TEST(Cli, ExitCodes) {
  TempDir tmp("cli");
  const std::string dir = tmp.path.string();
  EXPECT_EQ(run_cli("count -o " + dir), 0);
  EXPECT_EQ(run_cli("count --set nonsense=1"), 2);
  EXPECT_EQ(run_cli("count --no-such-flag"), 2);
  EXPECT_EQ(run_cli("eval -o " + dir + " --set data=" + dir + "/absent.cavd"), 1);
}
