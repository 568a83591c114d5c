#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "pnp/datagen.hpp"
#include "pnp/errors.hpp"
#include "pnp_cli/commands.hpp"
#include "pnp_cli/run_config.hpp"

namespace fs = std::filesystem;
using namespace pnp::cli;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("pnp_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int call(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run(args, out_, err_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
  std::ostringstream out_, err_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_F(Cli, GenWritesDatasetAndManifest) {
  const auto data = path("d.gcd");
  ASSERT_EQ(call({"gen", "--classes", "10", "--old", "5", "--per-class", "100", "--dim", "32",
                  "--seed", "1", "-o", data}),
            kExitOk)
      << err_.str();
  const auto ds = pnp::load_dataset(data);
  EXPECT_EQ(ds.num_labelled(), 250u);
  EXPECT_EQ(ds.num_unlabelled(), 750u);
  EXPECT_TRUE(fs::exists(manifest_path(data)));
  const auto first = slurp(data);
  ASSERT_EQ(call({"gen", "--classes", "10", "--old", "5", "--per-class", "100", "--dim", "32",
                  "--seed", "1", "-o", data}),
            kExitOk);
  EXPECT_EQ(slurp(data), first);
}

TEST_F(Cli, MissingRequiredFlagIsUsageError) {
  EXPECT_EQ(call({"gen", "--classes", "10"}), kExitUsage);
  EXPECT_EQ(call({"frobnicate"}), kExitUsage);
  EXPECT_EQ(call({}), kExitUsage);
}

TEST_F(Cli, HelpExitsCleanly) {
  EXPECT_EQ(call({"--help"}), kExitOk);
  EXPECT_NE(out_.str().find("train"), std::string::npos);
}

TEST_F(Cli, TrainWritesRunDirectory) {
  const auto data = path("d.gcd");
  ASSERT_EQ(call({"gen", "--classes", "6", "--old", "3", "--per-class", "30", "--dim", "8", "-o", data}), kExitOk);
  const auto run_dir = dir_ / "run";
  ASSERT_EQ(call({"train", "--data", data, "-o", run_dir.string(), "--epochs", "3", "--seed", "7",
                  "--checkpoint-every", "2", "--ablate", "no-pp", "-q"}),
            kExitOk)
      << err_.str();
  EXPECT_TRUE(fs::exists(run_dir / kConfigFile));
  EXPECT_TRUE(fs::exists(run_dir / kCheckpointDir / kFinalCheckpoint));
  EXPECT_TRUE(fs::exists(run_dir / kCheckpointDir / epoch_checkpoint_name(2)));
  EXPECT_TRUE(fs::exists(run_dir / kReportFile));
  std::ifstream metrics(run_dir / kMetricsFile);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(metrics, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("k_est"));
    EXPECT_TRUE(j.contains("cluster_ms"));
    ++lines;
  }
  EXPECT_EQ(lines, 3u);
  const auto config = slurp(run_dir / kConfigFile);
  EXPECT_NE(config.find("use_potential_prototypes=false"), std::string::npos);
  EXPECT_NE(config.find("seed=7"), std::string::npos);

  ASSERT_EQ(call({"eval", "--data", data, "--run", run_dir.string(), "--sweep", "k=5,10"}), kExitOk)
      << err_.str();
  EXPECT_NE(out_.str().find("k_est"), std::string::npos);
}

TEST_F(Cli, UnknownConfigKeyIsUsageError) {
  const auto data = path("d.gcd");
  ASSERT_EQ(call({"gen", "--classes", "4", "--old", "2", "--per-class", "10", "--dim", "4", "-o", data}), kExitOk);
  EXPECT_EQ(call({"train", "--data", data, "-o", path("r"), "--set", "bogus=1"}), kExitUsage);
  EXPECT_EQ(call({"train", "--data", data, "-o", path("r"), "--ablate", "no-such"}), kExitUsage);
}

TEST_F(Cli, DivergenceExitCode) {
  const auto data = path("d.gcd");
  ASSERT_EQ(call({"gen", "--classes", "4", "--old", "2", "--per-class", "10", "--dim", "4", "-o", data}), kExitOk);
  const auto run_dir = dir_ / "run";
  EXPECT_EQ(call({"train", "--data", data, "-o", run_dir.string(), "--set", "divergence_limit=1e-6", "-q"}),
            kExitDivergence);
  EXPECT_TRUE(fs::exists(run_dir / kCheckpointDir / kDivergedCheckpoint));
}

TEST_F(Cli, EvalPerfectPredictions) {
  const auto data = path("d.gcd");
  ASSERT_EQ(call({"gen", "--classes", "4", "--old", "2", "--per-class", "10", "--dim", "4", "-o", data}), kExitOk);
  const auto ds = pnp::load_dataset(data);
  {
    std::ofstream p(path("pred.txt"));
    for (int y : ds.unlabelled_y) p << y + 10 << '\n';
  }
  ASSERT_EQ(call({"eval", "--data", data, "--predictions", path("pred.txt"), "--json", path("r.json")}), kExitOk)
      << err_.str();
  const auto j = nlohmann::json::parse(slurp(path("r.json")));
  EXPECT_DOUBLE_EQ(j["acc_all"].get<double>(), 1.0);
  EXPECT_EQ(j["k_est"], 4);
}

TEST_F(Cli, BenchErrorsAndWarnings) {
  EXPECT_EQ(call({"bench", "--data", path("missing.gcd")}), kExitData);
  ASSERT_EQ(call({"bench", "--sizes", "200", "--repeats", "1"}), kExitOk) << err_.str();
  EXPECT_NE(err_.str().find("repeats"), std::string::npos);
  EXPECT_NE(out_.str().find("unlabelled_ms"), std::string::npos);
}

TEST(RunConfig, DumpRoundTrips) {
  RunConfig a;
  set_key(a, "lr", "0.05");
  set_key(a, "omega_form", "printed");
  set_key(a, "checkpoint_every", "4");
  apply_ablation(a, "no-ema");
  std::istringstream in(dump_config(a));
  RunConfig b;
  apply_config_text(b, in);
  EXPECT_EQ(dump_config(b), dump_config(a));
  EXPECT_EQ(b.train.lr, 0.05);
  EXPECT_FALSE(b.train.use_ema);
}

TEST(RunConfig, RejectsBadInput) {
  RunConfig c;
  EXPECT_THROW(set_key(c, "nope", "1"), pnp::ConfigError);
  EXPECT_THROW(set_key(c, "lr", "fast"), pnp::ConfigError);
  EXPECT_THROW(set_key(c, "epochs", "-3"), pnp::ConfigError);
  std::istringstream in("# comment\n\nlr=0.2\nmissing_equals\n");
  EXPECT_THROW(apply_config_text(c, in), pnp::ConfigError);
}
