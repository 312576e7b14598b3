#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(DOA_RMT_CLI) + " " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("doa_rmt_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const json& j) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  static json small_config() {
    return json::parse(R"({
      "N": 30, "T": "2*N", "K": 2,
      "thetas_rad": [0, "pi/4"],
      "P": [[2, 0.8], [0.8, 2]],
      "subarray": {"n": "N-1", "delta": 1},
      "methods": ["esprit", "gesprit", "music", "gmusic"],
      "trials": 4,
      "master_seed": 3
    })");
  }

  fs::path dir_;
};

const fs::path kConfigs{DOA_RMT_CONFIG_DIR};

}  // namespace

TEST_F(CliTest, TheoryOnShippedConfig) {
  const auto r = run("theory --config " + (kConfigs / "fig5.json").string());
  ASSERT_EQ(r.code, 0);
  const auto doc = json::parse(r.out);
  EXPECT_NEAR(doc["theta_bar"][0].get<double>(), 0.0028095, 2e-4);
  EXPECT_NEAR(doc["theta_bar"][1].get<double>(), 0.0600224, 2e-4);
}

TEST_F(CliTest, TheoryToFileAndSweep) {
  const auto out = dir_ / "theory.json";
  ASSERT_EQ(run("theory --config " + (kConfigs / "fig6_snr.json").string() + " --out " + out.string()).code, 0);
  const auto doc = json::parse(slurp(out));
  ASSERT_TRUE(doc.is_array());
  EXPECT_NEAR(doc[0]["thresholds_db"][0].get<double>(), -5.18, 0.15);
  EXPECT_NEAR(doc[0]["thresholds_db"][1].get<double>(), -1.51, 0.15);
}

TEST_F(CliTest, ShippedConfigsParse) {
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_EQ(run("theory --config " + entry.path().string() + " --out " + (dir_ / "t.json").string()).code, 0)
        << entry.path();
  }
}

TEST_F(CliTest, SimulateWritesCsv) {
  const auto cfg = write_config("c.json", small_config());
  const auto out = dir_ / "sim.csv";
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --trials 3 --seed 9 --out " + out.string()).code, 0);
  const std::string text = slurp(out);
  EXPECT_EQ(text.rfind("method,N,T,K,n,delta,snr_db,source_index,", 0), 0u);
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  EXPECT_EQ(lines, 1u + 4u * 3u);
  EXPECT_NE(text.find(",3,0,9\n"), std::string::npos);
}

TEST_F(CliTest, SimulateDeterministicAcrossThreads) {
  const auto cfg = write_config("c.json", small_config());
  const auto a = dir_ / "a.csv", b = dir_ / "b.csv";
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --trials 8 --seed 1 --out " + a.string(), "DOA_RMT_THREADS=1").code, 0);
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --trials 8 --seed 1 --out " + b.string(), "DOA_RMT_THREADS=3").code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST_F(CliTest, SweepWithPlotData) {
  auto j = small_config();
  j["sweep"] = {{"axis", "snr_db"}, {"values", {-2, 0, 2}}};
  const auto cfg = write_config("c.json", j);
  const auto out = dir_ / "sweep.csv";
  const auto plots = dir_ / "plots";
  ASSERT_EQ(run("sweep --config " + cfg.string() + " --out " + out.string() + " --plotdata " + plots.string()).code, 0);
  for (const char* m : {"esprit", "gesprit", "music", "gmusic"}) {
    const std::string dat = slurp(plots / (std::string(m) + ".dat"));
    EXPECT_EQ(dat.rfind("# snr_db mse variance bias crb\n", 0), 0u) << m;
    std::size_t lines = 0;
    for (char c : dat) lines += c == '\n';
    EXPECT_EQ(lines, 4u) << m;
  }
  const auto json_out = dir_ / "sweep.json";
  ASSERT_EQ(run("sweep --config " + cfg.string() + " --out " + json_out.string()).code, 0);
  EXPECT_EQ(json::parse(slurp(json_out)).size(), 3u * 4u * 3u);
}

TEST_F(CliTest, CrbPrintsBound) {
  const auto r = run("crb --config " + (kConfigs / "fig4.json").string());
  ASSERT_EQ(r.code, 0);
  const auto doc = json::parse(r.out);
  ASSERT_EQ(doc["crb"].size(), 2u);
  EXPECT_GT(doc["crb"][0].get<double>(), 0.0);
}

TEST_F(CliTest, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("theory --config " + (dir_ / "missing.json").string()).code, 2);
  std::ofstream(dir_ / "bad.json") << "{ not json";
  EXPECT_EQ(run("theory --config " + (dir_ / "bad.json").string()).code, 2);
  auto j = small_config();
  j["methods"] = json::array();
  const auto empty = write_config("empty.json", j);
  const auto out = dir_ / "never.csv";
  EXPECT_EQ(run("sweep --config " + empty.string() + " --out " + out.string()).code, 2);
  EXPECT_FALSE(fs::exists(out));
  j = small_config();
  j["subarray"]["n"] = 30;
  EXPECT_EQ(run("theory --config " + write_config("range.json", j).string()).code, 2);
  EXPECT_EQ(run("simulate --config " + write_config("ok.json", small_config()).string() + " --trials 0 --seed 1 --out " +
                (dir_ / "x.csv").string())
                .code,
            2);
  EXPECT_EQ(run("bogus").code, 2);
}

TEST_F(CliTest, NumericalFailureEverywhereExitsThree) {
  auto j = small_config();
  j["methods"] = {"music"};
  j["grid_size"] = 3;
  j["sweep"] = {{"axis", "snr_db"}, {"values", {0, 3}}};
  const auto cfg = write_config("fail.json", j);
  const auto out = dir_ / "fail.csv";
  EXPECT_EQ(run("sweep --config " + cfg.string() + " --out " + out.string()).code, 3);
  EXPECT_TRUE(fs::exists(out));
}
