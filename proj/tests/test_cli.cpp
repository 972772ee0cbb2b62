#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("firkrylov_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args, const std::string& env = "") const {
    const std::string cmd = env + " " + FIRKRYLOV_CLI_PATH + " " + args + " >" + (dir_ / "stdout").string() +
                            " 2>" + (dir_ / "stderr").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::string gen(const std::string& extra = "") const {
    const std::string out = path("sys.csv");
    EXPECT_EQ(run("gen --m 300 --n 30 --seed 3 --out " + out + " " + extra), 0) << slurp(path("stderr"));
    return out;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenWritesDataSidecarAndManifest) {
  const std::string out = gen();
  const std::string csv = slurp(out);
  EXPECT_EQ(csv.rfind("# manifest ", 0), 0u);
  EXPECT_NE(csv.find("\nu,y\n"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("sys.json")));
  EXPECT_TRUE(fs::exists(path("sys.manifest.json")));
  EXPECT_NE(slurp(path("sys.json")).find("theta_true"), std::string::npos);
}

TEST_F(Cli, GenIsDeterministic) {
  const std::string first = slurp(gen());
  EXPECT_EQ(first, slurp(gen()));
}

TEST_F(Cli, ManifestReplayReproducesIdentify) {
  const std::string data = gen();
  const std::string out = path("est.json");
  ASSERT_EQ(run("identify --data " + data + " --budget 6 --out " + out), 0) << slurp(path("stderr"));
  const std::string first = slurp(out);
  EXPECT_NE(first.find("theta_hat"), std::string::npos);
  const std::string replay = path("replay.json");
  ASSERT_EQ(run("--from-manifest " + path("est.manifest.json") + " --manifest-out " + replay), 0)
      << slurp(path("stderr"));
  EXPECT_EQ(first, slurp(replay));
}

TEST_F(Cli, GridKrylovMatvecsConstantPerBeta) {
  const std::string data = gen();
  const std::string out = path("grid.csv");
  ASSERT_EQ(run("grid --data " + data + " --grid 3,5 --k 8 --deterministic --out " + out), 0)
      << slurp(path("stderr"));
  std::istringstream in(slurp(out));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("# manifest", 0), 0u);
  std::getline(in, line);
  EXPECT_EQ(line, "beta,lambda,psi,quad_term,trace_term,nu_star,matvecs,elapsed_us");
  int rows = 0;
  std::string beta, mv;
  std::map<std::string, std::string> per_beta;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream fields(line);
    std::string f[8];
    for (auto& x : f) std::getline(fields, x, ',');
    if (per_beta.count(f[0])) EXPECT_EQ(per_beta[f[0]], f[6]);
    per_beta[f[0]] = f[6];
    EXPECT_EQ(f[7], "0");
  }
  EXPECT_EQ(rows, 15);
  EXPECT_EQ(per_beta.size(), 3u);
  EXPECT_TRUE(fs::exists(path("grid_minima.csv")));
}

TEST_F(Cli, BenchThreadsMatchSerial) {
  const std::string base = "bench --m 200 --n 20 --seeds 2 --budget 4 --deterministic --evaluators direct,krylov ";
  ASSERT_EQ(run(base + "--out " + path("b1.csv")), 0) << slurp(path("stderr"));
  ASSERT_EQ(run(base + "--out " + path("b4.csv"), "FIRKRYLOV_THREADS=4"), 0) << slurp(path("stderr"));
  EXPECT_EQ(slurp(path("b1.csv")), slurp(path("b4.csv")));
  EXPECT_EQ(slurp(path("b1_runs.csv")), slurp(path("b4_runs.csv")));
}

TEST_F(Cli, VerifySingleCheck) {
  EXPECT_EQ(run("verify --check cg_bound --params '{\"m\": 60, \"k_max\": 6}' --format json --out " +
                path("v.json")),
            0)
      << slurp(path("stderr"));
  EXPECT_NE(slurp(path("v.json")).find("\"passed\""), std::string::npos);
}

TEST_F(Cli, ConfigErrorsExitWithTwo) {
  EXPECT_EQ(run("gen --m 10 --n 20 --out " + path("x.csv")), 2);
  EXPECT_EQ(run("gen --out " + path("x.csv") + " --bogus"), 2);
  EXPECT_EQ(run("verify --params '{\"nope\": 1}' --out " + path("v.csv")), 2);
  EXPECT_EQ(run("identify --data " + path("missing.csv") + " --n 5 --out " + path("e.json")), 1);
  EXPECT_EQ(run("verify --check cg_bound --out " + path("v2.csv"), "FIRKRYLOV_THREADS=abc"), 2);
}

TEST_F(Cli, TamperedDataFailsManifestReplay) {
  const std::string data = gen();
  ASSERT_EQ(run("identify --data " + data + " --budget 3 --out " + path("e.json")), 0);
  std::ofstream(data, std::ios::app) << "1,1\n";
  EXPECT_EQ(run("--from-manifest " + path("e.manifest.json")), 1);
}
