#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "tabgnn/benchmark.hpp"

namespace tabgnn {
namespace {

namespace fs = std::filesystem;

fs::path work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "tabgnn_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the CLI with stdout redirected to `stdout_file`; returns the exit code.
int run(const std::string& args, const std::string& stdout_file = "/dev/null") {
  const std::string cmd = "cd '" + work_dir().string() + "' && '" TABGNN_CLI "' " + args + " > '" + stdout_file +
                          "' 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, SynthDefaultsAndSeedDeterminism) {
  ASSERT_EQ(run("synth --seed 11 --out a.csv"), 0);
  ASSERT_EQ(run("--seed 11 synth", (work_dir() / "b.csv").string()), 0);
  const std::string a = read_file(work_dir() / "a.csv");
  EXPECT_EQ(a, read_file(work_dir() / "b.csv"));
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 201);
  EXPECT_EQ(a.rfind("f0,f1,f2,f3,f4,label\n", 0), 0u);
  ASSERT_EQ(run("synth --seed 12 --out c.csv"), 0);
  EXPECT_NE(a, read_file(work_dir() / "c.csv"));
}

TEST(Cli, BuildGraphWritesEdgesAndStats) {
  ASSERT_EQ(run("synth --seed 1 --out g.csv"), 0);
  const fs::path stats = work_dir() / "stats.json";
  ASSERT_EQ(run("build-graph --input g.csv --label label --metric euclidean --threshold 0.8 --mode weighted --out e.csv",
                stats.string()),
            0);
  const auto j = nlohmann::json::parse(read_file(stats));
  EXPECT_EQ(j["nodes"], 200);
  const std::string edges = read_file(work_dir() / "e.csv");
  EXPECT_EQ(edges.rfind("# nodes=200 metric=euclidean threshold=0.8 mode=weighted\nsrc,dst,weight\n", 0), 0u);
  EXPECT_EQ(std::count(edges.begin(), edges.end(), '\n'), 2 + j["edges"].get<long>());
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("build-graph --input g.csv --threshold 2"), 1);
  EXPECT_EQ(run("benchmark"), 1);
  EXPECT_EQ(run("synth --samples 0"), 1);
  EXPECT_EQ(run("build-graph --input missing.csv"), 2);
  EXPECT_EQ(run("build-graph --input g.csv --label nope"), 2);
  EXPECT_EQ(run("report --runs missing_dir"), 2);
}

TEST(Cli, HelpDocumentsOutputEnvironmentVariable) {
  const fs::path help = work_dir() / "help.txt";
  ASSERT_EQ(run("--help", help.string()), 0);
  EXPECT_NE(read_file(help).find("TABGNN_OUT"), std::string::npos);
}

TEST(Cli, BenchmarkUsesEnvironmentRootAndReports) {
  ASSERT_EQ(run("synth --seed 2 --samples 80 --features 3 --classes 2 --out s.csv"), 0);
  const std::string bench = "benchmark --data s.csv --label label --methods lr,mlp --folds 5 --epochs 20 --seed 5";
  const std::string cmd = "TABGNN_OUT=envroot '" TABGNN_CLI "' " + bench;
  const int status = std::system(("cd '" + work_dir().string() + "' && " + cmd + " > /dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(status));
  ASSERT_EQ(WEXITSTATUS(status), 0);
  const fs::path dir = work_dir() / "envroot" / "s-seed5";
  for (const char* f : {"folds.jsonl", "grid.csv", "summary.csv", "significance.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  ASSERT_EQ(run("benchmark --manifest envroot/s-seed5/manifest.json --out again"), 0);
  EXPECT_EQ(read_file(dir / "folds.jsonl"), read_file(work_dir() / "again" / "folds.jsonl"));
  EXPECT_EQ(read_file(dir / "manifest.json"), read_file(work_dir() / "again" / "manifest.json"));
  ASSERT_EQ(run("report --runs envroot/s-seed5 --out table.csv"), 0);
  EXPECT_EQ(read_file(work_dir() / "table.csv").rfind("method,s\nlr,", 0), 0u);
}

}  // namespace
}  // namespace tabgnn
