// Drives the built CLI binary end to end.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "uflow/flo_io.hpp"
#include "uflow/png_io.hpp"

using namespace uflow;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("uflow_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

int run(const std::string& args) {
  std::string cmd = std::string(UFLOW_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool dirs_byte_identical(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a)) fa.push_back(fs::relative(e, a));
  for (const auto& e : fs::recursive_directory_iterator(b)) fb.push_back(fs::relative(e, b));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb) return false;
  for (const auto& rel : fa)
    if (fs::is_regular_file(a / rel) && slurp(a / rel) != slurp(b / rel)) return false;
  return true;
}

}  // namespace

TEST(CliGenData, DeterministicAndIdempotent) {
  TempDir tmp("gen");
  std::string base = " --count 4 --size 64x64 --seed 7 --sprites 2";
  ASSERT_EQ(run("gen-data --out " + tmp.str() + "/a" + base), 0);
  ASSERT_EQ(run("gen-data --out " + tmp.str() + "/b" + base), 0);
  EXPECT_TRUE(dirs_byte_identical(tmp.path / "a", tmp.path / "b"));
}

TEST(CliGenData, CountZeroWritesEmptyManifest) {
  TempDir tmp("gen0");
  ASSERT_EQ(run("gen-data --count 0 --out " + tmp.str() + "/d"), 0);
  std::ifstream in(tmp.str() + "/d/manifest.txt");
  ASSERT_TRUE(in.good());
  std::string line;
  EXPECT_FALSE(std::getline(in, line) && !line.empty());
}

TEST(CliGenData, RejectsIndivisibleSize) {
  TempDir tmp("genbad");
  EXPECT_EQ(run("gen-data --count 1 --size 63x64 --out " + tmp.str() + "/d"), 2);
  EXPECT_FALSE(fs::exists(tmp.str() + "/d"));
}

TEST(CliGenData, RefusesOverwriteWithoutForce) {
  TempDir tmp("genow");
  std::string args = "gen-data --count 2 --out " + tmp.str() + "/d";
  ASSERT_EQ(run(args), 0);
  EXPECT_EQ(run(args), 2);
  EXPECT_EQ(run(args + " --force"), 0);
}

TEST(CliSolve, IdenticalPairGivesNearZeroFlow) {
  TempDir tmp("solve");
  ASSERT_EQ(run("gen-data --count 1 --size 32x32 --seed 3 --test-fraction 0 --out " + tmp.str() +
                "/d"),
            0);
  std::string img = tmp.str() + "/d/00000_img1.png";
  ASSERT_EQ(run("solve --pair " + img + " " + img + " --out " + tmp.str() + "/flow.flo --viz " +
                tmp.str() + "/flow.png"),
            0);
  FlowField f = read_flo(tmp.str() + "/flow.flo");
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x)
      EXPECT_LT(std::hypot(f.u.at(x, y), f.v.at(x, y)), 0.05);
  // viz of near-zero flow is near-white
  Image viz = read_image(tmp.str() + "/flow.png");
  EXPECT_EQ(viz.channels, 3);
}

TEST(CliSolve, MissingInputNoPartialOutput) {
  TempDir tmp("solvemiss");
  std::string out = tmp.str() + "/flow.flo";
  EXPECT_EQ(run("solve --pair /nonexistent/a.png /nonexistent/b.png --out " + out), 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(CliViz, ZeroFlowIsWhitePng) {
  TempDir tmp("viz");
  FlowField zero(8, 8);
  write_flo(zero, tmp.str() + "/zero.flo");
  ASSERT_EQ(run("viz --flow " + tmp.str() + "/zero.flo --out " + tmp.str() + "/zero.png"), 0);
  Image img = read_image(tmp.str() + "/zero.png");
  for (double v : img.data) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(CliTrain, ZeroIterationsWritesInitialCheckpoint) {
  TempDir tmp("train0");
  ASSERT_EQ(run("gen-data --count 4 --size 64x64 --seed 5 --out " + tmp.str() + "/d"), 0);
  ASSERT_EQ(run("train --data " + tmp.str() + "/d --out " + tmp.str() + "/run --iterations 0"), 0);
  EXPECT_TRUE(fs::exists(tmp.str() + "/run/ckpt_00000000.ckpt"));
}

TEST(CliTrain, ResumeContinuesFromCheckpoint) {
  TempDir tmp("trainres");
  ASSERT_EQ(run("gen-data --count 4 --size 64x64 --seed 6 --out " + tmp.str() + "/d"), 0);
  std::string common = " --data " + tmp.str() + "/d --out " + tmp.str();
  ASSERT_EQ(run("train" + common + "/run --iterations 8"), 0);
  // without --resume the run dir is protected
  EXPECT_EQ(run("train" + common + "/run --iterations 12"), 2);
  ASSERT_EQ(run("train" + common + "/run --resume --iterations 12"), 0);
  EXPECT_TRUE(fs::exists(tmp.str() + "/run/ckpt_00000012.ckpt"));

  // a straight 12-iteration run must match the resumed one bit for bit
  ASSERT_EQ(run("train" + common + "/straight --iterations 12"), 0);
  EXPECT_EQ(slurp(tmp.path / "run/ckpt_00000012.ckpt"),
            slurp(tmp.path / "straight/ckpt_00000012.ckpt"));
}

TEST(CliEval, ZeroAndSolverMethods) {
  TempDir tmp("eval");
  ASSERT_EQ(run("gen-data --count 4 --size 32x32 --seed 9 --test-fraction 0.5 --out " + tmp.str() +
                "/d"),
            0);
  std::ofstream cfg(tmp.str() + "/fast.cfg");
  cfg << "solver.iterations_per_level = 40\n";
  cfg.close();
  ASSERT_EQ(run("eval --data " + tmp.str() + "/d --method zero --method solver --config " +
                tmp.str() + "/fast.cfg --out " + tmp.str() + "/report.csv"),
            0);
  std::ifstream in(tmp.str() + "/report.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "method,split,epe_all,epe_noc,n_pixels_all,n_pixels_noc,runtime_ms_per_pair");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 2);
}

TEST(CliGradcheck, PassesOnCorrectBuild) {
  EXPECT_EQ(run("gradcheck --module penalty"), 0);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("solve"), 1);           // missing required options
  EXPECT_EQ(run("no-such-command"), 1);
}
