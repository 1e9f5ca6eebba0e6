#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "eitnet/cli.hpp"
#include "eitnet/csv.hpp"

using namespace eitnet;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "eitnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_root() {
  return fs::temp_directory_path() / ("eitnet_cli_test_" + std::to_string(::getpid()));
}

fs::path scratch(const std::string& name) {
  const fs::path p = scratch_root() / name;
  fs::remove_all(p);
  return p;
}

class ScratchCleanup : public ::testing::Environment {
 public:
  void TearDown() override { fs::remove_all(scratch_root()); }
};

const auto* const cleanup = ::testing::AddGlobalTestEnvironment(new ScratchCleanup);

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(CliTest, NoArgumentsPrintsUsage) {
  const auto r = run({});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(CliTest, UnknownSubcommandIsUsageError) {
  const auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
}

TEST(CliTest, UnknownFlagIsUsageError) {
  EXPECT_EQ(run({"complexity", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(run({"simulate", "--seed", "abc"}).code, kExitUsage);
}

TEST(CliTest, InvalidConfigExitsThree) {
  const auto dir = scratch("config").string();
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"eval", "--axis", "diagonal", "--out", dir},
           {"train", "--toggles", "det,warp", "--out", dir},
           {"train", "--lr", "0", "--out", dir},
           {"simulate", "--duration", "2 weeks", "--out", dir},
           {"simulate", "--cameras", "0", "--out", dir},
           {"simulate", "--cameras", "/nonexistent/cams.txt", "--out", dir},
           {"eval", "--dataset", "/nonexistent/data", "--out", dir}}) {
    const auto r = run(args);
    EXPECT_EQ(r.code, kExitConfig) << args.front() << " " << args[2];
    EXPECT_EQ(r.err.rfind("error: config: ", 0), 0u);
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  }
}

TEST(CliTest, DurationParsing) {
  EXPECT_EQ(parse_duration_us("2s"), 2'000'000);
  EXPECT_EQ(parse_duration_us("1.5s"), 1'500'000);
  EXPECT_EQ(parse_duration_us("250ms"), 250'000);
  EXPECT_EQ(parse_duration_us("40000us"), 40'000);
  EXPECT_EQ(parse_duration_us("3"), 3'000'000);
  EXPECT_THROW(parse_duration_us("0s"), std::invalid_argument);
  EXPECT_THROW(parse_duration_us("-1s"), std::invalid_argument);
  EXPECT_THROW(parse_duration_us("s"), std::invalid_argument);
  EXPECT_THROW(parse_duration_us("2h"), std::invalid_argument);
}

TEST(CliTest, ComplexityWritesCsv) {
  const auto dir = scratch("complexity");
  const auto r = run({"complexity", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto t = read_csv_file((dir / "complexity.csv").string());
  EXPECT_EQ(t.header.front(), "stage");
  EXPECT_EQ(t.rows.back().front(), "total");
}

TEST(CliTest, OutputDirectoryFromEnvironment) {
  const auto dir = scratch("env");
  ::setenv("EITNET_OUT", dir.string().c_str(), 1);
  const auto r = run({"complexity"});
  ::unsetenv("EITNET_OUT");
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "complexity.csv"));
}

TEST(CliTest, SimulateIsByteIdenticalAcrossRuns) {
  const auto a = scratch("sim_a"), b = scratch("sim_b");
  for (const auto& dir : {a, b}) {
    const auto r = run({"simulate", "--cameras", "5", "--duration", "2s", "--seed", "1", "--out",
                        dir.string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }
  for (const char* f : {"sim_counts.csv", "sim_latency.csv", "sim_windows.csv",
                        "sim_feedback.csv", "cameras.txt"}) {
    const auto text = slurp(a / f);
    EXPECT_FALSE(text.empty()) << f;
    EXPECT_EQ(text, slurp(b / f)) << f;
    EXPECT_EQ(text.back(), '\n') << f;
  }
}

TEST(CliTest, SimulateReadsCameraSpecFile) {
  const auto dir = scratch("spec");
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "cams.txt");
    os << "id=3 period_us=20000 drop_prob=0.1\nid=9 period_us=20000 offset_us=1500\n";
  }
  const auto r = run({"simulate", "--cameras", (dir / "cams.txt").string(), "--duration",
                      "500ms", "--threshold", "0", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto counts = read_csv_file((dir / "sim_counts.csv").string());
  ASSERT_EQ(counts.rows.size(), 2u);
  EXPECT_EQ(counts.rows[0][0], "3");
  EXPECT_EQ(counts.rows[1][0], "9");
  const auto windows = read_csv_file((dir / "sim_windows.csv").string());
  const auto feedback = read_csv_file((dir / "sim_feedback.csv").string());
  EXPECT_EQ(windows.rows.size(), feedback.rows.size());
}

TEST(CliTest, GradcheckPasses) {
  const auto dir = scratch("grad");
  const auto r = run({"gradcheck", "--seed", "3", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto t = read_csv_file((dir / "gradcheck.csv").string());
  EXPECT_EQ(t.rows.size(), 4u);
  for (const auto& row : t.rows) EXPECT_EQ(row.back(), "true");
}

TEST(CliTest, EvalReportsSubjectSplitSizes) {
  const auto dir = scratch("eval");
  const auto r = run({"eval", "--axis", "subject", "--seed", "7", "--epochs", "2", "--out",
                      dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto t = read_csv_file((dir / "metrics.csv").string());
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][t.column("split_axis")], "subject");
  EXPECT_EQ(t.rows[0][t.column("seed")], "7");
  EXPECT_EQ(t.rows[0][t.column("train_groups")], "6");
  EXPECT_EQ(t.rows[0][t.column("test_groups")], "4");
  EXPECT_EQ(t.rows[0][t.column("train_samples")], "240");
  EXPECT_EQ(t.rows[0][t.column("test_samples")], "160");
}

TEST(CliTest, GenDataRoundTripsThroughDatasetFlag) {
  const auto dir = scratch("gen");
  const auto data = dir / "data";
  ASSERT_EQ(run({"gen-data", "--seed", "2", "--dataset", data.string(), "--out", dir.string()}).code,
            kExitOk);
  EXPECT_TRUE(fs::exists(data / "manifest.csv"));
  const auto r = run({"gradcheck", "--dataset", data.string(), "--out", dir.string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
}
