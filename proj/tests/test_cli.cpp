#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "driftlab/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(DRIFTLAB_SOURCE_DIR) / "configs";

struct Run {
  int status = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(DRIFTLAB_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("driftlab_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
  return out;
}

}  // namespace

TEST(Cli, SpectrumWithTooManyPairsFails) {
  const auto dir = fresh_dir("k");
  driftlab::io::write_text(dir / "c.yaml",
                           "geometry:\n  topology: circle\n  n_points: 16\nsolver:\n  k: 20\n");
  const auto r = run("spectrum --config " + (dir / "c.yaml").string() + " --out " + (dir / "out").string());
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("k"), std::string::npos);
  EXPECT_NE(r.output.find("driftlab:"), std::string::npos) << r.output;
  fs::remove_all(dir);
}

TEST(Cli, BoundsOnSphere) {
  const auto dir = fresh_dir("sphere");
  const auto r = run("bounds --config " + (kConfigs / "sphere.yaml").string() + " --out " + dir.string());
  EXPECT_EQ(r.status, 0) << r.output;
  const auto line = r.output.find("ling ");
  ASSERT_NE(line, std::string::npos) << r.output;
  const std::string row = r.output.substr(line, r.output.find('\n', line) - line);
  EXPECT_NE(row.find("1.375"), std::string::npos) << row;
  EXPECT_NE(row.find("Satisfied"), std::string::npos) << row;
  EXPECT_NE(r.output.find("Advisory"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "sphere" / "bounds.json"));
  fs::remove_all(dir);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto dir = fresh_dir("bad");
  driftlab::io::write_text(dir / "c.yaml", "geometry:\n  topology: circle\n  n_pionts: 64\n");
  const auto r = run("spectrum --config " + (dir / "c.yaml").string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.output.find("config:3: field 'geometry.n_pionts'"), std::string::npos) << r.output;
  const auto missing = run("spectrum --out " + dir.string());
  EXPECT_EQ(missing.status, 2);
  EXPECT_NE(missing.output.find("geometry"), std::string::npos);
  EXPECT_NE(run("nonsense").status, 0);
  fs::remove_all(dir);
}

TEST(Cli, SpectrumIsByteIdentical) {
  const auto a = fresh_dir("da"), b = fresh_dir("db");
  const std::string cfg = (kConfigs / "interval_ou.yaml").string();
  ASSERT_EQ(run("spectrum --config " + cfg + " --format both --out " + a.string()).status, 0);
  ASSERT_EQ(run("spectrum --config " + cfg + " --format both --out " + b.string()).status, 0);
  const auto ta = tree(a), tb = tree(b);
  EXPECT_GE(ta.size(), 4u);
  EXPECT_EQ(ta, tb);
  // A different seed changes the hash on every row, not the numbers.
  const auto c = fresh_dir("dc");
  ASSERT_EQ(run("spectrum --config " + cfg + " --seed 99 --out " + c.string()).status, 0);
  const auto tc = tree(c);
  const std::string key = "interval_ou6/spectrum.csv";
  ASSERT_TRUE(tc.count(key) && ta.count(key));
  EXPECT_NE(ta.at(key), tc.at(key));
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST(Cli, ReportMergesArtifacts) {
  const auto dir = fresh_dir("report");
  ASSERT_EQ(run("bounds --config " + (kConfigs / "sphere.yaml").string() + " --out " + dir.string()).status, 0);
  const auto r = run("report --out " + dir.string());
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("bounds"), std::string::npos);
  ASSERT_TRUE(fs::exists(dir / "report.csv"));
  const auto j = driftlab::io::Json::parse(slurp(dir / "report.json"));
  EXPECT_GE(j.size(), 2u);
  EXPECT_NE(run("report --out " + (dir / "missing").string()).status, 0);
  fs::remove_all(dir);
}
