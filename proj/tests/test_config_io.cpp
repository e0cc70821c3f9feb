#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

#include "driftlab/config.hpp"
#include "driftlab/verify.hpp"

using namespace driftlab;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(DRIFTLAB_SOURCE_DIR) / "configs";

std::string error_of(const std::string& text, const fs::path& base = kConfigs) {
  try {
    parse_config(text, base);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("driftlab_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  return d;
}

AnalysisSettings small_settings() {
  AnalysisSettings st;
  st.k = 6;
  st.sobolev.battery_size = 20;
  st.l1_battery = 20;
  st.heat_points = 128;
  st.t_count = 5;
  st.thm4_k_max = 4;
  return st;
}

GeometrySpec small_circle() {
  GeometrySpec g;
  g.id = "circle_small";
  g.topology = Topology::Circle;
  g.n_points = 256;
  g.phi.builtin = "cos";
  g.phi.coefficients = {1.0};
  return g;
}

}  // namespace

TEST(Config, SampleFilesParse) {
  const auto sphere = load_config(kConfigs / "sphere.yaml");
  ASSERT_TRUE(sphere.geometry);
  EXPECT_EQ(sphere.geometry->topology, Topology::SphereSymmetric);
  EXPECT_EQ(sphere.geometry->n_points, 512);
  EXPECT_EQ(sphere.geometry->azimuthal_mode_cap, 3);
  EXPECT_EQ(sphere.solver.seed, 7u);

  const auto ou = load_config(kConfigs / "interval_ou.yaml");
  EXPECT_EQ(ou.geometry->a, -6.0);
  EXPECT_EQ(ou.bounds.enabled.size(), 4u);
  EXPECT_EQ(ou.output.format, "csv");

  const auto table = load_config(kConfigs / "interval_table.yaml");
  EXPECT_EQ(table.geometry->phi.table_x.size(), 513u);
  const auto g = table.geometry->build();
  EXPECT_NEAR(g.weight_phi[g.size() / 2], 0.4 * std::exp(-std::pow(g.grid[g.size() / 2] - 1.5, 2)), 1e-6);

  const auto circle = load_config(kConfigs / "circle_cos.yaml");
  EXPECT_EQ(circle.geometry->id, "circle_cos");
  EXPECT_EQ(circle.geometry->n_points, 2048);
  EXPECT_EQ(circle.sobolev.l1_battery, 500);

  const auto col = load_config(kConfigs / "collapse.yaml");
  EXPECT_EQ(col.collapse.epsilons.size(), 4u);
  EXPECT_EQ(col.collapse.k_indices, (std::vector<int>{1, 2}));
}

TEST(Config, EmptyDocumentGivesDefaults) {
  const auto c = parse_config("");
  EXPECT_FALSE(c.geometry);
  EXPECT_EQ(c.solver.k, 12);
  EXPECT_EQ(c.output.format, "both");
}

TEST(Config, UnknownKeyNamesLineAndField) {
  const auto e = error_of("solver:\n  k: 4\ngeometry:\n  topology: circle\n  n_pionts: 64\n");
  EXPECT_NE(e.find("config:5"), std::string::npos) << e;
  EXPECT_NE(e.find("geometry.n_pionts"), std::string::npos) << e;
  EXPECT_NE(e.find("unknown key"), std::string::npos) << e;
  EXPECT_NE(error_of("solvr:\n  k: 4\n").find("config:1"), std::string::npos);
}

TEST(Config, RejectsBadValues) {
  EXPECT_NE(error_of("geometry:\n  builtin: nope\n").find("geometry.builtin"), std::string::npos);
  EXPECT_NE(error_of("geometry:\n  topology: torus\n").find("geometry.topology"), std::string::npos);
  EXPECT_NE(error_of("geometry:\n  topology: circle\n  phi:\n    builtin: coss\n").find("geometry.phi.builtin"),
            std::string::npos);
  EXPECT_NE(error_of("solver:\n  k: 0\n").find("config:2: field 'solver.k'"), std::string::npos);
  EXPECT_NE(error_of("solver:\n  k: many\n").find("an integer"), std::string::npos);
  EXPECT_NE(error_of("sobolev:\n  nu: 2\n").find("sobolev.nu"), std::string::npos);
  EXPECT_NE(error_of("sobolev:\n  alpha: -1\n").find("sobolev.alpha"), std::string::npos);
  EXPECT_NE(error_of("heat:\n  t_min: 0.5\n  t_max: 0.1\n").find("heat.t_max"), std::string::npos);
  EXPECT_NE(error_of("collapse:\n  epsilons: [0.2, 0.1, 0.3, 0.01]\n").find("collapse.epsilons"), std::string::npos);
  EXPECT_NE(error_of("bounds:\n  enabled: [ling, lin]\n").find("bounds.enabled[1]"), std::string::npos);
  EXPECT_NE(error_of("output:\n  format: xml\n").find("output.format"), std::string::npos);
  EXPECT_NE(error_of("geometry:\n  topology: interval\n  a: 2\n  b: 1\n").find("geometry.b"), std::string::npos);
  EXPECT_NE(error_of("solver: [1, 2\n").find("parse error"), std::string::npos);
}

TEST(Config, PhiTableRules) {
  EXPECT_NE(error_of("geometry:\n  topology: interval\n  phi:\n    builtin: zero\n    table: phi_bump.csv\n")
                .find("excludes"),
            std::string::npos);
  EXPECT_NE(error_of("geometry:\n  topology: interval\n  phi:\n    table: missing.csv\n").find("cannot open"),
            std::string::npos);
  const auto dir = fresh_dir("table");
  fs::create_directories(dir);
  io::write_text(dir / "short.csv", "x,phi\n0,0\n1,0\n");
  EXPECT_NE(error_of("geometry:\n  topology: interval\n  phi:\n    table: short.csv\n", dir).find("at least 8"),
            std::string::npos);
  io::write_text(dir / "bad.csv", "0 0\n1 x\n");
  EXPECT_NE(error_of("geometry:\n  topology: interval\n  phi:\n    table: bad.csv\n", dir).find("bad.csv:2"),
            std::string::npos);
  fs::remove_all(dir);
}

TEST(Serialisation, SeventeenDigitsRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(u(rng), static_cast<int>(rng() % 200) - 100);
    const std::string s = io::num(v);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
    const auto j = io::Json::parse(io::Json(v).dump());
    EXPECT_EQ(j.get<double>(), v);
  }
  EXPECT_EQ(io::num(0.1), "0.10000000000000001");
  EXPECT_TRUE(io::jnum(std::nan("")).is_null());
}

TEST(Serialisation, CsvQuotingAndWidth) {
  io::CsvTable t({"a", "b"});
  t.add({"g", "h"}, {"1,2", "say \"x\""});
  EXPECT_EQ(t.str(), "geometry_id,params_hash,version,a,b\ng,h," + std::string(kVersion) +
                         ",\"1,2\",\"say \"\"x\"\"\"\n");
  EXPECT_THROW(t.add({"g", "h"}, {"1"}), InvalidArgument);
}

TEST(ParamsHash, SensitiveToInputs) {
  const auto st = small_settings();
  const auto g = small_circle();
  const auto base = row_tag(g, canonical(st)).params_hash;
  EXPECT_EQ(base, row_tag(g, canonical(st)).params_hash);
  EXPECT_EQ(base.size(), 16u);
  auto g2 = g;
  g2.n_points = 512;
  EXPECT_NE(base, row_tag(g2, canonical(st)).params_hash);
  auto g3 = g;
  g3.phi.coefficients = {1.0 + 1e-15};
  EXPECT_NE(base, row_tag(g3, canonical(st)).params_hash);
  auto st2 = st;
  st2.solver.seed = 2;
  EXPECT_NE(base, row_tag(g, canonical(st2)).params_hash);
  auto st3 = st;
  st3.sobolev.alpha = 1.0;
  EXPECT_NE(base, row_tag(g, canonical(st3)).params_hash);
}

TEST(Artifacts, TaggedAndDeterministic) {
  const auto st = small_settings();
  const auto spec = small_circle();
  const auto tag = row_tag(spec, canonical(st));
  const auto a = fresh_dir("a"), b = fresh_dir("b");
  const auto fa = write_analysis(analyze_geometry(spec, st), a, tag, OutputFormat::parse("both"));
  const auto fb = write_analysis(analyze_geometry(spec, st), b, tag, OutputFormat::parse("both"));
  ASSERT_EQ(fa.size(), fb.size());
  ASSERT_GE(fa.size(), 10u);
  const std::string prefix = tag.geometry_id + "," + tag.params_hash + "," + kVersion + ",";
  for (std::size_t i = 0; i < fa.size(); ++i) {
    EXPECT_EQ(slurp(fa[i]), slurp(fb[i])) << fa[i];
    const std::string text = slurp(fa[i]);
    std::istringstream lines(text);
    std::string line;
    if (fa[i].extension() == ".csv") {
      std::getline(lines, line);
      EXPECT_EQ(line.rfind("geometry_id,params_hash,version,", 0), 0u) << fa[i];
      int rows = 0;
      while (std::getline(lines, line)) {
        EXPECT_EQ(line.rfind(prefix, 0), 0u) << fa[i] << ": " << line;
        ++rows;
      }
      EXPECT_GT(rows, 0) << fa[i];
    } else if (fa[i].extension() == ".json") {
      const auto j = io::Json::parse(text);
      EXPECT_EQ(j["geometry_id"], tag.geometry_id) << fa[i];
      EXPECT_EQ(j["params_hash"], tag.params_hash);
      EXPECT_EQ(j["version"], kVersion);
    } else {
      std::getline(lines, line);
      EXPECT_NE(line.find("params_hash=" + tag.params_hash), std::string::npos) << fa[i];
    }
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Artifacts, FormatSelection) {
  auto st = small_settings();
  st.run_heat = false;
  const auto spec = small_circle();
  const auto dir = fresh_dir("fmt");
  const auto files = write_analysis(analyze_geometry(spec, st), dir, row_tag(spec, canonical(st)),
                                    OutputFormat::parse("json"));
  for (const auto& f : files) EXPECT_NE(f.extension(), ".csv") << f;
  EXPECT_THROW(OutputFormat::parse("xml"), InvalidArgument);
  fs::remove_all(dir);
}
