#pragma once

// Experiment configuration: a YAML document with nested sections, parsed
// strictly.  Unknown keys, wrong types and out-of-range values are rejected
// with the line and the dotted field name.

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "driftlab/error.hpp"
#include "driftlab/geometry.hpp"
#include "driftlab/io.hpp"
#include "driftlab/suite.hpp"

namespace driftlab {

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct SolverSection {
  int k = 12;
  double tol = 1e-10;
  std::uint64_t seed = 1;
  int max_iterations = 4000;
};

struct BoundsSection {
  std::vector<std::string> enabled;  // empty: every bound
  int j_max = 5;
};

struct SobolevSection {
  double nu = 4.0;
  std::optional<double> alpha;
  int battery_size = 200;
  int l1_battery = 1000;
  double safety = 0.25;
};

struct HeatSection {
  double t_min = 0.05;
  double t_max = 10.0;
  int t_count = 30;
  std::vector<double> t_grid;  // overrides the log grid when set
  int points = 0;
  double tol = 1e-8;
  std::string source = "extrapolated";
};

struct CollapseSection {
  std::vector<double> epsilons{0.2, 0.1, 0.05, 0.025};
  std::vector<int> k_indices{1, 2};
  int ns = 8;
  int nx_start = 64;
  int nx_max = 2048;
};

struct OutputSection {
  std::string dir = "out";
  std::string format = "both";
};

struct ExperimentConfig {
  std::optional<GeometrySpec> geometry;
  SolverSection solver;
  BoundsSection bounds;
  SobolevSection sobolev;
  HeatSection heat;
  CollapseSection collapse;
  OutputSection output;
};

inline const std::vector<std::string>& bound_names() {
  static const std::vector<std::string> names{
      "yang_eq16",        "yang_combined",       "ling", "andrews_ni",
      "cheng_ric_nonneg", "cheng_ric_n_minus_1", "cheng_ric_minus_k"};
  return names;
}

namespace detail {

class Reader {
 public:
  explicit Reader(std::filesystem::path base) : base_(std::move(base)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& field, const std::string& msg) const {
    std::ostringstream os;
    os << "config";
    if (n.IsDefined() && n.Mark().line >= 0) os << ':' << n.Mark().line + 1;
    os << ": field '" << field << "': " << msg;
    throw ConfigError(os.str());
  }

  void keys(const YAML::Node& map, const std::string& where, std::initializer_list<const char*> allowed) const {
    if (!map.IsMap()) fail(map, where, "expected a mapping");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : map) {
      const std::string k = kv.first.as<std::string>();
      if (!ok.count(k)) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
        fail(kv.first, join(where, k), "unknown key (allowed: " + list + ")");
      }
    }
  }

  template <class T>
  T scalar(const YAML::Node& n, const std::string& field) const {
    if (!n.IsScalar()) fail(n, field, "expected a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, field, "cannot read '" + n.Scalar() + "' as " + type_name<T>());
    }
  }

  template <class T>
  std::vector<T> list(const YAML::Node& n, const std::string& field) const {
    if (!n.IsSequence()) fail(n, field, "expected a list");
    std::vector<T> out;
    for (std::size_t i = 0; i < n.size(); ++i)
      out.push_back(scalar<T>(n[i], field + "[" + std::to_string(i) + "]"));
    return out;
  }

  template <class T>
  void opt(const YAML::Node& map, const std::string& where, const char* key, T& out) const {
    if (const YAML::Node n = map[key]) out = scalar<T>(n, join(where, key));
  }

  void range(const YAML::Node& n, const std::string& field, bool ok, const std::string& msg) const {
    if (!ok) fail(n, field, msg);
  }

  const std::filesystem::path& base() const { return base_; }

  static std::string join(const std::string& a, const std::string& b) {
    return a.empty() ? b : a + "." + b;
  }

 private:
  template <class T>
  static std::string type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else return "a string";
  }

  std::filesystem::path base_;
};

// Two columns (coordinate, phi); a non-numeric first line is taken as a header.
inline void read_phi_table(const std::filesystem::path& path, PhiSpec& phi) {
  std::ifstream f(path);
  if (!f) throw ConfigError("phi table: cannot open '" + path.string() + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    double x, y;
    if (!(is >> x >> y)) {
      if (phi.table_x.empty() && lineno == 1) continue;
      throw ConfigError("phi table " + path.string() + ":" + std::to_string(lineno) +
                        ": expected two numeric columns");
    }
    phi.table_x.push_back(x);
    phi.table_phi.push_back(y);
  }
  if (phi.table_x.size() < 8)
    throw ConfigError("phi table " + path.string() + ": need at least 8 samples");
}

inline GeometrySpec read_geometry(const Reader& r, const YAML::Node& n) {
  const std::string w = "geometry";
  r.keys(n, w, {"builtin", "id", "topology", "radius", "a", "b", "bc", "n_points",
                "azimuthal_mode_cap", "phi"});
  GeometrySpec g;
  if (const YAML::Node b = n["builtin"]) {
    const auto name = r.scalar<std::string>(b, "geometry.builtin");
    const auto suite = builtin_suite();
    bool found = false;
    for (const auto& s : suite)
      if (s.id == name) {
        g = s;
        found = true;
      }
    if (!found) {
      std::string list;
      for (const auto& s : suite) list += (list.empty() ? "" : ", ") + s.id;
      r.fail(b, "geometry.builtin", "unknown builtin geometry '" + name + "' (known: " + list + ")");
    }
  }
  r.opt(n, w, "id", g.id);
  if (const YAML::Node t = n["topology"]) {
    const auto s = r.scalar<std::string>(t, "geometry.topology");
    if (s == "circle") g.topology = Topology::Circle;
    else if (s == "interval") g.topology = Topology::Interval;
    else if (s == "sphere") g.topology = Topology::SphereSymmetric;
    else r.fail(t, "geometry.topology", "expected circle, interval or sphere, got '" + s + "'");
  } else if (!n["builtin"]) {
    r.fail(n, "geometry.topology", "required unless geometry.builtin is given");
  }
  r.opt(n, w, "radius", g.radius);
  r.range(n["radius"], "geometry.radius", g.radius > 0, "must be positive");
  r.opt(n, w, "a", g.a);
  r.opt(n, w, "b", g.b);
  r.range(n["b"] ? n["b"] : n, "geometry.b", g.a < g.b, "interval needs a < b");
  if (const YAML::Node b = n["bc"]) {
    const auto s = r.scalar<std::string>(b, "geometry.bc");
    if (s == "neumann") g.bc = BoundaryCondition::Neumann;
    else if (s == "dirichlet") g.bc = BoundaryCondition::Dirichlet;
    else r.fail(b, "geometry.bc", "expected neumann or dirichlet, got '" + s + "'");
  }
  r.opt(n, w, "n_points", g.n_points);
  r.range(n["n_points"], "geometry.n_points", g.n_points >= 8 && g.n_points <= 1 << 20,
          "must lie in [8, 1048576]");
  r.opt(n, w, "azimuthal_mode_cap", g.azimuthal_mode_cap);
  r.range(n["azimuthal_mode_cap"], "geometry.azimuthal_mode_cap",
          g.azimuthal_mode_cap >= 0 && g.azimuthal_mode_cap <= 64, "must lie in [0, 64]");
  if (const YAML::Node p = n["phi"]) {
    r.keys(p, "geometry.phi", {"builtin", "coefficients", "table"});
    PhiSpec phi;
    r.opt(p, "geometry.phi", "builtin", phi.builtin);
    static const std::set<std::string> known{"zero", "cos", "quadratic", "gaussian-well", "linear"};
    if (!known.count(phi.builtin))
      r.fail(p["builtin"], "geometry.phi.builtin",
             "unknown builtin '" + phi.builtin + "' (known: zero, cos, quadratic, gaussian-well, linear)");
    if (const YAML::Node c = p["coefficients"])
      phi.coefficients = r.list<double>(c, "geometry.phi.coefficients");
    if (const YAML::Node t = p["table"]) {
      if (p["builtin"] || p["coefficients"])
        r.fail(t, "geometry.phi.table", "a table excludes builtin and coefficients");
      std::filesystem::path path = r.scalar<std::string>(t, "geometry.phi.table");
      if (path.is_relative()) path = r.base() / path;
      try {
        read_phi_table(path, phi);
      } catch (const ConfigError& e) {
        r.fail(t, "geometry.phi.table", e.what());
      }
    }
    g.phi = phi;
  }
  return g;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base = ".") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("config:" + std::to_string(e.mark.line + 1) + ": parse error: " + e.msg);
  }
  ExperimentConfig c;
  const detail::Reader r(base);
  if (root.IsNull()) return c;
  r.keys(root, "", {"geometry", "solver", "bounds", "sobolev", "heat", "collapse", "output"});

  if (const YAML::Node g = root["geometry"]) c.geometry = detail::read_geometry(r, g);

  if (const YAML::Node s = root["solver"]) {
    r.keys(s, "solver", {"k", "tol", "seed", "max_iterations"});
    r.opt(s, "solver", "k", c.solver.k);
    r.range(s["k"], "solver.k", c.solver.k >= 1 && c.solver.k <= 2000, "must lie in [1, 2000]");
    r.opt(s, "solver", "tol", c.solver.tol);
    r.range(s["tol"], "solver.tol", c.solver.tol > 0 && c.solver.tol <= 1e-2, "must lie in (0, 1e-2]");
    r.opt(s, "solver", "seed", c.solver.seed);
    r.opt(s, "solver", "max_iterations", c.solver.max_iterations);
    r.range(s["max_iterations"], "solver.max_iterations", c.solver.max_iterations >= 1,
            "must be >= 1");
  }
  if (const YAML::Node b = root["bounds"]) {
    r.keys(b, "bounds", {"enabled", "j_max"});
    if (const YAML::Node e = b["enabled"]) {
      c.bounds.enabled = r.list<std::string>(e, "bounds.enabled");
      for (std::size_t i = 0; i < c.bounds.enabled.size(); ++i) {
        const auto& names = bound_names();
        if (std::find(names.begin(), names.end(), c.bounds.enabled[i]) == names.end())
          r.fail(e[i], "bounds.enabled[" + std::to_string(i) + "]",
                 "unknown bound '" + c.bounds.enabled[i] + "'");
      }
    }
    r.opt(b, "bounds", "j_max", c.bounds.j_max);
    r.range(b["j_max"], "bounds.j_max", c.bounds.j_max >= 1 && c.bounds.j_max <= 50,
            "must lie in [1, 50]");
  }
  if (const YAML::Node s = root["sobolev"]) {
    r.keys(s, "sobolev", {"nu", "alpha", "battery_size", "l1_battery", "safety"});
    r.opt(s, "sobolev", "nu", c.sobolev.nu);
    r.range(s["nu"], "sobolev.nu", c.sobolev.nu > 2 && c.sobolev.nu <= 100, "must lie in (2, 100]");
    if (const YAML::Node a = s["alpha"]) {
      c.sobolev.alpha = r.scalar<double>(a, "sobolev.alpha");
      r.range(a, "sobolev.alpha", *c.sobolev.alpha >= 0, "must be >= 0");
    }
    r.opt(s, "sobolev", "battery_size", c.sobolev.battery_size);
    r.range(s["battery_size"], "sobolev.battery_size",
            c.sobolev.battery_size >= 1 && c.sobolev.battery_size <= 100000, "must lie in [1, 100000]");
    r.opt(s, "sobolev", "l1_battery", c.sobolev.l1_battery);
    r.range(s["l1_battery"], "sobolev.l1_battery",
            c.sobolev.l1_battery >= 1 && c.sobolev.l1_battery <= 100000, "must lie in [1, 100000]");
    r.opt(s, "sobolev", "safety", c.sobolev.safety);
    r.range(s["safety"], "sobolev.safety", c.sobolev.safety >= 0 && c.sobolev.safety <= 10,
            "must lie in [0, 10]");
  }
  if (const YAML::Node h = root["heat"]) {
    r.keys(h, "heat", {"t_min", "t_max", "t_count", "t_grid", "points", "tol", "source"});
    r.opt(h, "heat", "t_min", c.heat.t_min);
    r.range(h["t_min"], "heat.t_min", c.heat.t_min > 0, "must be positive");
    r.opt(h, "heat", "t_max", c.heat.t_max);
    r.range(h["t_max"], "heat.t_max", c.heat.t_max > c.heat.t_min, "must exceed heat.t_min");
    r.opt(h, "heat", "t_count", c.heat.t_count);
    r.range(h["t_count"], "heat.t_count", c.heat.t_count >= 2 && c.heat.t_count <= 1000,
            "must lie in [2, 1000]");
    if (const YAML::Node t = h["t_grid"]) {
      c.heat.t_grid = r.list<double>(t, "heat.t_grid");
      bool ok = !c.heat.t_grid.empty() && c.heat.t_grid.front() >= c.heat.t_min;
      for (std::size_t i = 1; i < c.heat.t_grid.size(); ++i) ok = ok && c.heat.t_grid[i] > c.heat.t_grid[i - 1];
      r.range(t, "heat.t_grid", ok, "must be increasing and start at or above heat.t_min");
    }
    r.opt(h, "heat", "points", c.heat.points);
    r.range(h["points"], "heat.points", c.heat.points == 0 || (c.heat.points >= 16 && c.heat.points <= 8192),
            "must be 0 (default) or lie in [16, 8192]");
    r.opt(h, "heat", "tol", c.heat.tol);
    r.range(h["tol"], "heat.tol", c.heat.tol > 0 && c.heat.tol < 1, "must lie in (0, 1)");
    r.opt(h, "heat", "source", c.heat.source);
    r.range(h["source"], "heat.source", c.heat.source == "discrete" || c.heat.source == "extrapolated",
            "expected discrete or extrapolated");
  }
  if (const YAML::Node s = root["collapse"]) {
    r.keys(s, "collapse", {"epsilons", "k_indices", "ns", "nx_start", "nx_max"});
    if (const YAML::Node e = s["epsilons"]) {
      c.collapse.epsilons = r.list<double>(e, "collapse.epsilons");
      bool ok = c.collapse.epsilons.size() >= 4;
      for (std::size_t i = 0; i < c.collapse.epsilons.size(); ++i)
        ok = ok && c.collapse.epsilons[i] > 0 && c.collapse.epsilons[i] <= 1 &&
             (i == 0 || c.collapse.epsilons[i] < c.collapse.epsilons[i - 1]);
      r.range(e, "collapse.epsilons", ok, "need >= 4 strictly decreasing values in (0, 1]");
    }
    if (const YAML::Node k = s["k_indices"]) {
      c.collapse.k_indices = r.list<int>(k, "collapse.k_indices");
      bool ok = !c.collapse.k_indices.empty();
      for (int v : c.collapse.k_indices) ok = ok && v >= 0 && v <= 50;
      r.range(k, "collapse.k_indices", ok, "need a non-empty list of indices in [0, 50]");
    }
    r.opt(s, "collapse", "ns", c.collapse.ns);
    r.range(s["ns"], "collapse.ns", c.collapse.ns >= 4 && c.collapse.ns <= 64, "must lie in [4, 64]");
    r.opt(s, "collapse", "nx_start", c.collapse.nx_start);
    r.range(s["nx_start"], "collapse.nx_start", c.collapse.nx_start >= 64, "must be >= 64");
    r.opt(s, "collapse", "nx_max", c.collapse.nx_max);
    r.range(s["nx_max"], "collapse.nx_max", c.collapse.nx_max >= c.collapse.nx_start,
            "must be >= collapse.nx_start");
  }
  if (const YAML::Node o = root["output"]) {
    r.keys(o, "output", {"dir", "format"});
    r.opt(o, "output", "dir", c.output.dir);
    r.opt(o, "output", "format", c.output.format);
    r.range(o["format"], "output.format",
            c.output.format == "csv" || c.output.format == "json" || c.output.format == "both",
            "expected csv, json or both");
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path.has_parent_path() ? path.parent_path() : ".");
}

inline AnalysisSettings analysis_settings(const ExperimentConfig& c) {
  AnalysisSettings s;
  s.k = c.solver.k;
  s.solver.tol = c.solver.tol;
  s.solver.seed = c.solver.seed;
  s.solver.max_iterations = c.solver.max_iterations;
  s.bound_j_max = c.bounds.j_max;
  s.sobolev.nu = c.sobolev.nu;
  s.sobolev.alpha = c.sobolev.alpha;
  s.sobolev.battery_size = c.sobolev.battery_size;
  s.sobolev.safety = c.sobolev.safety;
  s.sobolev.seed = c.solver.seed;
  s.l1_battery = c.sobolev.l1_battery;
  s.heat_points = c.heat.points;
  s.heat_tol = c.heat.tol;
  s.t_min = c.heat.t_min;
  s.t_max = c.heat.t_max;
  s.t_count = c.heat.t_count;
  s.t_grid = c.heat.t_grid;
  s.heat_source = c.heat.source == "discrete" ? EigenvalueSource::Discrete : EigenvalueSource::Extrapolated;
  return s;
}

// Canonical text of everything that influences results; hashed into every row.
inline std::string canonical(const GeometrySpec& g) {
  using io::num;
  std::ostringstream os;
  os << "geometry{id=" << g.id << ";topology=" << to_string(g.topology) << ";radius=" << num(g.radius)
     << ";a=" << num(g.a) << ";b=" << num(g.b)
     << ";bc=" << (g.bc == BoundaryCondition::Neumann ? "neumann" : "dirichlet")
     << ";n=" << g.n_points << ";cap=" << g.azimuthal_mode_cap << ";phi=" << g.phi.builtin << "[";
  for (double v : g.phi.coefficients) os << num(v) << ' ';
  os << "];table=" << g.phi.table_x.size() << ":";
  std::uint64_t h = 0;
  for (std::size_t i = 0; i < g.phi.table_x.size(); ++i)
    h ^= io::fnv1a(num(g.phi.table_x[i]) + ":" + num(g.phi.table_phi[i])) + i * 0x9e3779b97f4a7c15ULL;
  os << io::hex16(h) << "}";
  return os.str();
}

inline std::string canonical(const AnalysisSettings& s) {
  using io::num;
  std::ostringstream os;
  os << "analysis{k=" << s.k << ";tol=" << num(s.solver.tol) << ";seed=" << s.solver.seed
     << ";maxit=" << s.solver.max_iterations << ";jmax=" << s.bound_j_max << ";nu=" << num(s.sobolev.nu)
     << ";alpha=" << (s.sobolev.alpha ? num(*s.sobolev.alpha) : "lambda1")
     << ";battery=" << s.sobolev.battery_size << ";safety=" << num(s.sobolev.safety)
     << ";sseed=" << s.sobolev.seed << ";l1=" << s.l1_battery << ";hp=" << s.heat_points
     << ";htol=" << num(s.heat_tol) << ";t=" << num(s.t_min) << ":" << num(s.t_max) << ":"
     << s.t_count << ";tg=";
  for (double t : s.t_grid) os << num(t) << ' ';
  os << ";src=" << (s.heat_source == EigenvalueSource::Discrete ? "discrete" : "extrapolated")
     << ";thm4=" << s.thm4_k_max << "}";
  return os.str();
}

inline std::string canonical(const CollapseSection& c) {
  std::ostringstream os;
  os << "collapse{eps=";
  for (double e : c.epsilons) os << io::num(e) << ' ';
  os << ";k=";
  for (int k : c.k_indices) os << k << ' ';
  os << ";ns=" << c.ns << ";nx=" << c.nx_start << ":" << c.nx_max << "}";
  return os.str();
}

inline std::string params_hash(const std::string& canonical_text) {
  return io::hex16(io::fnv1a(canonical_text));
}

}  // namespace driftlab
