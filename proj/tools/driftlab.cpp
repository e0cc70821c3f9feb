// driftlab: experiment driver.
//
//   driftlab spectrum   --config c.yaml --out dir
//   driftlab bounds     --config c.yaml
//   driftlab sobolev    --config c.yaml
//   driftlab heat       --config c.yaml
//   driftlab collapse   --config c.yaml
//   driftlab verify-all --out dir [--jobs n]
//   driftlab report     --out dir
//
// Exit status 0 iff no Violated verdict and every property check passes.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "driftlab/config.hpp"
#include "driftlab/verify.hpp"
#include "driftlab/version.hpp"

namespace fs = std::filesystem;
using namespace driftlab;

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string format;
  int jobs = 1;
};

ExperimentConfig load(const Flags& f) {
  ExperimentConfig c;
  if (!f.config.empty()) c = load_config(f.config);
  if (f.seed) c.solver.seed = *f.seed;
  if (!f.out.empty()) c.output.dir = f.out;
  if (!f.format.empty()) c.output.format = f.format;
  return c;
}

const GeometrySpec& need_geometry(const ExperimentConfig& c) {
  if (!c.geometry) throw ConfigError("config: field 'geometry': required for this subcommand");
  return *c.geometry;
}

void print_files(const std::vector<fs::path>& files) {
  for (const auto& p : files) std::printf("  wrote %s\n", p.string().c_str());
}

std::vector<BoundReport> filter_bounds(const std::vector<BoundReport>& all, const BoundsSection& b) {
  if (b.enabled.empty()) return all;
  std::vector<BoundReport> out;
  for (const auto& r : all)
    if (std::find(b.enabled.begin(), b.enabled.end(), r.bound_name) != b.enabled.end()) out.push_back(r);
  return out;
}

int cmd_spectrum(const Flags& f) {
  const auto c = load(f);
  AnalysisSettings st = analysis_settings(c);
  st.run_sobolev = st.run_heat = false;
  const auto a = analyze_geometry(need_geometry(c), st);
  const auto tag = row_tag(a.spec, canonical(st));
  std::printf("%s: %zu eigenpairs (%s)\n", a.spec.id.c_str(), a.spectrum.size(), a.spectrum.method.c_str());
  std::printf("  %5s %22s %22s %12s\n", "index", "eigenvalue", "extrapolated", "estimate");
  for (std::size_t i = 0; i < a.spectrum.size(); ++i)
    std::printf("  %5zu %22.15g %22.15g %12.3g\n", i, a.spectrum.eigenvalues[i], a.spectrum.extrapolated[i],
                a.spectrum.discretization_estimate[i]);
  std::printf("  Schrodinger equivalence: rel diff %.3g (allowance %.3g) %s\n", a.equivalence.max_relative,
              a.equivalence.allowance, a.equivalence.pass ? "ok" : "FAILED");
  ArtifactParts parts;
  parts.bounds = parts.sobolev = parts.heat = false;
  print_files(write_analysis(a, c.output.dir, tag, OutputFormat::parse(c.output.format), parts));
  return a.equivalence.pass ? 0 : 1;
}

int cmd_bounds(const Flags& f) {
  const auto c = load(f);
  AnalysisSettings st = analysis_settings(c);
  st.run_sobolev = st.run_heat = false;
  auto a = analyze_geometry(need_geometry(c), st);
  a.bounds = filter_bounds(a.bounds, c.bounds);
  std::printf("%s\n  %-20s %3s %-6s %14s %14s %11s  %s\n", a.spec.id.c_str(), "bound", "j", "dir", "bound",
              "computed", "margin", "verdict");
  bool violated = false;
  for (const auto& r : a.bounds) {
    std::printf("  %-20s %3zu %-6s %14.8g %14.8g %11.3g  %s\n", r.bound_name.c_str(), r.target_index,
                to_string(r.direction), r.bound_value, r.computed, r.margin, to_string(r.verdict));
    violated = violated || r.verdict == Verdict::Violated;
  }
  if (a.gradient) std::printf("  gradient estimate slack %.3g on %ld points\n", a.gradient->slack, a.gradient->points_used);
  ArtifactParts parts;
  parts.sobolev = parts.heat = false;
  print_files(write_analysis(a, c.output.dir, row_tag(a.spec, canonical(st)),
                             OutputFormat::parse(c.output.format), parts));
  const bool grad_ok = !a.gradient || a.gradient->slack >= -0.02;
  return violated || !grad_ok ? 1 : 0;
}

int cmd_sobolev(const Flags& f) {
  const auto c = load(f);
  AnalysisSettings st = analysis_settings(c);
  st.run_heat = false;
  const auto a = analyze_geometry(need_geometry(c), st);
  if (!a.sobolev) throw InvalidArgument("sobolev: needs a closed manifold or Neumann boundary");
  const auto& e = *a.sobolev;
  std::printf("%s: nu %.3g alpha %.6g\n  C_o estimate %.10g (max ratio %.10g, battery %.10g, seed %llu)\n"
              "  C_o with seed + 1 %.10g\n  C_1 %.10g\n",
              a.spec.id.c_str(), e.nu, e.alpha, e.c_o_estimate, e.max_ratio, e.battery_max_ratio,
              static_cast<unsigned long long>(e.seed), a.sobolev_alt->c_o_estimate, e.c1_value);
  if (!e.warning.empty()) std::printf("  warning: %s\n", e.warning.c_str());
  std::printf("  L1 check on %zu functions: min slack %.3g, Holder rel slack %.3g\n", a.l1->records.size(),
              a.l1->min_slack, a.l1->min_holder_relative_slack);
  ArtifactParts parts;
  parts.spectrum = parts.bounds = parts.heat = false;
  print_files(write_analysis(a, c.output.dir, row_tag(a.spec, canonical(st)),
                             OutputFormat::parse(c.output.format), parts));
  return a.l1->min_slack >= 0 && a.l1->min_holder_relative_slack >= -1e-12 ? 0 : 1;
}

int cmd_heat(const Flags& f) {
  const auto c = load(f);
  const AnalysisSettings st = analysis_settings(c);
  const auto a = analyze_geometry(need_geometry(c), st);
  if (!a.heat) throw InvalidArgument("heat: needs a closed manifold or Neumann boundary");
  const auto& g = *a.gkernel;
  const auto& t = *a.trace;
  std::printf("%s: %ld points, %ld modes\n  stochastic completeness %.3g\n  G mean %.3g, semigroup %.3g, "
              "min diagonal %.3g\n  trace bound %s, robust %s, pointwise %s, differential inequality %s\n",
              a.spec.id.c_str(), static_cast<long>(a.heat->points()), static_cast<long>(a.heat->mode_cap()),
              g.max_stochastic, g.max_mean, g.max_semigroup, g.min_diagonal, t.trace_ok ? "ok" : "FAILED",
              t.robust_ok ? "ok" : "FAILED", t.pointwise_ok ? "ok" : "FAILED", t.diffineq_ok ? "ok" : "FAILED");
  bool thm4 = true;
  for (const auto& r : a.thm4) {
    std::printf("  thm4 k=%2zu: %.6g >= %.6g %s\n", r.k, r.computed, r.bound, r.satisfied ? "Satisfied" : "Violated");
    thm4 = thm4 && r.satisfied;
  }
  ArtifactParts parts;
  parts.spectrum = parts.bounds = false;
  print_files(write_analysis(a, c.output.dir, row_tag(a.spec, canonical(st)),
                             OutputFormat::parse(c.output.format), parts));
  const bool ok = g.max_stochastic <= 1e-6 && g.max_mean <= 1e-8 && g.max_semigroup <= 1e-8 && t.trace_ok &&
                  t.robust_ok && t.pointwise_ok && t.diffineq_ok && thm4;
  return ok ? 0 : 1;
}

int cmd_collapse(const Flags& f) {
  const auto c = load(f);
  const GeometrySpec& spec = need_geometry(c);
  CollapseOptions co;
  co.ns = c.collapse.ns;
  co.nx_start = c.collapse.nx_start;
  co.nx_max = c.collapse.nx_max;
  co.solver = analysis_settings(c).solver;
  const auto st = run_collapse_study(spec.build(64), c.collapse.k_indices, c.collapse.epsilons, co);
  std::printf("%s: nx = %d%s\n", st.geometry_id.c_str(), st.nx_used, st.exact ? " (exact: flat weight)" : "");
  bool ok = true;
  for (std::size_t ki = 0; ki < st.k_indices.size(); ++ki) {
    std::printf("  k=%d order %.4f  limit %.12g  eps-limit %.12g  (estimate %.3g)\n", st.k_indices[ki],
                st.fitted_order[ki], st.mu_limit[ki], st.eps_limit[ki], st.mu_limit_estimate[ki]);
    if (!st.exact) ok = ok && std::abs(st.fitted_order[ki] - 2.0) <= 0.3;
  }
  const auto tag = row_tag(spec, canonical(analysis_settings(c)) + canonical(c.collapse));
  print_files(write_collapse(st, c.output.dir, tag, OutputFormat::parse(c.output.format)));
  return ok ? 0 : 1;
}

int cmd_verify_all(const Flags& f) {
  const auto c = load(f);
  VerifyOptions vo;
  vo.settings = analysis_settings(c);
  vo.jobs = f.jobs;
  vo.format = OutputFormat::parse(c.output.format);
  const auto res = run_verify_all(vo, c.output.dir);
  std::printf("%-3s %-30s %-5s %s\n", "#", "criterion", "ok", "detail");
  for (const auto& cr : res.criteria)
    std::printf("%-3d %-30s %-5s %s%s\n", cr.id, cr.name.c_str(), cr.pass ? "pass" : "FAIL", cr.detail.c_str(),
                cr.runtime_ok() ? "" : " [runtime limit exceeded]");
  std::printf("%zu files in %s, %.1f s\n", res.files.size(), c.output.dir.c_str(), res.seconds);
  return res.pass() ? 0 : 1;
}

// One row per JSON artifact under the directory.
int cmd_report(const Flags& f) {
  const fs::path dir = f.out.empty() ? fs::path(load(f).output.dir) : fs::path(f.out);
  if (!fs::is_directory(dir)) throw InvalidArgument("report: '" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename() != "report.json")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  io::CsvTable table({"file", "kind", "status", "summary"});
  io::Json merged = io::Json::array();
  bool ok = true;
  for (const auto& p : files) {
    std::ifstream in(p);
    io::Json j;
    try {
      j = io::Json::parse(in);
    } catch (const std::exception& e) {
      throw Error("report: " + p.string() + ": " + e.what());
    }
    const std::string kind = j.value("kind", "unknown");
    std::string status = "ok", summary;
    auto fail = [&] {
      status = "fail";
      ok = false;
    };
    if (kind == "bounds") {
      int sat = 0, adv = 0, na = 0;
      for (const auto& r : j["reports"]) {
        const std::string v = r["verdict"];
        if (v == "Violated") fail();
        sat += v == "Satisfied";
        adv += v == "Advisory";
        na += v == "NotApplicable";
      }
      summary = std::to_string(sat) + " satisfied, " + std::to_string(adv) + " advisory, " + std::to_string(na) +
                " not applicable";
    } else if (kind == "heat") {
      for (const char* key : {"trace_ok", "robust_ok", "pointwise_ok", "diffineq_ok"})
        if (!j["trace_bound"][key].get<bool>()) fail();
      for (const auto& r : j["thm4"])
        if (r["verdict"] != "Satisfied") fail();
      summary = "stochastic " + j["g_kernel"]["max_stochastic"].dump() + ", semigroup " +
                j["g_kernel"]["max_semigroup"].dump();
    } else if (kind == "sobolev") {
      summary = "C_o " + j["c_o_estimate"].dump() + ", C_1 " + j["c1"].dump();
      if (j.contains("l1_check") && j["l1_check"]["min_slack"].is_number() &&
          j["l1_check"]["min_slack"].get<double>() < 0)
        fail();
    } else if (kind == "collapse") {
      for (const auto& m : j["modes"]) summary += "k=" + m["k"].dump() + " order " + m["fitted_order"].dump() + " ";
    } else if (kind == "spectrum") {
      summary = std::to_string(j["eigenvalues"].size()) + " eigenvalues";
    } else if (kind == "verify_all") {
      if (!j["pass"].get<bool>()) fail();
      summary = "criteria " + std::to_string(j["criteria"].size());
    }
    const std::string rel = fs::relative(p, dir).generic_string();
    table.add({j.value("geometry_id", ""), j.value("params_hash", "")}, {rel, kind, status, summary});
    merged.push_back({{"file", rel}, {"kind", kind}, {"status", status}, {"summary", summary}});
    std::printf("%-34s %-10s %-5s %s\n", rel.c_str(), kind.c_str(), status.c_str(), summary.c_str());
  }
  io::write_text(dir / "report.csv", table.str());
  io::write_json(dir / "report.json", merged);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driftlab " + std::string(kVersion) + ": spectra of drift Laplacians on model weighted manifolds"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "experiment config (YAML)")->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--seed", flags.seed, "random seed (u64)");
    sub->add_option("--format", flags.format, "csv, json or both")->check(CLI::IsMember({"csv", "json", "both"}));
    sub->add_option("--jobs", flags.jobs, "worker threads")->check(CLI::Range(1, 256));
  };
  std::map<std::string, int (*)(const Flags&)> commands{
      {"spectrum", cmd_spectrum}, {"bounds", cmd_bounds},         {"sobolev", cmd_sobolev},
      {"heat", cmd_heat},         {"collapse", cmd_collapse},     {"verify-all", cmd_verify_all},
      {"report", cmd_report}};
  const std::map<std::string, std::string> help{
      {"spectrum", "solve and export the lowest eigenpairs"},
      {"bounds", "evaluate the eigenvalue bound battery"},
      {"sobolev", "estimate the Sobolev constant and check the L1 inequality"},
      {"heat", "heat kernel checks and the trace / eigenvalue lower bounds"},
      {"collapse", "collapsing-domain convergence study"},
      {"verify-all", "acceptance suite on the built-in geometries"},
      {"report", "merge JSON artifacts into one summary table"}};
  for (const auto& [name, text] : help) add_common(app.add_subcommand(name, text));
  CLI11_PARSE(app, argc, argv);
  try {
    for (const auto& [name, fn] : commands)
      if (app.got_subcommand(name)) return fn(flags);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "driftlab: %s\n", e.what());
    return 2;
  }
  return 2;
}
