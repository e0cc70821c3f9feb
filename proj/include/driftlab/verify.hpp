#pragma once

// verify-all: the acceptance criteria on the built-in geometry set, plus the
// artifact writers shared with the single-purpose subcommands.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "driftlab/collapse.hpp"
#include "driftlab/config.hpp"
#include "driftlab/io.hpp"
#include "driftlab/parallel.hpp"
#include "driftlab/suite.hpp"

namespace driftlab {

struct OutputFormat {
  bool csv = true, json = true;
  static OutputFormat parse(const std::string& s) {
    if (s == "csv") return {true, false};
    if (s == "json") return {false, true};
    if (s == "both") return {true, true};
    throw InvalidArgument("format must be csv, json or both, got '" + s + "'");
  }
};

inline io::RowTag row_tag(const GeometrySpec& spec, const std::string& settings_text) {
  return {spec.id, params_hash(canonical(spec) + settings_text)};
}

struct ArtifactParts {
  bool spectrum = true, bounds = true, sobolev = true, heat = true;
};

// Writes <dir>/<geometry id>/...; returns the files written.
inline std::vector<std::filesystem::path> write_analysis(const GeometryAnalysis& a,
                                                         const std::filesystem::path& dir,
                                                         const io::RowTag& tag, OutputFormat fmt,
                                                         ArtifactParts parts = {}) {
  std::vector<std::filesystem::path> out;
  const auto base = dir / a.spec.id;
  auto text = [&](const std::string& name, const std::string& body) {
    io::write_text(base / name, body);
    out.push_back(base / name);
  };
  auto json = [&](const std::string& name, const io::Json& j) {
    io::write_json(base / name, j);
    out.push_back(base / name);
  };
  if (parts.spectrum) {
    if (fmt.csv) {
      text("spectrum.csv", io::spectrum_csv(a.spectrum, tag).str());
      text("eigenfunctions.csv", io::eigenfunctions_csv(a.spectrum, a.geometry.grid, tag).str());
    }
    if (fmt.json) {
      io::Json j = io::spectrum_json(a.spectrum, tag);
      j["V_phi"] = io::jnum(a.curvature.weighted_volume_V_phi);
      j["ric_phi_inf"] = io::jnum(a.curvature.ric_phi_inf);
      j["diameter"] = io::jnum(a.curvature.diameter_d);
      j["equivalence"] = {{"max_relative", io::jnum(a.equivalence.max_relative)},
                          {"allowance", io::jnum(a.equivalence.allowance)},
                          {"pass", a.equivalence.pass}};
      json("spectrum.json", j);
    }
    std::vector<double> idx, val;
    for (std::size_t i = 0; i < a.spectrum.size(); ++i) {
      idx.push_back(static_cast<double>(i));
      val.push_back(a.spectrum.eigenvalues[i]);
    }
    text("spectrum.dat", io::two_column("index", "eigenvalue", idx, val, tag));
  }
  if (parts.bounds) {
    if (fmt.csv) text("bounds.csv", io::bounds_csv(a.bounds, tag).str());
    if (fmt.json) {
      io::Json j = io::bounds_json(a.bounds, tag);
      if (a.gradient)
        j["gradient_estimate"] = {{"slack", io::jnum(a.gradient->slack)},
                                  {"worst_coordinate", io::jnum(a.gradient->worst_coordinate)},
                                  {"points_used", a.gradient->points_used},
                                  {"k", io::jnum(a.gradient->k)}};
      j["ratio_diagnostics"] = {{"ratios", io::jvec(a.ratios.ratios)},
                                {"weyl_constant", io::jnum(a.ratios.weyl_constant)},
                                {"max_grad_phi", io::jnum(a.ratios.max_grad_phi)},
                                {"status", "empirical, no verdict"}};
      json("bounds.json", j);
    }
  }
  if (parts.sobolev && a.sobolev) {
    if (fmt.json) {
      io::Json j = io::sobolev_json(*a.sobolev, a.l1 ? &*a.l1 : nullptr, tag);
      if (a.sobolev_alt) j["c_o_estimate_alt_seed"] = io::jnum(a.sobolev_alt->c_o_estimate);
      json("sobolev.json", j);
    }
    if (fmt.csv) text("extremal.csv", io::extremal_csv(*a.sobolev, tag).str());
  }
  if (parts.heat && a.heat && a.gkernel && a.trace) {
    if (fmt.csv) text("trace.csv", io::trace_csv(*a.trace, tag).str());
    if (fmt.json) json("heat.json", io::heat_json(*a.heat, *a.gkernel, *a.trace, a.thm4, tag));
    std::vector<double> t, tr, b;
    for (const auto& r : a.trace->rows) {
      t.push_back(r.t);
      tr.push_back(r.trace);
      b.push_back(r.bound);
    }
    text("trace.dat", io::two_column("t", "trace", t, tr, tag));
    text("trace_bound.dat", io::two_column("t", "bound", t, b, tag));
  }
  return out;
}

inline std::vector<std::filesystem::path> write_collapse(const CollapseStudy& st,
                                                         const std::filesystem::path& dir,
                                                         const io::RowTag& tag, OutputFormat fmt) {
  std::vector<std::filesystem::path> out;
  const auto base = dir / "collapse";
  if (fmt.csv) {
    io::write_text(base / (st.geometry_id + ".csv"), io::collapse_csv(st, tag).str());
    out.push_back(base / (st.geometry_id + ".csv"));
  }
  if (fmt.json) {
    io::write_json(base / (st.geometry_id + ".json"), io::collapse_json(st, tag));
    out.push_back(base / (st.geometry_id + ".json"));
  }
  for (std::size_t ki = 0; ki < st.k_indices.size(); ++ki) {
    std::vector<double> e, d;
    for (std::size_t i = 0; i < st.epsilons.size(); ++i) {
      e.push_back(st.epsilons[i]);
      d.push_back(std::abs(st.at(i, ki).diff));
    }
    const auto p = base / (st.geometry_id + "_k" + std::to_string(st.k_indices[ki]) + ".dat");
    io::write_text(p, io::two_column("epsilon", "abs_diff", e, d, tag));
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Criteria

struct Criterion {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;         // never written to artifacts
  double runtime_limit = 0.0;   // 0: none
  bool runtime_ok() const { return runtime_limit <= 0 || seconds <= runtime_limit; }
};

struct VerifyOptions {
  AnalysisSettings settings;
  int jobs = 1;
  OutputFormat format;
};

struct VerifyResult {
  std::vector<Criterion> criteria;
  std::vector<GeometryAnalysis> analyses;
  std::vector<std::filesystem::path> files;
  double seconds = 0.0;
  bool pass() const {
    for (const auto& c : criteria)
      if (!c.pass) return false;
    return true;
  }
};

namespace detail {

inline std::string g3(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Slope of log(err) against log(h).
inline double observed_order(const std::vector<double>& h, const std::vector<double>& err) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < h.size(); ++i) {
    lx.push_back(std::log(h[i]));
    ly.push_back(std::log(err[i]));
  }
  return slope_fit(lx, ly);
}

struct AnalyticCase {
  std::string name;
  GeometrySpec spec;
  std::vector<double> expected;
  double tol;
};

inline std::vector<AnalyticCase> analytic_cases() {
  std::vector<AnalyticCase> out;
  const auto suite = builtin_suite();
  out.push_back({"circle", find_builtin(suite, "circle_flat"), {0, 1, 1, 4, 4, 9, 9, 16, 16}, 1e-5});
  out.push_back({"interval", find_builtin(suite, "interval_flat"), {0, 1, 4, 9, 16}, 1e-6});
  std::vector<double> sph;
  for (int l = 0; l <= 4; ++l)
    for (int m = 0; m < 2 * l + 1; ++m) sph.push_back(l * (l + 1.0));
  out.push_back({"sphere", find_builtin(suite, "sphere_flat"), sph, 1e-4});
  return out;
}

}  // namespace detail

inline VerifyResult run_verify_all(const VerifyOptions& opt, const std::filesystem::path& out_dir) {
  using detail::g3;
  const auto t_all = std::chrono::steady_clock::now();
  VerifyResult res;
  const std::string settings_text = canonical(opt.settings);
  const auto suite = builtin_suite();

  // Independent work items: suite analyses, analytic spectra, the two
  // collapse studies, the convergence-order studies.
  const auto cases = detail::analytic_cases();
  struct AnalyticOut {
    Spectrum s;
    double seconds = 0;
  };
  std::vector<AnalyticOut> analytic(cases.size());
  std::vector<GeometryAnalysis> analyses(suite.size());
  std::vector<std::pair<GeometrySpec, CollapseStudy>> collapse(2);
  std::vector<double> collapse_seconds(2, 0.0);
  const std::vector<double> epsilons{0.2, 0.1, 0.05, 0.025};
  const std::vector<int> k_indices{1, 2};
  {
    GeometrySpec a;
    a.id = "collapse_interval_cos";
    a.topology = Topology::Interval;
    a.a = 0;
    a.b = std::numbers::pi;
    a.phi.builtin = "cos";
    a.phi.coefficients = {0.3};
    GeometrySpec b;
    b.id = "collapse_circle_cos";
    b.topology = Topology::Circle;
    b.phi.builtin = "cos";
    b.phi.coefficients = {0.5};
    collapse[0].first = a;
    collapse[1].first = b;
  }
  const std::vector<int> order_grid{512, 1024, 2048, 4096};
  GeometrySpec cos_spec = find_builtin(suite, "circle_cos");
  std::vector<double> conj_dev(order_grid.size()), boch(order_grid.size()), hs(order_grid.size());
  Spectrum eq_drift, eq_schrod;
  double eq_seconds = 0.0;

  std::vector<std::function<void()>> tasks;
  for (std::size_t i = 0; i < suite.size(); ++i)
    tasks.push_back([&, i] { analyses[i] = analyze_geometry(suite[i], opt.settings); });
  for (std::size_t i = 0; i < cases.size(); ++i)
    tasks.push_back([&, i] {
      const auto t0 = std::chrono::steady_clock::now();
      analytic[i].s = spectrum_with_estimate(cases[i].spec.build(), static_cast<int>(cases[i].expected.size()),
                                             opt.settings.solver);
      analytic[i].seconds = detail::seconds_since(t0);
    });
  for (std::size_t i = 0; i < collapse.size(); ++i)
    tasks.push_back([&, i] {
      const auto t0 = std::chrono::steady_clock::now();
      CollapseOptions co;
      co.solver = opt.settings.solver;
      // The base grid size is irrelevant here; the study builds its own x-grids.
      collapse[i].second = run_collapse_study(collapse[i].first.build(64), k_indices, epsilons, co);
      collapse_seconds[i] = detail::seconds_since(t0);
    });
  tasks.push_back([&] {
    const auto t0 = std::chrono::steady_clock::now();
    const WeightedGeometry g = cos_spec.build();
    eq_drift = solve_lowest(assemble_drift_laplacian(g), 10, opt.settings.solver);
    eq_schrod = solve_lowest(assemble_schrodinger(g), 10, opt.settings.solver);
    eq_seconds = detail::seconds_since(t0);
  });
  tasks.push_back([&] {
    for (std::size_t i = 0; i < order_grid.size(); ++i) {
      const WeightedGeometry g = cos_spec.build(order_grid[i]);
      hs[i] = g.spacing;
      conj_dev[i] = discrete_conjugation_check(g, assemble_drift_laplacian(g), assemble_schrodinger(g)).relative;
      std::vector<double> u(g.size());
      for (std::size_t j = 0; j < u.size(); ++j) u[j] = std::sin(2.0 * g.grid[j]);
      boch[i] = bochner_residual(g, u);
    }
  });
  parallel_for(tasks.size(), opt.jobs, [&](std::size_t i) { tasks[i](); });

  // Artifacts, single writer.
  for (const auto& a : analyses) {
    const auto f = write_analysis(a, out_dir, row_tag(a.spec, settings_text), opt.format);
    res.files.insert(res.files.end(), f.begin(), f.end());
  }
  for (const auto& [spec, st] : collapse) {
    const auto f = write_collapse(st, out_dir, row_tag(spec, canonical(opt.settings) + "collapse"), opt.format);
    res.files.insert(res.files.end(), f.begin(), f.end());
  }

  // 1. Analytic spectra.
  {
    Criterion c{1, "analytic spectra", true, "", 0.0, 10.0};
    io::CsvTable t({"case", "index", "expected", "computed", "raw", "error", "tolerance"});
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto& s = analytic[i].s;
      const auto& best = s.best_eigenvalues();
      double worst = 0.0;
      for (std::size_t j = 0; j < cases[i].expected.size(); ++j) {
        const double err = std::abs(best[j] - cases[i].expected[j]);
        worst = std::max(worst, err);
        t.add(row_tag(cases[i].spec, settings_text),
              {cases[i].name, std::to_string(j), io::num(cases[i].expected[j]), io::num(best[j]),
               io::num(s.eigenvalues[j]), io::num(err), io::num(cases[i].tol)});
      }
      c.pass = c.pass && worst <= cases[i].tol;
      c.seconds = std::max(c.seconds, analytic[i].seconds);
      c.detail += (c.detail.empty() ? "" : "; ") + cases[i].name + " max err " + g3(worst) +
                  " (tol " + g3(cases[i].tol) + ")";
    }
    if (opt.format.csv) io::write_text(out_dir / "criteria" / "analytic.csv", t.str());
    res.criteria.push_back(c);
  }
  // 2. Unitary equivalence.
  {
    Criterion c{2, "unitary equivalence", true, "", eq_seconds, 0.0};
    double dmax = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
      dmax = std::max(dmax, std::abs(eq_drift.eigenvalues[i] - eq_schrod.eigenvalues[i]));
      scale = std::max(scale, std::abs(eq_drift.eigenvalues[i]));
    }
    const double rel = dmax / scale;
    const double order = detail::observed_order(hs, conj_dev);
    c.pass = rel <= 1e-8 && std::abs(order - 2.0) <= 0.3;
    c.detail = "spectra rel diff " + g3(rel) + " (tol 1e-08); conjugation order " + g3(order);
    io::CsvTable t({"n", "h", "conjugation_relative", "bochner_residual"});
    for (std::size_t i = 0; i < order_grid.size(); ++i)
      t.add(row_tag(cos_spec, settings_text),
            {std::to_string(order_grid[i]), io::num(hs[i]), io::num(conj_dev[i]), io::num(boch[i])});
    if (opt.format.csv) io::write_text(out_dir / "criteria" / "refinement.csv", t.str());
    res.criteria.push_back(c);
  }
  // 3. Collapse.
  {
    Criterion c{3, "collapsing domains", true, "", collapse_seconds[0] + collapse_seconds[1], 300.0};
    for (const auto& [spec, st] : collapse) {
      for (std::size_t ki = 0; ki < st.k_indices.size(); ++ki) {
        const double ord = st.fitted_order[ki];
        const double gap = std::abs(st.eps_limit[ki] - st.mu_limit[ki]);
        const bool ok = ord >= 1.7 && ord <= 2.3 && gap <= st.mu_limit_estimate[ki];
        c.pass = c.pass && ok;
        c.detail += (c.detail.empty() ? "" : "; ") + spec.id + " k=" + std::to_string(st.k_indices[ki]) +
                    " order " + g3(ord) + " limit gap " + g3(gap) + " <= " + g3(st.mu_limit_estimate[ki]);
      }
    }
    res.criteria.push_back(c);
  }
  // 4. Bound battery.
  {
    Criterion c{4, "bound battery", true, "", 0.0, 0.0};
    int checked = 0, failed = 0;
    std::string bad;
    for (const auto& a : analyses)
      for (const auto& r : a.bounds) {
        const bool lower = r.direction == Direction::Lower;
        const bool cheng13 = r.bound_name == "cheng_ric_nonneg" || r.bound_name == "cheng_ric_minus_k";
        if (r.verdict == Verdict::NotApplicable || !(lower || cheng13)) continue;
        ++checked;
        if (r.verdict != Verdict::Satisfied) {
          ++failed;
          bad += " " + a.spec.id + ":" + r.bound_name + "[" + std::to_string(r.target_index) + "]";
        }
      }
    double sharp = 0.0;
    for (const char* id : {"circle_flat", "interval_flat"})
      for (const auto& a : analyses)
        if (a.spec.id == id)
          sharp = std::max(sharp, std::abs(a.spectrum.best_eigenvalues()[1] -
                                           zhong_yang_value(a.curvature.diameter_d)));
    bool advisory = false, cheng2_verdict = false;
    for (const auto& a : analyses)
      for (const auto& r : a.bounds)
        if (r.bound_name == "cheng_ric_n_minus_1") {
          if (a.spec.id == "sphere_flat" && r.verdict == Verdict::Advisory) advisory = true;
          if (r.verdict == Verdict::Satisfied || r.verdict == Verdict::Violated) cheng2_verdict = true;
        }
    c.pass = failed == 0 && sharp <= 1e-5 && advisory && !cheng2_verdict;
    c.detail = std::to_string(checked) + " applicable bounds, " + std::to_string(failed) + " violated" + bad +
               "; Zhong-Yang sharpness " + g3(sharp) + "; Cheng(2) on sphere " +
               (advisory ? "Advisory" : "not Advisory");
    res.criteria.push_back(c);
  }
  // 5. Gradient estimate.
  {
    Criterion c{5, "gradient estimate", true, "", 0.0, 0.0};
    double worst = std::numeric_limits<double>::infinity(), circle = std::nan("");
    std::string skipped;
    for (const auto& a : analyses) {
      if (!a.gradient) {
        skipped += " " + a.spec.id;
        continue;
      }
      worst = std::min(worst, a.gradient->slack);
      if (a.spec.id == "circle_flat") circle = a.gradient->slack;
    }
    c.pass = worst >= -0.02 && std::abs(circle) <= 1e-3;
    c.detail = "min slack " + g3(worst) + "; circle equality slack " + g3(circle) +
               (skipped.empty() ? "" : "; hypothesis fails on" + skipped);
    res.criteria.push_back(c);
  }
  // 6. Sobolev / L1.
  {
    Criterion c{6, "Sobolev and L1 inequality", true, "", 0.0, 0.0};
    double holder = std::numeric_limits<double>::infinity(), slack = holder, spread = 0.0;
    for (const auto& a : analyses) {
      if (!a.l1) continue;
      holder = std::min(holder, a.l1->min_holder_relative_slack);
      slack = std::min(slack, a.l1->min_slack);
      spread = std::max(spread, std::abs(a.sobolev->c_o_estimate / a.sobolev_alt->c_o_estimate - 1.0));
    }
    c.pass = holder >= -1e-12 && slack >= 0 && spread <= 0.02;
    c.detail = "Holder rel slack " + g3(holder) + "; L1 min slack " + g3(slack) + "; C_o seed spread " +
               g3(spread);
    res.criteria.push_back(c);
  }
  // 7. Heat machinery.
  {
    Criterion c{7, "heat kernel and trace bound", true, "", 0.0, 0.0};
    double stoch = 0, mean = 0, semi = 0;
    bool trace = true, thm4 = true;
    for (const auto& a : analyses) {
      if (!a.gkernel) continue;
      stoch = std::max(stoch, a.gkernel->max_stochastic);
      mean = std::max(mean, a.gkernel->max_mean);
      semi = std::max(semi, a.gkernel->max_semigroup);
      trace = trace && a.trace->trace_ok && a.trace->robust_ok;
      for (const auto& r : a.thm4) thm4 = thm4 && r.satisfied;
    }
    double circle_gap = std::nan("");
    for (const auto& a : analyses)
      if (a.spec.id == "circle_flat" && a.heat) {
        double ref = 0.0;
        for (int m = 1; m <= 40; ++m) ref += 2.0 * std::exp(-1.0 * m * m);
        circle_gap = std::abs(heat_trace(*a.heat, 1.0) - ref);
      }
    c.pass = stoch <= 1e-6 && mean <= 1e-8 && semi <= 1e-8 && trace && thm4 && circle_gap <= 1e-10;
    c.detail = "stochastic " + g3(stoch) + "; G mean " + g3(mean) + "; semigroup " + g3(semi) +
               "; trace bound " + (trace ? "holds" : "fails") + "; thm4 " + (thm4 ? "Satisfied" : "Violated") +
               "; circle trace(1) gap " + g3(circle_gap);
    res.criteria.push_back(c);
  }
  // 8. Bochner.
  {
    Criterion c{8, "Bochner formula", true, "", 0.0, 0.0};
    const double order = detail::observed_order(hs, boch);
    c.pass = std::abs(order - 2.0) <= 0.3;
    c.detail = "residual order " + g3(order) + " (n = 512..4096)";
    res.criteria.push_back(c);
  }

  io::CsvTable summary({"criterion", "name", "pass", "detail"});
  io::Json js = io::Json::object();
  js["kind"] = "verify_all";
  js["version"] = kVersion;
  js["params_hash"] = params_hash(settings_text);
  js["criteria"] = io::Json::array();
  const io::RowTag tag{"suite", params_hash(settings_text)};
  for (const auto& c : res.criteria) {
    summary.add(tag, {std::to_string(c.id), c.name, c.pass ? "pass" : "fail", c.detail});
    js["criteria"].push_back({{"criterion", c.id}, {"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  }
  js["pass"] = res.pass();
  if (opt.format.csv) io::write_text(out_dir / "summary.csv", summary.str());
  if (opt.format.json) io::write_json(out_dir / "summary.json", js);
  res.analyses = std::move(analyses);
  res.seconds = detail::seconds_since(t_all);
  return res;
}

}  // namespace driftlab
