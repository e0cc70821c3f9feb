#pragma once

// Per-geometry pipeline: spectrum with a Richardson companion, bound battery,
// gradient estimate, Schrodinger equivalence, Sobolev constant and the heat
// kernel chain.  Nothing here touches the filesystem.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "driftlab/bounds.hpp"
#include "driftlab/eigensolve.hpp"
#include "driftlab/geometry.hpp"
#include "driftlab/heatkernel.hpp"
#include "driftlab/operators.hpp"
#include "driftlab/sobolev.hpp"

namespace driftlab {

struct AnalysisSettings {
  int k = 12;
  SolverOptions solver;
  int bound_j_max = 5;
  SobolevOptions sobolev;
  int l1_battery = 1000;
  int heat_points = 0;  // 0: per-topology default, see default_heat_points
  double heat_tol = 1e-8;
  double t_min = 0.05, t_max = 10.0;
  int t_count = 30;
  std::vector<double> t_grid;  // overrides the log grid when set
  EigenvalueSource heat_source = EigenvalueSource::Extrapolated;
  std::size_t thm4_k_max = 10;
  bool run_sobolev = true;
  bool run_heat = true;
};

struct EquivalenceReport {
  std::size_t count = 0;
  double max_abs = 0.0;
  double max_relative = 0.0;   // max |d| / max |lambda|
  double allowance = 0.0;      // max(1e-8, 10 disc. estimate), relative
  bool pass = false;
};

struct GeometryAnalysis {
  GeometrySpec spec;
  WeightedGeometry geometry;
  Spectrum spectrum;
  CurvatureSummary curvature;
  std::vector<BoundReport> bounds;
  std::optional<GradientCheck> gradient;
  RatioDiagnostics ratios;
  EquivalenceReport equivalence;
  std::optional<SobolevEstimate> sobolev, sobolev_alt;  // two seeds
  std::optional<L1Report> l1;
  std::optional<HeatKernelModel> heat;
  std::optional<GKernelReport> gkernel;
  std::optional<TraceBoundReport> trace;
  std::vector<Thm4Result> thm4;
  double seconds = 0.0;
};

inline std::vector<SpectralProblem> assemble_modes(const WeightedGeometry& g, bool schrodinger) {
  std::vector<SpectralProblem> out;
  const int cap = g.topology == Topology::SphereSymmetric ? g.azimuthal_mode_cap : 0;
  for (int m = 0; m <= cap; ++m)
    out.push_back(schrodinger ? assemble_schrodinger(g, m) : assemble_drift_laplacian(g, m));
  return out;
}

// Lowest k pairs with a Richardson companion on the coarsened grid.
inline Spectrum spectrum_with_estimate(const WeightedGeometry& g, int k, const SolverOptions& solver,
                                       bool schrodinger = false) {
  Spectrum fine = solve_lowest_modes(assemble_modes(g, schrodinger), k, solver);
  const WeightedGeometry c = coarsen(g);
  const Spectrum coarse = solve_lowest_modes(assemble_modes(c, schrodinger), k, solver);
  richardson(fine, coarse, c.spacing / g.spacing);
  return fine;
}

inline EquivalenceReport equivalence_report(const Spectrum& drift, const Spectrum& schrod,
                                            std::size_t count = 10) {
  EquivalenceReport r;
  r.count = std::min({count, drift.size(), schrod.size()});
  double scale = 0.0, est = 0.0;
  for (std::size_t i = 0; i < r.count; ++i) {
    r.max_abs = std::max(r.max_abs, std::abs(drift.eigenvalues[i] - schrod.eigenvalues[i]));
    scale = std::max(scale, std::abs(drift.eigenvalues[i]));
    if (!drift.discretization_estimate.empty())
      est = std::max(est, drift.discretization_estimate[i]);
  }
  r.max_relative = scale > 0 ? r.max_abs / scale : r.max_abs;
  r.allowance = std::max(1e-8, 10.0 * est / std::max(scale, 1e-300));
  r.pass = r.max_relative <= r.allowance;
  return r;
}

inline int default_heat_points(const WeightedGeometry& g) {
  switch (g.topology) {
    case Topology::SphereSymmetric: return 128;
    case Topology::Interval: return 513;
    case Topology::Circle: break;
  }
  return 2048;
}

inline GeometryAnalysis analyze_geometry(const GeometrySpec& spec, const AnalysisSettings& st) {
  const auto t0 = std::chrono::steady_clock::now();
  GeometryAnalysis a;
  a.spec = spec;
  a.geometry = spec.build();
  const WeightedGeometry& g = a.geometry;
  a.curvature = curvature_summary(g, static_cast<double>(g.dimension_n) + 1.0);

  a.spectrum = spectrum_with_estimate(g, st.k, st.solver);
  a.bounds = evaluate_bound_battery(g, a.spectrum, a.curvature, st.bound_j_max);
  a.ratios = ratio_diagnostics(a.spectrum, st.bound_j_max, g, a.curvature);
  const Spectrum schrod = spectrum_with_estimate(g, st.k, st.solver, true);
  a.equivalence = equivalence_report(a.spectrum, schrod);

  const bool neumann_like = g.has_constant_mode();
  if (neumann_like) {
    const double k_yang =
        g.dimension_n >= 2 ? std::max(0.0, -a.curvature.ric_phi_inf / (g.dimension_n - 1)) : 0.0;
    if (g.dimension_n >= 2 || a.curvature.ric_phi_inf >= -kHypothesisSlack) {
      const FirstEigenfunction f = first_eigenfunction_normalized(a.spectrum);
      a.gradient = gradient_estimate_check(f, a.spectrum.eigenvalues[1], g.dimension_n, k_yang, g);
    }
  }

  if (st.run_sobolev && neumann_like) {
    const Spectrum zonal = g.topology == Topology::SphereSymmetric
                               ? solve_lowest(assemble_drift_laplacian(g, 0), st.k, st.solver)
                               : a.spectrum;
    SobolevOptions so = st.sobolev;
    a.sobolev = estimate_sobolev_constant(g, zonal, so);
    // C_1 carries the lambda_1 of the full spectrum.
    a.sobolev->lambda1 = a.spectrum.eigenvalues[1];
    a.sobolev->c1_value = c1_constant(*a.sobolev, a.sobolev->lambda1, a.sobolev->V_phi);
    so.seed = st.sobolev.seed + 1;
    a.sobolev_alt = estimate_sobolev_constant(g, zonal, so);
    a.l1 = l1_inequality_check(g, zonal, *a.sobolev, st.l1_battery, st.sobolev.seed);

    for (std::size_t k = 1; k <= st.thm4_k_max && k < a.spectrum.size(); ++k)
      a.thm4.push_back(thm4_lower_bound(a.spectrum, *a.sobolev, k));

    if (st.run_heat) {
      const int hp = st.heat_points > 0 ? st.heat_points : default_heat_points(g);
      const WeightedGeometry hg = rebuild(g, hp);
      HeatKernelOptions ho;
      ho.t_min = st.t_min;
      ho.tol = st.heat_tol;
      ho.source = st.heat_source;
      ho.solver = st.solver;
      a.heat = build_heat_kernel_model(hg, ho);
      const auto t_grid = st.t_grid.empty() ? log_grid(st.t_min, st.t_max, st.t_count) : st.t_grid;
      const auto pts = sample_points(*a.heat, 9);
      a.gkernel = g_kernel_checks(*a.heat, t_grid, pts);
      a.trace = trace_bound_check(*a.heat, *a.sobolev, t_grid, pts);
    }
  }
  a.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return a;
}

// The built-in geometry set of verify-all.
inline std::vector<GeometrySpec> builtin_suite() {
  std::vector<GeometrySpec> out;
  auto add = [&](std::string id, Topology t, int n, std::string phi, std::vector<double> c) {
    GeometrySpec s;
    s.id = std::move(id);
    s.topology = t;
    s.n_points = n;
    s.phi.builtin = std::move(phi);
    s.phi.coefficients = std::move(c);
    out.push_back(s);
    return &out.back();
  };
  add("circle_flat", Topology::Circle, 4096, "zero", {});
  add("circle_cos", Topology::Circle, 4096, "cos", {1.0});
  add("interval_flat", Topology::Interval, 1025, "zero", {});
  {
    GeometrySpec* s = add("interval_ou", Topology::Interval, 1025, "quadratic", {1.0, 0.0});
    s->a = -3.0;
    s->b = 3.0;
  }
  add("sphere_flat", Topology::SphereSymmetric, 2048, "zero", {})->azimuthal_mode_cap = 5;
  add("sphere_cos", Topology::SphereSymmetric, 1024, "cos", {0.1})->azimuthal_mode_cap = 3;
  return out;
}

inline const GeometrySpec& find_builtin(const std::vector<GeometrySpec>& suite, const std::string& id) {
  for (const auto& s : suite)
    if (s.id == id) return s;
  throw InvalidArgument("unknown builtin geometry '" + id + "'");
}

}  // namespace driftlab
