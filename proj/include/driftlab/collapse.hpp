#pragma once

// Neumann spectrum of the thin domain under the graph y = eps e^{-phi(x)}
// and its convergence to the drift spectrum of the base.
//
// The domain is pulled back to (x, s) in base x [0, 1] by y = s eps psi(x),
// psi = e^{-phi}.  With g the base metric factor the Dirichlet form becomes
//   int sqrt(g) eps psi [ (u_x + s phi' u_s)^2 / g + u_s^2 / (eps psi)^2 ] dx ds,
// discretised with bilinear elements, psi and phi' constant per x-cell, and a
// lumped mass.  For u independent of s the form is exactly eps times the
// finite-volume drift form of the base on the same x-grid, so the difference
// mu_k(eps) - mu_k is measured without a base discretisation offset.

#include <Eigen/Sparse>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "driftlab/eigensolve.hpp"
#include "driftlab/error.hpp"
#include "driftlab/geometry.hpp"
#include "driftlab/operators.hpp"

namespace driftlab {

struct CollapsedDomainProblem {
  WeightedGeometry base;  // the base at the x-resolution of the mesh
  double epsilon = 0.0;
  int nx = 0;             // x-cells
  int ns = 0;             // s-cells
  SpectralProblem problem;
  SparseMatrix transverse;  // the u_s^2 / (eps psi)^2 part of the form
  double min_jacobian = 0.0;

  Eigen::Index x_nodes() const { return static_cast<Eigen::Index>(base.size()); }
  Eigen::Index index(Eigen::Index i, Eigen::Index j) const { return j * x_nodes() + i; }
};

namespace detail {

inline WeightedGeometry base_at(const WeightedGeometry& base, int nx) {
  detail::require(base.topology == Topology::Circle || base.topology == Topology::Interval,
                  "collapse: base must be a circle or an interval");
  detail::require(base.topology == Topology::Circle || base.bc == BoundaryCondition::Neumann,
                  "collapse: interval base needs the Neumann condition");
  return rebuild(base, base.periodic() ? nx : nx + 1);
}

}  // namespace detail

inline CollapsedDomainProblem assemble_collapsed(const WeightedGeometry& base, double epsilon,
                                                 int nx, int ns) {
  detail::require(epsilon > 0, "assemble_collapsed: epsilon must be positive");
  detail::require(nx >= 32, "assemble_collapsed: nx must be >= 32");
  detail::require(ns >= 4, "assemble_collapsed: ns must be >= 4");
  CollapsedDomainProblem c;
  c.base = detail::base_at(base, nx);
  c.epsilon = epsilon;
  c.nx = nx;
  c.ns = ns;
  const WeightedGeometry& b = c.base;
  const Eigen::Index nxn = c.x_nodes();
  const Eigen::Index n = nxn * (ns + 1);
  const double g = b.metric_factor();
  const double rho = std::sqrt(g);
  const double hx = b.spacing;
  const double hs = 1.0 / ns;

  std::vector<Eigen::Triplet<double>> tk, tt;
  tk.reserve(static_cast<std::size_t>(nx * ns * 16));
  tt.reserve(static_cast<std::size_t>(nx * ns * 16));
  const std::array<double, 3> gp = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const std::array<double, 3> gw = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  c.min_jacobian = std::numeric_limits<double>::infinity();
  for (int e = 0; e < nx; ++e) {
    const int il = e, ir = b.periodic() ? (e + 1) % nx : e + 1;
    const double pl = b.weight_phi[static_cast<std::size_t>(il)];
    const double pr = b.weight_phi[static_cast<std::size_t>(ir)];
    const double psi = std::exp(-0.5 * (pl + pr));
    const double dphi = (pr - pl) / hx;
    const double jac = epsilon * psi * rho;
    if (!(jac > 0) || !std::isfinite(jac))
      throw InvalidArgument("assemble_collapsed: nonpositive Jacobian in x-cell " +
                            std::to_string(e));
    c.min_jacobian = std::min(c.min_jacobian, jac);
    const double ey = 1.0 / (epsilon * psi * epsilon * psi);
    for (int j = 0; j < ns; ++j) {
      const Eigen::Index nodes[4] = {c.index(il, j), c.index(ir, j), c.index(il, j + 1),
                                     c.index(ir, j + 1)};
      double ke[4][4] = {}, te[4][4] = {};
      for (int qx = 0; qx < 3; ++qx)
        for (int qs = 0; qs < 3; ++qs) {
          const double xi = 0.5 * (1 + gp[static_cast<std::size_t>(qx)]);
          const double et = 0.5 * (1 + gp[static_cast<std::size_t>(qs)]);
          const double w = gw[static_cast<std::size_t>(qx)] * gw[static_cast<std::size_t>(qs)] *
                           0.25 * hx * hs;
          const double s = (j + et) * hs;
          // bilinear basis derivatives d/dx, d/ds at (xi, et)
          const double dx[4] = {-(1 - et) / hx, (1 - et) / hx, -et / hx, et / hx};
          const double ds[4] = {-(1 - xi) / hs, -xi / hs, (1 - xi) / hs, xi / hs};
          const double a11 = 1.0 / g, a12 = s * dphi / g, a22 = s * s * dphi * dphi / g + ey;
          for (int p = 0; p < 4; ++p)
            for (int q = 0; q < 4; ++q) {
              ke[p][q] += w * jac *
                          (a11 * dx[p] * dx[q] + a12 * (dx[p] * ds[q] + ds[p] * dx[q]) +
                           a22 * ds[p] * ds[q]);
              te[p][q] += w * jac * ey * ds[p] * ds[q];
            }
        }
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q) {
          tk.emplace_back(nodes[p], nodes[q], ke[p][q]);
          tt.emplace_back(nodes[p], nodes[q], te[p][q]);
        }
    }
  }
  std::vector<Eigen::Triplet<double>> tm;
  for (Eigen::Index i = 0; i < nxn; ++i) {
    const double psi = std::exp(-b.weight_phi[static_cast<std::size_t>(i)]);
    for (int j = 0; j <= ns; ++j) {
      const double cs = (j == 0 || j == ns) ? 0.5 * hs : hs;
      tm.emplace_back(c.index(i, j), c.index(i, j),
                      epsilon * rho * psi * b.cell_width[static_cast<std::size_t>(i)] * cs);
    }
  }
  SpectralProblem& p = c.problem;
  p.stiffness = detail::from_triplets(n, tk);
  p.mass = detail::from_triplets(n, tm);
  c.transverse = detail::from_triplets(n, tt);
  p.label = ProblemLabel::CollapseNeumann;
  p.geometry_ref = b.id;
  p.grid_size = static_cast<std::size_t>(n);
  p.has_constant_mode = true;
  p.dof_nodes.resize(static_cast<std::size_t>(n));
  std::iota(p.dof_nodes.begin(), p.dof_nodes.end(), 0);
  return c;
}

// Share of the Dirichlet energy carried by s-derivatives.
inline double transverse_energy_fraction(const CollapsedDomainProblem& c,
                                         const Eigen::VectorXd& u) {
  const double total = u.dot(c.problem.stiffness * u);
  const double tr = u.dot(c.transverse * u);
  // Constant-like vectors carry only rounding-level energy.
  const double floor = 1e3 * std::numeric_limits<double>::epsilon() * detail::norm1(c.problem.stiffness) *
                       u.dot(c.problem.mass * u) / c.problem.mass.diagonal().minCoeff();
  return total > floor ? tr / total : 0.0;
}

struct CollapseBand {
  std::vector<double> values;     // longitudinal band, ascending
  std::vector<double> fractions;  // transverse energy fraction of each kept pair
  std::vector<Eigen::VectorXd> profiles;  // s-averages on the x-grid
  int excluded = 0;               // transverse pairs skipped below the band
};

// The lowest `count` eigenvalues of the longitudinal band.
inline CollapseBand collapsed_band(const CollapsedDomainProblem& c, int count,
                                   const SolverOptions& solver = {}) {
  int request = count + 4;
  const Eigen::Index nxn = c.x_nodes();
  for (;;) {
    request = std::min<int>(request, static_cast<int>(c.problem.size()) - 2);
    const Spectrum s = solve_lowest(c.problem, request, solver);
    CollapseBand band;
    for (std::size_t i = 0; i < s.size() && static_cast<int>(band.values.size()) < count; ++i) {
      const Eigen::VectorXd u = s.eigenvectors.col(static_cast<Eigen::Index>(i));
      const double f = transverse_energy_fraction(c, u);
      if (f > 0.5) {
        ++band.excluded;
        continue;
      }
      Eigen::VectorXd prof = Eigen::VectorXd::Zero(nxn);
      for (int j = 0; j <= c.ns; ++j)
        prof += ((j == 0 || j == c.ns) ? 0.5 : 1.0) / c.ns * u.segment(j * nxn, nxn);
      band.values.push_back(s.eigenvalues[i]);
      band.fractions.push_back(f);
      band.profiles.push_back(std::move(prof));
    }
    if (static_cast<int>(band.values.size()) >= count) return band;
    if (request >= static_cast<int>(c.problem.size()) - 2)
      throw Error("collapsed_band: longitudinal band has fewer than " + std::to_string(count) +
                  " pairs");
    request *= 2;
  }
}

// Band eigenvalues matched to base modes 0..count-1 by profile overlap, so
// that nearly degenerate pairs whose order flips between grids stay paired.
inline std::vector<double> match_band_to_base(const CollapseBand& band, const Spectrum& base,
                                              const SparseMatrix& base_mass, std::size_t count) {
  const Eigen::VectorXd w = Eigen::VectorXd(base_mass.diagonal());
  std::vector<bool> used(band.values.size(), false);
  std::vector<double> out;
  for (std::size_t k = 0; k < count; ++k) {
    const Eigen::VectorXd v = base.eigenvectors.col(static_cast<Eigen::Index>(k));
    double best = -1.0;
    std::size_t pick = 0;
    for (std::size_t b = 0; b < band.values.size(); ++b) {
      if (used[b]) continue;
      const auto& p = band.profiles[b];
      const double o = std::abs(p.dot(w.cwiseProduct(v))) / std::sqrt(p.dot(w.cwiseProduct(p)));
      if (o > best) {
        best = o;
        pick = b;
      }
    }
    used[pick] = true;
    out.push_back(band.values[pick]);
  }
  return out;
}

struct CollapseOptions {
  int ns = 8;
  int nx_start = 64;
  int nx_max = 2048;
  double certify_fraction = 0.1;  // Richardson estimate of the difference vs its value at eps_min
  SolverOptions solver;
};

struct CollapseRecord {
  double epsilon = 0.0;
  int k = 0;
  int nx = 0;
  double mu_eps = 0.0;        // mu_k(eps) on the accepted mesh
  double mu_base_h = 0.0;     // base drift mu_k on the same x-grid
  double diff = 0.0;          // mu_eps - mu_base_h
  double diff_estimate = 0.0; // Richardson estimate of the discretisation error in diff
  double mu_eps_extrapolated = 0.0;
  double ratio_to_eps2 = 0.0;
};

struct CollapseStudy {
  std::string geometry_id;
  std::vector<int> k_indices;
  std::vector<double> epsilons;
  std::vector<CollapseRecord> records;  // epsilon-major
  std::vector<double> mu_limit;         // base drift mu_k, Richardson-extrapolated
  std::vector<double> mu_limit_estimate;
  std::vector<double> fitted_order;     // NaN when exact
  std::vector<double> eps_limit;        // eps -> 0 Richardson limit of mu_k(eps)
  std::vector<double> eps2_ratio_spread;  // max/min of diff / eps^2 over the last three eps
  bool exact = false;
  int nx_used = 0;

  const CollapseRecord& at(std::size_t e, std::size_t ki) const {
    return records.at(e * k_indices.size() + ki);
  }
};

namespace detail {

inline double slope_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

inline CollapseStudy run_collapse_study(const WeightedGeometry& base, const std::vector<int>& k_indices,
                                        const std::vector<double>& epsilons,
                                        const CollapseOptions& opt = {}) {
  detail::require(epsilons.size() >= 4, "run_collapse_study: need at least 4 epsilons");
  for (std::size_t i = 1; i < epsilons.size(); ++i)
    detail::require(epsilons[i] < epsilons[i - 1], "run_collapse_study: epsilons must decrease");
  detail::require(!k_indices.empty(), "run_collapse_study: no k indices");
  const int kmax = *std::max_element(k_indices.begin(), k_indices.end());
  detail::require(*std::min_element(k_indices.begin(), k_indices.end()) >= 0,
                  "run_collapse_study: k must be >= 0");
  const int count = kmax + 1;

  CollapseStudy st;
  st.geometry_id = base.id;
  st.k_indices = k_indices;
  st.epsilons = epsilons;
  const std::size_t ne = epsilons.size(), nk = k_indices.size();

  struct Level {
    int nx;
    std::vector<double> base_mu;               // index k
    std::vector<std::vector<double>> eps_mu;   // [eps][k]
  };
  auto solve_level = [&](int nx) {
    Level lv;
    lv.nx = nx;
    const WeightedGeometry b = detail::base_at(base, nx);
    const SpectralProblem bp = assemble_drift_laplacian(b);
    const Spectrum bs = solve_lowest(bp, count, opt.solver);
    lv.base_mu = bs.eigenvalues;
    for (double eps : epsilons) {
      const CollapseBand band =
          collapsed_band(assemble_collapsed(base, eps, nx, opt.ns), count + 2, opt.solver);
      lv.eps_mu.push_back(match_band_to_base(band, bs, bp.mass, static_cast<std::size_t>(count)));
    }
    return lv;
  };

  Level coarse = solve_level(opt.nx_start / 2);
  Level fine = solve_level(opt.nx_start);
  for (;;) {
    bool exact = true, certified = true;
    std::string worst;
    for (std::size_t ki = 0; ki < nk; ++ki) {
      const auto k = static_cast<std::size_t>(k_indices[ki]);
      const double dmin = fine.eps_mu[ne - 1][k] - fine.base_mu[k];
      for (std::size_t e = 0; e < ne; ++e) {
        const double dh = fine.eps_mu[e][k] - fine.base_mu[k];
        const double d2h = coarse.eps_mu[e][k] - coarse.base_mu[k];
        if (std::abs(dh) > 1e-9 * std::max(1.0, std::abs(fine.base_mu[k]))) exact = false;
        if (std::abs(dh - d2h) / 3.0 > opt.certify_fraction * std::abs(dmin) && certified) {
          certified = false;
          worst = "k = " + std::to_string(k) + ", eps = " + std::to_string(epsilons[e]);
        }
      }
    }
    st.exact = exact;
    if (exact || certified) break;
    if (fine.nx * 2 > opt.nx_max)
      throw UnderResolved("run_collapse_study: discretisation floor not reached by nx = " +
                          std::to_string(fine.nx) + "; limiting " + worst);
    coarse = std::move(fine);
    fine = solve_level(coarse.nx * 2);
  }
  st.nx_used = fine.nx;

  // Reference limit: base drift eigenvalues Richardson-extrapolated on the finest pair.
  for (std::size_t ki = 0; ki < nk; ++ki) {
    const auto k = static_cast<std::size_t>(k_indices[ki]);
    const double d = fine.base_mu[k] - coarse.base_mu[k];
    st.mu_limit.push_back(fine.base_mu[k] + d / 3.0);
    st.mu_limit_estimate.push_back(std::abs(d) / 3.0);
  }
  for (std::size_t e = 0; e < ne; ++e)
    for (std::size_t ki = 0; ki < nk; ++ki) {
      const auto k = static_cast<std::size_t>(k_indices[ki]);
      CollapseRecord r;
      r.epsilon = epsilons[e];
      r.k = k_indices[ki];
      r.nx = fine.nx;
      r.mu_eps = fine.eps_mu[e][k];
      r.mu_base_h = fine.base_mu[k];
      r.diff = r.mu_eps - r.mu_base_h;
      const double d2h = coarse.eps_mu[e][k] - coarse.base_mu[k];
      r.diff_estimate = std::abs(r.diff - d2h) / 3.0;
      r.mu_eps_extrapolated = r.mu_eps + (r.mu_eps - coarse.eps_mu[e][k]) / 3.0;
      r.ratio_to_eps2 = r.diff / (r.epsilon * r.epsilon);
      st.records.push_back(r);
    }
  for (std::size_t ki = 0; ki < nk; ++ki) {
    // eps -> 0 limit from the two smallest epsilons, assuming an eps^2 leading term.
    const auto& a = st.at(ne - 2, ki);
    const auto& b = st.at(ne - 1, ki);
    const double r2 = (a.epsilon / b.epsilon) * (a.epsilon / b.epsilon);
    st.eps_limit.push_back(b.mu_eps_extrapolated -
                           (a.mu_eps_extrapolated - b.mu_eps_extrapolated) / (r2 - 1.0));
    if (st.exact) {
      st.fitted_order.push_back(std::nan(""));
      st.eps2_ratio_spread.push_back(std::nan(""));
      continue;
    }
    std::vector<double> lx, ly;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t e = ne - 3; e < ne; ++e) {
      const auto& r = st.at(e, ki);
      lx.push_back(std::log(r.epsilon));
      ly.push_back(std::log(std::abs(r.diff)));
      lo = std::min(lo, std::abs(r.ratio_to_eps2));
      hi = std::max(hi, std::abs(r.ratio_to_eps2));
    }
    st.fitted_order.push_back(detail::slope_fit(lx, ly));
    st.eps2_ratio_spread.push_back(hi / lo);
  }
  return st;
}

}  // namespace driftlab
