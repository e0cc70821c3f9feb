#pragma once

// Heat kernel of the drift Laplacian by truncated eigenexpansion, and the
// chain of estimates that turns a Sobolev constant into a trace bound and
// an eigenvalue lower bound.
//
// The model stores an orthonormal basis sampled on quadrature points: grid
// nodes in 1-D, a (theta, varphi) tensor on the sphere whose varphi rule is
// exact for every retained product of azimuthal modes.  Truncation is
// certified from the B-orthonormality of the full discrete eigenbasis:
// sum_i v_i(x)^2 = 1 / M_xx, so every omitted block contributes at most
// e^{-lambda_next t} / min M to the kernel.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "driftlab/eigensolve.hpp"
#include "driftlab/error.hpp"
#include "driftlab/geometry.hpp"
#include "driftlab/operators.hpp"
#include "driftlab/sobolev.hpp"

namespace driftlab {

enum class EigenvalueSource { Discrete, Extrapolated };

struct HeatKernelOptions {
  double t_min = 0.05;
  double tol = 1e-8;
  EigenvalueSource source = EigenvalueSource::Discrete;
  SolverOptions solver;
  int max_azimuthal_mode = 200;
};

struct HeatKernelModel {
  struct OmittedBlock {
    double count = 0;          // eigenvalues left out
    double lambda_next = 0.0;  // lower bound for all of them
    double multiplicity = 1;   // angular factor at x = y
  };

  std::string geometry_id;
  Topology topology = Topology::Circle;
  int dimension_n = 1;
  double radius = 1.0;
  double V_phi = 0.0;
  double t_min = 0.05;
  double tol = 1e-8;
  EigenvalueSource source = EigenvalueSource::Discrete;

  Eigen::VectorXd eigenvalues;  // one per basis column
  std::vector<int> azimuthal_mode;
  Eigen::Index constant_column = 0;
  Eigen::MatrixXd basis;        // points x modes
  Eigen::VectorXd weights;      // quadrature weights, e^{-phi} dV included
  std::vector<double> coord;    // x or theta per point
  std::vector<double> coord_phi;  // varphi per point (sphere)
  int n_varphi = 1;

  std::vector<OmittedBlock> omitted;
  int m_max = 0;               // azimuthal modes kept (sphere)
  double n_theta = 0;          // profile dimension (sphere)
  double min_mass = 0.0;

  Eigen::Index points() const { return basis.rows(); }
  Eigen::Index mode_cap() const { return basis.cols(); }

  // Uniform bound on |H_truncated(x,y,t) - H(x,y,t)| for the discrete operator.
  double truncation_bound(double t) const {
    double s = 0.0;
    for (const auto& b : omitted)
      if (b.count > 0) s += b.multiplicity * std::exp(-b.lambda_next * t);
    s += azimuthal_tail(t, 2.0);
    return s / min_mass;
  }

  // Bound on the omitted part of the trace sum_i e^{-lambda_i t}.
  double trace_truncation_bound(double t) const {
    double s = 0.0;
    for (const auto& b : omitted) s += b.count * b.multiplicity * std::exp(-b.lambda_next * t);
    s += azimuthal_tail(t, 2.0 * n_theta);
    return s;
  }

  // Omitted azimuthal modes m > m_max: every eigenvalue is >= m^2 / R^2.
  double azimuthal_tail(double t, double factor) const {
    if (topology != Topology::SphereSymmetric) return 0.0;
    double s = 0.0;
    for (int m = m_max + 1;; ++m) {
      const double term = factor * std::exp(-m * m * t / (radius * radius));
      s += term;
      if (term < 1e-300 || term < 1e-18 * s) break;
    }
    return s;
  }

  void check_time(double t) const {
    if (!(t >= t_min))
      throw InvalidArgument("heat kernel: t = " + std::to_string(t) +
                            " is below the certified range [" + std::to_string(t_min) +
                            ", inf)");
  }

  // Factors below e^-300 are zeroed so products never go subnormal.
  Eigen::VectorXd decay(double t) const {
    return (-t * eigenvalues.array()).unaryExpr([](double x) { return x < -300.0 ? 0.0 : std::exp(x); }).matrix();
  }

  // H(a, ., t) over all points.
  Eigen::VectorXd kernel_row(Eigen::Index a, double t, bool subtract_constant = false) const {
    check_time(t);
    Eigen::VectorXd c = decay(t).cwiseProduct(basis.row(a).transpose());
    if (subtract_constant) c[constant_column] = 0.0;
    return basis * c;
  }

  // H(a, ., t) for every a in `pts`, one column each.
  Eigen::MatrixXd kernel_rows(const std::vector<Eigen::Index>& pts, double t,
                              bool subtract_constant = false) const {
    check_time(t);
    Eigen::VectorXd d = decay(t);
    if (subtract_constant) d[constant_column] = 0.0;
    Eigen::MatrixXd c(basis.cols(), static_cast<Eigen::Index>(pts.size()));
    for (std::size_t j = 0; j < pts.size(); ++j)
      c.col(static_cast<Eigen::Index>(j)) = d.cwiseProduct(basis.row(pts[j]).transpose());
    return basis * c;
  }

  double kernel_entry(Eigen::Index a, Eigen::Index b, double t, bool subtract_constant = false) const {
    check_time(t);
    Eigen::VectorXd c = decay(t);
    if (subtract_constant) c[constant_column] = 0.0;
    return (basis.row(a).array() * basis.row(b).array() * c.transpose().array()).sum();
  }
};

namespace detail {

struct ModeSolve {
  Spectrum spectrum;
  std::size_t retained = 0;
  double lambda_next = 0.0;
  double omitted = 0.0;
};

// Enough eigenpairs of one problem that the first omitted eigenvalue keeps its
// kernel contribution below `budget` at t_min.
inline ModeSolve solve_for_heat(const SpectralProblem& p, double min_mass, double budget,
                                double t_min, const SolverOptions& solver) {
  const Eigen::Index n = p.size();
  const double needed = std::log(1.0 / (budget * min_mass)) / t_min;
  Eigen::Index k = std::min<Eigen::Index>(32, n - 2);
  ModeSolve out;
  for (;;) {
    const bool full = k > n / 3 || k >= n - 2;
    out.spectrum = full ? solve_dense(p, n) : solve_lowest(p, static_cast<int>(k), solver);
    if (full) {
      out.spectrum.azimuthal_mode.assign(static_cast<std::size_t>(n), p.azimuthal_mode);
      out.spectrum.azimuthal_parity.assign(static_cast<std::size_t>(n), 0);
      out.retained = static_cast<std::size_t>(n);
      return out;
    }
    if (out.spectrum.eigenvalues.back() >= needed) {
      out.retained = static_cast<std::size_t>(k - 1);
      out.lambda_next = out.spectrum.eigenvalues.back();
      out.omitted = static_cast<double>(n) - out.retained;
      return out;
    }
    k *= 2;
  }
}

inline void extrapolate_values(const WeightedGeometry& g, int mode, ModeSolve& fine,
                               const SolverOptions& solver) {
  const WeightedGeometry coarse = coarsen(g);
  const double q = std::pow(coarse.spacing / g.spacing, 2) - 1.0;
  const SpectralProblem pc = assemble_drift_laplacian(coarse, mode);
  const std::size_t count = std::min<std::size_t>(fine.retained, static_cast<std::size_t>(pc.size() / 4));
  if (count < 1) return;
  const Spectrum sc = solve_lowest(pc, static_cast<int>(count), solver);
  for (std::size_t i = 0; i < count; ++i)
    fine.spectrum.eigenvalues[i] += (fine.spectrum.eigenvalues[i] - sc.eigenvalues[i]) / q;
}

}  // namespace detail

inline HeatKernelModel build_heat_kernel_model(const WeightedGeometry& g,
                                               const HeatKernelOptions& opt = {}) {
  detail::require(opt.t_min > 0 && opt.tol > 0, "build_heat_kernel_model: t_min and tol must be positive");
  detail::require(g.has_constant_mode(),
                  "build_heat_kernel_model: needs a closed manifold or Neumann boundary");
  HeatKernelModel model;
  model.geometry_id = g.id;
  model.topology = g.topology;
  model.dimension_n = g.dimension_n;
  model.radius = g.radius;
  model.t_min = opt.t_min;
  model.tol = opt.tol;
  model.source = opt.source;
  model.V_phi = weighted_volume(g);

  const SpectralProblem p0 = assemble_drift_laplacian(g, 0);
  const Eigen::VectorXd mass = Eigen::VectorXd(p0.mass.diagonal());
  model.min_mass = mass.minCoeff();
  const bool sphere = g.topology == Topology::SphereSymmetric;

  // Azimuthal cut-off: the omitted modes alone must stay below tol / 2.
  if (sphere) {
    model.n_theta = static_cast<double>(g.size());
    model.m_max = 0;
    while (model.azimuthal_tail(opt.t_min, 2.0) / model.min_mass > 0.5 * opt.tol) {
      ++model.m_max;
      if (model.m_max > opt.max_azimuthal_mode)
        throw InvalidArgument("build_heat_kernel_model: t_min too small for the azimuthal budget");
    }
  }
  const int n_problems = sphere ? model.m_max + 1 : 1;
  const double budget = 0.5 * opt.tol / (2.0 * n_problems);

  struct Part {
    int mode;
    detail::ModeSolve solve;
  };
  std::vector<Part> parts;
  for (int m = 0; m < n_problems; ++m) {
    const SpectralProblem p = m == 0 ? p0 : assemble_drift_laplacian(g, m);
    Part part{m, detail::solve_for_heat(p, model.min_mass, budget, opt.t_min, opt.solver)};
    if (opt.source == EigenvalueSource::Extrapolated)
      detail::extrapolate_values(g, m, part.solve, opt.solver);
    if (part.solve.omitted > 0)
      model.omitted.push_back({part.solve.omitted, part.solve.lambda_next, m == 0 ? 1.0 : 2.0});
    parts.push_back(std::move(part));
  }

  // Quadrature points and basis columns.
  const Eigen::Index nodes = p0.size();
  model.n_varphi = sphere ? 2 * model.m_max + 2 : 1;
  const Eigen::Index npts = nodes * model.n_varphi;
  Eigen::Index ncols = 0;
  for (const auto& part : parts)
    ncols += static_cast<Eigen::Index>(part.solve.retained) * (part.mode == 0 ? 1 : 2);
  model.basis.resize(npts, ncols);
  model.eigenvalues.resize(ncols);
  model.weights.resize(npts);
  model.coord.resize(static_cast<std::size_t>(npts));
  model.coord_phi.assign(static_cast<std::size_t>(npts), 0.0);
  for (Eigen::Index i = 0; i < nodes; ++i)
    for (int q = 0; q < model.n_varphi; ++q) {
      const Eigen::Index a = i * model.n_varphi + q;
      model.weights[a] = mass[i] / model.n_varphi;
      model.coord[static_cast<std::size_t>(a)] = g.grid[static_cast<std::size_t>(p0.dof_nodes[static_cast<std::size_t>(i)])];
      model.coord_phi[static_cast<std::size_t>(a)] = 2.0 * std::numbers::pi * q / model.n_varphi;
    }
  Eigen::Index col = 0;
  for (const auto& part : parts) {
    const Spectrum& s = part.solve.spectrum;
    for (std::size_t j = 0; j < part.solve.retained; ++j) {
      const auto v = s.eigenvectors.col(static_cast<Eigen::Index>(j));
      for (int parity = 0; parity < (part.mode == 0 ? 1 : 2); ++parity) {
        for (Eigen::Index i = 0; i < nodes; ++i)
          for (int q = 0; q < model.n_varphi; ++q) {
            const double ang = part.mode * 2.0 * std::numbers::pi * q / model.n_varphi;
            const double factor = part.mode == 0 ? 1.0
                                  : parity == 0  ? std::sqrt(2.0) * std::cos(ang)
                                                 : std::sqrt(2.0) * std::sin(ang);
            model.basis(i * model.n_varphi + q, col) = v[i] * factor;
          }
        model.eigenvalues[col] = s.eigenvalues[j];
        model.azimuthal_mode.push_back(part.mode);
        ++col;
      }
    }
  }
  model.constant_column = 0;  // first pair of the m = 0 problem
  // Constants are exactly in the kernel of the flux form; an iterative lambda_0
  // of 1e-12 would otherwise grow into a relative error t * 1e-12.
  model.eigenvalues[0] = 0.0;
  model.basis.col(0).setConstant(1.0 / std::sqrt(mass.sum()));
  if (model.truncation_bound(opt.t_min) > opt.tol)
    throw Error("build_heat_kernel_model: truncation bound " +
                std::to_string(model.truncation_bound(opt.t_min)) + " exceeds tol");
  return model;
}

inline double heat_kernel_eval(const HeatKernelModel& m, Eigen::Index a, Eigen::Index b, double t) {
  m.check_time(t);
  detail::require(a >= 0 && a < m.points() && b >= 0 && b < m.points(),
                  "heat_kernel_eval: point index out of range");
  return m.kernel_entry(a, b, t);
}

// Sum over the retained non-constant eigenvalues of e^{-lambda t}.
inline double heat_trace(const HeatKernelModel& m, double t) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i)
    if (i != m.constant_column) s += std::exp(-m.eigenvalues[i] * t);
  return s;
}

inline double stochastic_completeness_check(const HeatKernelModel& m, Eigen::Index a, double t) {
  return std::abs(m.weights.dot(m.kernel_row(a, t)) - 1.0);
}

// Evenly spread sample points, endpoints included.
inline std::vector<Eigen::Index> sample_points(const HeatKernelModel& m, int count = 9) {
  std::vector<Eigen::Index> out;
  const Eigen::Index n = m.points();
  for (int i = 0; i < count; ++i) {
    const Eigen::Index a = (n - 1) * i / std::max(count - 1, 1);
    if (out.empty() || out.back() != a) out.push_back(a);
  }
  return out;
}

struct GKernelReport {
  double max_mean = 0.0;           // |int G(x, y, t) e^-phi dy|
  double max_l1 = 0.0;             // int |G| e^-phi, bounded by 2
  double max_semigroup = 0.0;      // relative to sqrt(H(x,x,t+s) H(z,z,t+s))
  double min_diagonal = std::numeric_limits<double>::infinity();
  double max_stochastic = 0.0;     // |int H e^-phi - 1|
  long samples = 0;
};

inline GKernelReport g_kernel_checks(const HeatKernelModel& m, const std::vector<double>& t_grid,
                                     const std::vector<Eigen::Index>& points) {
  GKernelReport r;
  const Eigen::VectorXd c0 = m.basis.col(m.constant_column);
  for (double t : t_grid) {
    const Eigen::MatrixXd g = m.kernel_rows(points, t, true);
    const double e0 = std::exp(-m.eigenvalues[m.constant_column] * t);
    for (std::size_t j = 0; j < points.size(); ++j) {
      const Eigen::Index a = points[j];
      const auto gj = g.col(static_cast<Eigen::Index>(j));
      r.max_mean = std::max(r.max_mean, std::abs(m.weights.dot(gj)));
      r.max_l1 = std::max(r.max_l1, m.weights.dot(gj.cwiseAbs()));
      r.min_diagonal = std::min(r.min_diagonal, gj[a]);
      const Eigen::VectorXd h = gj + e0 * m.basis(a, m.constant_column) * c0;
      r.max_stochastic = std::max(r.max_stochastic, std::abs(m.weights.dot(h) - 1.0));
      ++r.samples;
    }
  }
  // Semigroup on a spread of time pairs.
  for (std::size_t i = 0; i < t_grid.size(); i += 3)
    for (std::size_t j = i; j < t_grid.size(); j += 5) {
      const double t = t_grid[i], s = t_grid[j];
      const Eigen::MatrixXd gt = m.kernel_rows(points, t, true);
      const Eigen::MatrixXd gs = i == j ? gt : m.kernel_rows(points, s, true);
      const Eigen::MatrixXd prod = gt.transpose() * m.weights.asDiagonal() * gs;
      for (std::size_t ai = 0; ai < points.size(); ++ai)
        for (std::size_t ci = 0; ci < points.size(); ++ci) {
          const Eigen::Index a = points[ai], c = points[ci];
          const double lhs = m.kernel_entry(a, c, t + s, true);
          const double rhs = prod(static_cast<Eigen::Index>(ai), static_cast<Eigen::Index>(ci));
          const double scale = std::sqrt(m.kernel_entry(a, a, t + s) * m.kernel_entry(c, c, t + s));
          r.max_semigroup = std::max(r.max_semigroup, std::abs(lhs - rhs) / scale);
        }
    }
  return r;
}

inline double trace_bound_value(double nu, double c1, double t, double V_phi) {
  return 4.0 * std::pow(nu / (2.0 * c1), nu / 2.0) * std::pow(t, -nu / 2.0) * V_phi;
}

struct TraceBoundRow {
  double t = 0.0;
  double trace = 0.0;
  double trace_tail = 0.0;
  double bound = 0.0;         // with C_1
  double bound_robust = 0.0;  // with C_1 from 4 C_o
  double diag_max = 0.0;      // max_x G(x, x, t) over the samples
  double diag_bound = 0.0;
  double diffineq_slack = std::nan("");  // min relative slack of the t-derivative inequality
};

struct TraceBoundReport {
  std::string geometry_id;
  double c1 = 0.0, c1_robust = 0.0, nu = 4.0;
  std::vector<TraceBoundRow> rows;
  bool trace_ok = true, robust_ok = true, pointwise_ok = true, diffineq_ok = true;
  bool monotone = true, convex = true;
  double min_diffineq_slack = std::numeric_limits<double>::infinity();
};

inline std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    t[static_cast<std::size_t>(i)] =
        n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return t;
}

// Trace bound, its pointwise form, the differential inequality behind it
// (central difference, step 1e-4 t, evaluated where t / 2 is certified) and
// complete monotonicity of the trace.
inline TraceBoundReport trace_bound_check(const HeatKernelModel& m, const SobolevEstimate& est,
                                          const std::vector<double>& t_grid,
                                          const std::vector<Eigen::Index>& points) {
  TraceBoundReport rep;
  rep.geometry_id = m.geometry_id;
  rep.nu = est.nu;
  rep.c1 = est.c1_value;
  rep.c1_robust = est.c1_value / 4.0;
  const double nu = est.nu;
  for (double t : t_grid) {
    m.check_time(t);
    TraceBoundRow row;
    row.t = t;
    row.trace = heat_trace(m, t);
    row.trace_tail = m.trace_truncation_bound(t);
    row.bound = trace_bound_value(nu, rep.c1, t, m.V_phi);
    row.bound_robust = trace_bound_value(nu, rep.c1_robust, t, m.V_phi);
    row.diag_bound = row.bound / m.V_phi;
    const double h = 1e-4 * t;
    double slack = std::numeric_limits<double>::infinity();
    const bool inner = t / 2.0 >= m.t_min && t - h >= m.t_min;
    const Eigen::MatrixXd half = inner ? m.kernel_rows(points, t / 2.0, true) : Eigen::MatrixXd();
    for (std::size_t j = 0; j < points.size(); ++j) {
      const Eigen::Index a = points[j];
      const double gxx = m.kernel_entry(a, a, t, true);
      row.diag_max = std::max(row.diag_max, gxx);
      if (!inner) continue;
      const double dg = (m.kernel_entry(a, a, t + h, true) - m.kernel_entry(a, a, t - h, true)) / (2 * h);
      const auto hj = half.col(static_cast<Eigen::Index>(j));
      const double l2 = m.weights.dot(hj.cwiseProduct(hj));
      const double rhs = std::pow(2.0, -4.0 / nu) * rep.c1 * std::pow(l2, (2.0 + nu) / nu);
      slack = std::min(slack, (-dg - rhs) / std::max(-dg, rhs));
    }
    if (slack < std::numeric_limits<double>::infinity()) {
      row.diffineq_slack = slack;
      rep.min_diffineq_slack = std::min(rep.min_diffineq_slack, slack);
      if (slack < 0) rep.diffineq_ok = false;
    }
    if (row.trace + row.trace_tail > row.bound) rep.trace_ok = false;
    if (row.trace + row.trace_tail > row.bound_robust) rep.robust_ok = false;
    if (row.diag_max > row.diag_bound) rep.pointwise_ok = false;
    rep.rows.push_back(row);
  }
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const auto& a = rep.rows[i - 1];
    const auto& b = rep.rows[i];
    if (b.trace > a.trace * (1 + 1e-14)) rep.monotone = false;
    if (i + 1 < rep.rows.size()) {
      const auto& c = rep.rows[i + 1];
      const double s1 = (b.trace - a.trace) / (b.t - a.t);
      const double s2 = (c.trace - b.trace) / (c.t - b.t);
      if (s2 < s1 - 1e-12 * std::abs(s1)) rep.convex = false;
    }
  }
  return rep;
}

struct Thm4Result {
  std::size_t k = 1;
  double c_nu = 0.0;
  double bound = 0.0;
  double computed = 0.0;
  double tolerance = 0.0;
  bool satisfied = false;
};

inline double thm4_constant(double nu) { return std::pow(2.0 / nu, nu / 2.0) / (4.0 * std::numbers::e); }

// lambda_k >= [c(nu) k / V_phi]^(2/nu) C_1, from 4 (nu lambda_k / (2 C_1))^(nu/2) V_phi >= k / e.
inline Thm4Result thm4_lower_bound(const Spectrum& s, const SobolevEstimate& est, std::size_t k) {
  detail::require(k >= 1 && k < s.size(), "thm4_lower_bound: index out of range");
  Thm4Result r;
  r.k = k;
  r.c_nu = thm4_constant(est.nu);
  r.bound = std::pow(r.c_nu * static_cast<double>(k) / est.V_phi, 2.0 / est.nu) * est.c1_value;
  r.computed = s.eigenvalues[k];
  r.tolerance = s.discretization_estimate.empty() ? 0.0 : s.discretization_estimate[k];
  r.satisfied = r.computed >= r.bound - r.tolerance;
  return r;
}

struct GaussianEnvelope {
  double epsilon = 0.5;
  double envelope = -std::numeric_limits<double>::infinity();  // max log H + d^2 / (4 (1+eps) t)
  long samples = 0;
};

inline double model_distance(const HeatKernelModel& m, Eigen::Index a, Eigen::Index b) {
  const double xa = m.coord[static_cast<std::size_t>(a)], xb = m.coord[static_cast<std::size_t>(b)];
  switch (m.topology) {
    case Topology::Circle: return m.radius * std::abs(std::remainder(xa - xb, 2 * std::numbers::pi));
    case Topology::Interval: return std::abs(xa - xb);
    case Topology::SphereSymmetric: {
      const double pa = m.coord_phi[static_cast<std::size_t>(a)], pb = m.coord_phi[static_cast<std::size_t>(b)];
      const double c = std::cos(xa) * std::cos(xb) + std::sin(xa) * std::sin(xb) * std::cos(pa - pb);
      return m.radius * std::acos(std::clamp(c, -1.0, 1.0));
    }
  }
  return 0.0;
}

// Advisory only: the Gaussian envelope constant over the sampled set.
inline GaussianEnvelope gaussian_envelope(const HeatKernelModel& m, const std::vector<double>& t_grid,
                                          const std::vector<Eigen::Index>& points, double eps = 0.5) {
  GaussianEnvelope g;
  g.epsilon = eps;
  for (double t : t_grid)
    for (Eigen::Index a : points) {
      const Eigen::VectorXd row = m.kernel_row(a, t);
      for (Eigen::Index b : points) {
        if (!(row[b] > 0)) continue;
        const double d = model_distance(m, a, b);
        g.envelope = std::max(g.envelope, std::log(row[b]) + d * d / (4 * (1 + eps) * t));
        ++g.samples;
      }
    }
  return g;
}

}  // namespace driftlab
