#pragma once

// Discrete self-adjoint operators on a WeightedGeometry.
//
// The drift Laplacian is assembled in flux (finite-volume) form: each face
// carries the coefficient  density_f * exp(-(phi_l + phi_r)/2) / (g h)  and
// each node the lumped mass  density_i * cell_i * exp(-phi_i).  The stiffness
// is therefore symmetric by construction and annihilates constants on
// closed/Neumann geometries.

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "driftlab/error.hpp"
#include "driftlab/geometry.hpp"

namespace driftlab {

enum class ProblemLabel { DriftLaplacian, Schrodinger, CollapseNeumann };

inline const char* to_string(ProblemLabel l) {
  switch (l) {
    case ProblemLabel::DriftLaplacian: return "drift";
    case ProblemLabel::Schrodinger: return "schrodinger";
    case ProblemLabel::CollapseNeumann: return "collapse";
  }
  return "?";
}

using SparseMatrix = Eigen::SparseMatrix<double>;

struct SpectralProblem {
  SparseMatrix stiffness;
  SparseMatrix mass;
  ProblemLabel label = ProblemLabel::DriftLaplacian;
  std::string geometry_ref;
  int azimuthal_mode = 0;
  std::vector<int> dof_nodes;  // grid node behind each unknown
  std::size_t grid_size = 0;
  bool has_constant_mode = false;
  bool periodic = false;

  Eigen::Index size() const { return stiffness.rows(); }
};

namespace detail {

struct DofMap {
  std::vector<int> node_to_dof;  // -1 for eliminated nodes
  std::vector<int> dof_nodes;
};

inline DofMap make_dofs(const WeightedGeometry& g) {
  DofMap m;
  const std::size_t n = g.size();
  m.node_to_dof.assign(n, -1);
  const bool dirichlet =
      g.topology == Topology::Interval && g.bc == BoundaryCondition::Dirichlet;
  for (std::size_t i = 0; i < n; ++i) {
    if (dirichlet && (i == 0 || i + 1 == n)) continue;
    m.node_to_dof[i] = static_cast<int>(m.dof_nodes.size());
    m.dof_nodes.push_back(static_cast<int>(i));
  }
  return m;
}

// Adds c*(u_l - u_r)^2 to the quadratic form, dropping eliminated nodes.
inline void add_face(std::vector<Eigen::Triplet<double>>& t, const DofMap& m, int l, int r,
                     double c) {
  const int dl = m.node_to_dof[static_cast<std::size_t>(l)];
  const int dr = m.node_to_dof[static_cast<std::size_t>(r)];
  if (dl >= 0) t.emplace_back(dl, dl, c);
  if (dr >= 0) t.emplace_back(dr, dr, c);
  if (dl >= 0 && dr >= 0) {
    t.emplace_back(dl, dr, -c);
    t.emplace_back(dr, dl, -c);
  }
}

inline SparseMatrix from_triplets(Eigen::Index n, const std::vector<Eigen::Triplet<double>>& t) {
  SparseMatrix a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  a.makeCompressed();
  return a;
}

// Unweighted face coefficient, including the azimuthal factor.
inline double face_coefficient(const WeightedGeometry& g, std::size_t f) {
  return g.azimuthal_factor() * g.face_density[f] / (g.metric_factor() * g.spacing);
}

inline double cell_measure(const WeightedGeometry& g, std::size_t i) {
  return g.azimuthal_factor() * g.metric_density[i] * g.cell_width[i];
}

// m^2 / g_{varphi varphi} on the sphere, zero elsewhere.
inline double azimuthal_potential(const WeightedGeometry& g, std::size_t i, int mode) {
  if (g.topology != Topology::SphereSymmetric || mode == 0) return 0.0;
  const double s = g.radius * std::sin(g.grid[i]);
  return static_cast<double>(mode) * mode / (s * s);
}

inline void check_mode(const WeightedGeometry& g, int mode) {
  require(mode >= 0, "azimuthal mode must be >= 0");
  require(mode == 0 || g.topology == Topology::SphereSymmetric,
          "azimuthal modes exist only on the sphere");
}

}  // namespace detail

// Flux-form drift Laplacian -Delta_phi = -Delta + grad phi . grad in the
// measure exp(-phi) dV.  On the sphere `mode` selects the azimuthal
// harmonic m, whose m^2/sin^2 term enters the stiffness.
inline SpectralProblem assemble_drift_laplacian(const WeightedGeometry& g, int mode = 0) {
  detail::check_mode(g, mode);
  const auto dofs = detail::make_dofs(g);
  const auto ndof = static_cast<Eigen::Index>(dofs.dof_nodes.size());
  std::vector<Eigen::Triplet<double>> kt, mt;
  kt.reserve(4 * g.face_left.size() + g.size());
  for (std::size_t f = 0; f < g.face_left.size(); ++f) {
    const int l = g.face_left[f], r = g.face_right[f];
    const double w = std::exp(-0.5 * (g.weight_phi[static_cast<std::size_t>(l)] +
                                      g.weight_phi[static_cast<std::size_t>(r)]));
    detail::add_face(kt, dofs, l, r, detail::face_coefficient(g, f) * w);
  }
  for (Eigen::Index d = 0; d < ndof; ++d) {
    const auto i = static_cast<std::size_t>(dofs.dof_nodes[static_cast<std::size_t>(d)]);
    const double m = detail::cell_measure(g, i) * std::exp(-g.weight_phi[i]);
    if (!(std::isnormal(m) && m > 0))
      throw InvalidArgument("degenerate mass entry at grid point " + std::to_string(i) +
                            " (coordinate " + std::to_string(g.grid[i]) +
                            ", phi = " + std::to_string(g.weight_phi[i]) + ")");
    mt.emplace_back(d, d, m);
    const double v = detail::azimuthal_potential(g, i, mode);
    if (v != 0.0) kt.emplace_back(d, d, v * m);
  }
  SpectralProblem p;
  p.stiffness = detail::from_triplets(ndof, kt);
  p.mass = detail::from_triplets(ndof, mt);
  p.label = ProblemLabel::DriftLaplacian;
  p.geometry_ref = g.id;
  p.azimuthal_mode = mode;
  p.dof_nodes = dofs.dof_nodes;
  p.grid_size = g.size();
  p.has_constant_mode = g.has_constant_mode() && mode == 0;
  p.periodic = g.periodic();
  return p;
}

inline std::vector<SpectralProblem> assemble_drift_modes(const WeightedGeometry& g) {
  std::vector<SpectralProblem> out;
  const int cap = g.topology == Topology::SphereSymmetric ? g.azimuthal_mode_cap : 0;
  for (int m = 0; m <= cap; ++m) out.push_back(assemble_drift_laplacian(g, m));
  return out;
}

// Discrete Schrodinger potential  |grad phi|^2/4 - (Delta phi)/2  at node i:
// the flux stencil applied to phi, with |grad phi|^2 averaged from squared
// edge gradients over half-edge volumes.  At a Neumann end node the half
// cell turns this into the Robin term -phi'(a)/2 v(a)^2 of the conjugated form.
inline std::vector<double> schrodinger_potential(const WeightedGeometry& g) {
  std::vector<double> acc(g.size(), 0.0);
  for (std::size_t f = 0; f < g.face_left.size(); ++f) {
    const auto l = static_cast<std::size_t>(g.face_left[f]);
    const auto r = static_cast<std::size_t>(g.face_right[f]);
    const double c = detail::face_coefficient(g, f);
    const double d = g.weight_phi[r] - g.weight_phi[l];
    acc[l] += c * (-0.5 * d + 0.125 * d * d);
    acc[r] += c * (0.5 * d + 0.125 * d * d);
  }
  for (std::size_t i = 0; i < g.size(); ++i) acc[i] /= detail::cell_measure(g, i);
  return acc;
}

// -Delta + |grad phi|^2/4 - (Delta phi)/2 in the unweighted measure; unitarily
// equivalent to the drift Laplacian through v = exp(-phi/2) u.
inline SpectralProblem assemble_schrodinger(const WeightedGeometry& g, int mode = 0) {
  detail::check_mode(g, mode);
  const auto dofs = detail::make_dofs(g);
  const auto ndof = static_cast<Eigen::Index>(dofs.dof_nodes.size());
  const auto pot = schrodinger_potential(g);
  std::vector<Eigen::Triplet<double>> kt, mt;
  for (std::size_t f = 0; f < g.face_left.size(); ++f)
    detail::add_face(kt, dofs, g.face_left[f], g.face_right[f], detail::face_coefficient(g, f));
  for (Eigen::Index d = 0; d < ndof; ++d) {
    const auto i = static_cast<std::size_t>(dofs.dof_nodes[static_cast<std::size_t>(d)]);
    const double m = detail::cell_measure(g, i);
    mt.emplace_back(d, d, m);
    kt.emplace_back(d, d, (pot[i] + detail::azimuthal_potential(g, i, mode)) * m);
  }
  SpectralProblem p;
  p.stiffness = detail::from_triplets(ndof, kt);
  p.mass = detail::from_triplets(ndof, mt);
  p.label = ProblemLabel::Schrodinger;
  p.geometry_ref = g.id;
  p.azimuthal_mode = mode;
  p.dof_nodes = dofs.dof_nodes;
  p.grid_size = g.size();
  p.has_constant_mode = false;
  p.periodic = g.periodic();
  return p;
}

struct ConjugationDeviation {
  double operator_deviation = 0.0;  // max |M^-1/2 (D K D - K_S) M^-1/2|, 1/length^2
  double relative = 0.0;            // operator_deviation / (|V|_inf + 1/d^2)
  double mass_deviation = 0.0;      // max |D M D - M_S| / M_S
};

// Pulls the drift form back through u = exp(phi/2) v and compares with the
// assembled Schrodinger form.
inline ConjugationDeviation discrete_conjugation_check(const WeightedGeometry& g,
                                                       const SpectralProblem& drift,
                                                       const SpectralProblem& schrod) {
  detail::require(drift.label == ProblemLabel::DriftLaplacian &&
                      schrod.label == ProblemLabel::Schrodinger,
                  "discrete_conjugation_check: expected (drift, schrodinger) problems");
  detail::require(drift.geometry_ref == schrod.geometry_ref && drift.size() == schrod.size() &&
                      drift.dof_nodes == schrod.dof_nodes && drift.grid_size == g.size() &&
                      drift.azimuthal_mode == schrod.azimuthal_mode,
                  "discrete_conjugation_check: problems were assembled on different grids");
  const Eigen::Index n = drift.size();
  Eigen::VectorXd dscale(n), msch(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(drift.dof_nodes[static_cast<std::size_t>(k)]);
    dscale[k] = std::exp(0.5 * g.weight_phi[i]);
    msch[k] = schrod.mass.coeff(k, k);
  }
  const SparseMatrix pulled = dscale.asDiagonal() * drift.stiffness * dscale.asDiagonal();
  const SparseMatrix diff = pulled - schrod.stiffness;
  ConjugationDeviation out;
  for (Eigen::Index c = 0; c < diff.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(diff, c); it; ++it)
      out.operator_deviation = std::max(
          out.operator_deviation, std::abs(it.value()) / std::sqrt(msch[it.row()] * msch[it.col()]));
  for (Eigen::Index k = 0; k < n; ++k) {
    const double dm = dscale[k] * drift.mass.coeff(k, k) * dscale[k];
    out.mass_deviation = std::max(out.mass_deviation, std::abs(dm - msch[k]) / msch[k]);
  }
  const auto pot = schrodinger_potential(g);
  double vmax = 0.0;
  for (double v : pot) vmax = std::max(vmax, std::abs(v));
  const double d = g.diameter();
  out.relative = out.operator_deviation / (vmax + 1.0 / (d * d));
  return out;
}

// Bochner identity in 1-D:
//   Delta_phi |u'|^2 = 2 (u'')^2 + 2 u' (Delta_phi u)' + 2 phi'' (u')^2,
// all derivatives along arc length, every term by centred differences.
// Returns max |LHS - RHS| over points at least four cells from a boundary.
inline double bochner_residual(const WeightedGeometry& g, const std::vector<double>& u) {
  detail::require(g.topology != Topology::SphereSymmetric,
                  "bochner_residual: only 1-D geometries are supported");
  detail::require(g.size() >= 64, "bochner_residual: grid too coarse (need >= 64 points)");
  detail::require(u.size() == g.size(), "bochner_residual: sample count mismatch");
  const double s = 1.0 / std::sqrt(g.metric_factor());  // d/ds = s d/dx
  auto deriv = [&](const std::vector<double>& f) {
    auto d = grid_derivatives(g, f);
    for (auto& v : d.first) v *= s;
    for (auto& v : d.second) v *= s * s;
    return d;
  };
  const auto du = deriv(u);
  const auto dphi = deriv(g.weight_phi);
  const std::size_t n = g.size();
  std::vector<double> grad2(n), lap_phi_u(n);
  for (std::size_t i = 0; i < n; ++i) {
    grad2[i] = du.first[i] * du.first[i];
    lap_phi_u[i] = du.second[i] - dphi.first[i] * du.first[i];
  }
  const auto dg = deriv(grad2);
  const auto dl = deriv(lap_phi_u);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!g.periodic() && (i < 4 || i + 4 >= n)) continue;
    const double lhs = dg.second[i] - dphi.first[i] * dg.first[i];
    const double rhs = 2 * du.second[i] * du.second[i] + 2 * du.first[i] * dl.first[i] +
                       2 * dphi.second[i] * grad2[i];
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

}  // namespace driftlab
