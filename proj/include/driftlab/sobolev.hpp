#pragma once

// Numerical Sobolev constant of property (S) and the L^2 gradient inequality
// that follows from it.
//
// All integrals are the discrete ones of the assembled drift problem: the
// weighted mass is the quadrature, u^T K u the Dirichlet energy.  On the
// sphere everything is zonal (azimuthal mode 0).

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "driftlab/eigensolve.hpp"
#include "driftlab/error.hpp"
#include "driftlab/geometry.hpp"
#include "driftlab/operators.hpp"

namespace driftlab {

struct SobolevOptions {
  double nu = 4.0;
  std::optional<double> alpha;  // defaults to lambda_1
  int battery_size = 200;
  std::uint64_t seed = 1;
  double safety = 0.25;
  int max_ascent_iterations = 100;
  int ascent_starts = 3;
  double ascent_tolerance = 1e-8;
};

struct SobolevEstimate {
  std::string geometry_id;
  double nu = 4.0;
  double alpha = 0.0;
  double safety = 0.25;
  double c_o_estimate = 0.0;
  double max_ratio = 0.0;          // best ratio after ascent
  double battery_max_ratio = 0.0;  // best ratio before ascent
  int battery_size = 0;
  int ascent_iterations = 0;
  double lambda1 = 0.0;
  double V_phi = 0.0;
  double c1_value = 0.0;
  std::vector<double> extremal_function;  // grid samples, unit weighted L^p norm
  std::vector<double> grid;
  std::uint64_t seed = 0;
  std::string warning;
};

namespace detail {

// Discrete integrals over the dof vector of a drift problem.
struct SobolevForms {
  SparseMatrix k, m;
  Eigen::VectorXd w;  // diagonal of the (lumped) mass
  double volume = 0.0;

  explicit SobolevForms(const SpectralProblem& p) : k(p.stiffness), m(p.mass) {
    w = Eigen::VectorXd(p.mass.diagonal());
    volume = w.sum();
  }
  double energy(const Eigen::VectorXd& u) const { return u.dot(k * u); }
  double l2sq(const Eigen::VectorXd& u) const { return u.dot(w.cwiseProduct(u)); }
  double l1(const Eigen::VectorXd& u) const { return w.dot(u.cwiseAbs()); }
  double lp_integral(const Eigen::VectorXd& u, double p) const {
    return w.dot(u.cwiseAbs().array().pow(p).matrix());
  }
  double mean(const Eigen::VectorXd& u) const { return w.dot(u) / volume; }
};

inline double sobolev_exponent(double nu) { return 2.0 * nu / (nu - 2.0); }

inline double sobolev_ratio(const SobolevForms& f, const Eigen::VectorXd& u, double nu,
                            double alpha) {
  const double p = sobolev_exponent(nu);
  const double num = std::pow(f.lp_integral(u, p), 2.0 / p) * std::pow(f.volume, 2.0 / nu);
  const double den = f.energy(u) + alpha * f.l2sq(u);
  return den > 0 ? num / den : std::numeric_limits<double>::infinity();
}

inline std::vector<double> dof_coordinates(const WeightedGeometry& g, const SpectralProblem& p) {
  std::vector<double> x;
  for (int node : p.dof_nodes) x.push_back(g.grid[static_cast<std::size_t>(node)]);
  return x;
}

// Random smooth test functions: low-mode eigenfunction combinations and bumps.
class CandidateFactory {
 public:
  CandidateFactory(const WeightedGeometry& g, const SpectralProblem& p, const Spectrum& s,
                   std::uint64_t seed)
      : g_(g), x_(dof_coordinates(g, p)), rng_(seed) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const int mode = s.azimuthal_mode.empty() ? 0 : s.azimuthal_mode[i];
      if (mode != 0) continue;
      modes_.push_back(s.eigenvectors.col(static_cast<Eigen::Index>(i)));
      values_.push_back(s.eigenvalues[i]);
      if (modes_.size() >= 16) break;
    }
    require(modes_.size() >= 2, "sobolev: spectrum needs at least two zonal eigenpairs");
  }

  const Eigen::VectorXd& mode(std::size_t i) const { return modes_.at(i); }

  Eigen::VectorXd next() {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (unif(rng_) < 0.5) return combination();
    return bump();
  }

 private:
  Eigen::VectorXd combination() {
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<std::size_t> pick(1, modes_.size() - 1);
    const std::size_t top = pick(rng_);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(modes_.front().size());
    for (std::size_t i = 0; i <= top; ++i)
      u += normal(rng_) / (1.0 + std::abs(values_[i])) * modes_[i];
    return u;
  }

  Eigen::VectorXd bump() {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double lo = g_.periodic() ? 0.0 : x_.front();
    const double len = g_.coordinate_length();
    double centre = lo + unif(rng_) * len;
    if (g_.topology == Topology::SphereSymmetric && unif(rng_) < 0.5)
      centre = unif(rng_) < 0.5 ? 0.0 : std::numbers::pi;  // polar caps
    const double width = len * (0.03 + 0.3 * unif(rng_));
    const double sign = unif(rng_) < 0.5 ? -1.0 : 1.0;
    const double offset = unif(rng_) < 0.5 ? 0.0 : unif(rng_) - 0.5;
    Eigen::VectorXd u(static_cast<Eigen::Index>(x_.size()));
    for (std::size_t i = 0; i < x_.size(); ++i) {
      double r = x_[i] - centre;
      if (g_.periodic()) r = std::remainder(r, 2.0 * std::numbers::pi);
      u[static_cast<Eigen::Index>(i)] = sign * std::exp(-0.5 * (r / width) * (r / width)) + offset;
    }
    return u;
  }

  const WeightedGeometry& g_;
  std::vector<double> x_;
  std::mt19937_64 rng_;
  std::vector<Eigen::VectorXd> modes_;
  std::vector<double> values_;
};

inline double lambda1_of(const Spectrum& s) {
  require(s.size() >= 2 && s.has_constant_mode,
          "sobolev: needs a closed or Neumann spectrum with at least two eigenpairs");
  require(s.eigenvalues[1] > 0, "sobolev: lambda_1 must be positive");
  return s.eigenvalues[1];
}

}  // namespace detail

inline double c1_constant(const SobolevEstimate& est, double lambda1, double V_phi) {
  detail::require(lambda1 > 0, "c1_constant: lambda_1 must be positive");
  detail::require(est.c_o_estimate > 0, "c1_constant: C_o must be positive");
  return lambda1 / (est.c_o_estimate * (lambda1 + est.alpha)) * std::pow(V_phi, 2.0 / est.nu);
}

// Battery maximum of the Sobolev quotient, refined by the Euler-Lagrange
// fixed point u <- (K + alpha M)^-1 M |u|^(p-2) u from the best candidates,
// and inflated by (1 + safety).  `s` supplies lambda_1 and the candidate modes.
inline SobolevEstimate estimate_sobolev_constant(const WeightedGeometry& g, const Spectrum& s,
                                                 const SobolevOptions& opt = {}) {
  detail::require(opt.nu > 2, "estimate_sobolev_constant: nu must exceed 2");
  detail::require(opt.battery_size >= 1, "estimate_sobolev_constant: empty battery");
  const SpectralProblem prob = assemble_drift_laplacian(g, 0);
  const detail::SobolevForms forms(prob);
  SobolevEstimate est;
  est.geometry_id = g.id;
  est.nu = opt.nu;
  est.lambda1 = detail::lambda1_of(s);
  est.alpha = opt.alpha.value_or(est.lambda1);
  detail::require(est.alpha >= 0, "estimate_sobolev_constant: alpha must be >= 0");
  est.safety = opt.safety;
  est.seed = opt.seed;
  est.V_phi = forms.volume;
  const bool mean_zero = est.alpha == 0.0;
  if (mean_zero)
    est.warning = "alpha = 0: the quotient is unbounded on constants; candidates are "
                  "restricted to weighted-mean-zero functions";

  auto prepare = [&](Eigen::VectorXd u) {
    if (mean_zero) u.array() -= forms.mean(u);
    return u;
  };
  auto ratio = [&](const Eigen::VectorXd& u) {
    return detail::sobolev_ratio(forms, u, est.nu, est.alpha);
  };

  detail::CandidateFactory factory(g, prob, s, opt.seed);
  struct Scored {
    double r;
    Eigen::VectorXd u;
  };
  std::vector<Scored> scored;
  auto add = [&](const Eigen::VectorXd& u) {
    const Eigen::VectorXd v = prepare(u);
    scored.push_back({ratio(v), v});
  };
  add(factory.mode(1));
  if (!mean_zero) add(Eigen::VectorXd::Ones(prob.size()));
  while (static_cast<int>(scored.size()) < opt.battery_size) add(factory.next());
  est.battery_size = static_cast<int>(scored.size());
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Scored& a, const Scored& b) { return a.r > b.r; });
  est.battery_max_ratio = scored.front().r;

  // For alpha = 0 the operator is singular on constants; a small shift keeps
  // the solve regular and the projection removes the constant component.
  const double shift = mean_zero ? 1e-6 * est.lambda1 : est.alpha;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(SparseMatrix(prob.stiffness + shift * prob.mass));
  if (ldlt.info() != Eigen::Success) throw Error("estimate_sobolev_constant: factorisation failed");
  const double p = detail::sobolev_exponent(est.nu);

  Eigen::VectorXd best_u = scored.front().u;
  double best_r = scored.front().r;
  const int starts = std::min<int>(opt.ascent_starts, static_cast<int>(scored.size()));
  for (int st = 0; st < starts; ++st) {
    Eigen::VectorXd u = scored[static_cast<std::size_t>(st)].u;
    double r = scored[static_cast<std::size_t>(st)].r;
    for (int it = 0; it < opt.max_ascent_iterations; ++it) {
      Eigen::VectorXd rhs =
          forms.w.cwiseProduct((u.cwiseAbs().array().pow(p - 2.0) * u.array()).matrix());
      if (mean_zero) rhs -= forms.w * (rhs.sum() / forms.volume);
      Eigen::VectorXd next = prepare(ldlt.solve(rhs));
      const double nrm = std::pow(forms.lp_integral(next, p), 1.0 / p);
      if (!(nrm > 0)) break;
      next /= nrm;
      const double rn = ratio(next);
      ++est.ascent_iterations;
      const bool improved = rn > r;
      if (improved) {
        u = next;
      }
      const double gain = (rn - r) / r;
      r = std::max(r, rn);
      if (!improved || gain < opt.ascent_tolerance) break;
    }
    if (r > best_r) {
      best_r = r;
      best_u = u;
    }
  }
  est.max_ratio = best_r;
  est.c_o_estimate = (1.0 + opt.safety) * best_r;
  est.c1_value = c1_constant(est, est.lambda1, est.V_phi);
  const double nrm = std::pow(forms.lp_integral(best_u, p), 1.0 / p);
  std::vector<double> samples(g.size(), 0.0);
  for (std::size_t d = 0; d < prob.dof_nodes.size(); ++d)
    samples[static_cast<std::size_t>(prob.dof_nodes[d])] =
        best_u[static_cast<Eigen::Index>(d)] / nrm;
  est.extremal_function = std::move(samples);
  est.grid = g.grid;
  return est;
}

// The quantities of the L^2 gradient inequality for one test function.
struct L1Record {
  double grad_sq = 0.0;  // int |grad u|^2 e^-phi
  double l2_sq = 0.0;    // int u^2 e^-phi
  double l1 = 0.0;       // int |u| e^-phi
  double lp_norm_sq = 0.0;  // (int |u|^p e^-phi)^(2/p), p = 2 nu / (nu - 2)
  double l1e1_slack = 0.0;  // grad_sq - (C_o^-1 V^(2/nu) lp_norm_sq - alpha l2_sq)
  double l1e2_slack = 0.0;  // grad_sq - C_1 lp_norm_sq
  double holder_relative_slack = 0.0;  // 1 - l2_sq^((2+nu)/nu) / (l1^(4/nu) lp_norm_sq)
  double slack = 0.0;       // grad_sq - C_1 l2_sq^((2+nu)/nu) l1^(-4/nu)
  double relative_slack = 0.0;
};

struct L1Report {
  std::string geometry_id;
  double c1 = 0.0;
  double min_slack = std::numeric_limits<double>::infinity();
  double min_relative_slack = std::numeric_limits<double>::infinity();
  double min_holder_relative_slack = std::numeric_limits<double>::infinity();
  double min_l1e1_slack = std::numeric_limits<double>::infinity();
  double min_l1e2_slack = std::numeric_limits<double>::infinity();
  double max_mean_deviation = 0.0;
  std::vector<L1Record> records;  // first record is the first eigenfunction
};

inline L1Record l1_record(const detail::SobolevForms& f, const Eigen::VectorXd& u,
                          const SobolevEstimate& est) {
  const double nu = est.nu;
  const double p = detail::sobolev_exponent(nu);
  L1Record r;
  r.grad_sq = f.energy(u);
  r.l2_sq = f.l2sq(u);
  r.l1 = f.l1(u);
  r.lp_norm_sq = std::pow(f.lp_integral(u, p), 2.0 / p);
  const double vpow = std::pow(f.volume, 2.0 / nu);
  r.l1e1_slack = r.grad_sq - (vpow * r.lp_norm_sq / est.c_o_estimate - est.alpha * r.l2_sq);
  r.l1e2_slack = r.grad_sq - est.c1_value * r.lp_norm_sq;
  const double holder_lhs = std::pow(r.l2_sq, (2.0 + nu) / nu);
  const double holder_rhs = std::pow(r.l1, 4.0 / nu) * r.lp_norm_sq;
  r.holder_relative_slack = 1.0 - holder_lhs / holder_rhs;
  const double rhs = est.c1_value * holder_lhs * std::pow(r.l1, -4.0 / nu);
  r.slack = r.grad_sq - rhs;
  r.relative_slack = r.slack / std::max(r.grad_sq, rhs);
  return r;
}

// Random weighted-mean-zero functions (plus the first eigenfunction) tested
// against the gradient inequality with C_1 from `est`.
inline L1Report l1_inequality_check(const WeightedGeometry& g, const Spectrum& s,
                                    const SobolevEstimate& est, int battery_size,
                                    std::uint64_t seed) {
  detail::require(battery_size >= 1, "l1_inequality_check: empty battery");
  const SpectralProblem prob = assemble_drift_laplacian(g, 0);
  const detail::SobolevForms forms(prob);
  detail::CandidateFactory factory(g, prob, s, seed);
  L1Report rep;
  rep.geometry_id = g.id;
  rep.c1 = est.c1_value;
  std::mt19937_64 scale_rng(seed ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int i = 0; i < battery_size; ++i) {
    Eigen::VectorXd u = i == 0 ? factory.mode(1) : factory.next();
    u.array() -= forms.mean(u);
    if (i > 0) u *= scale(scale_rng);
    rep.max_mean_deviation =
        std::max(rep.max_mean_deviation, std::abs(forms.mean(u)) / (u.cwiseAbs().maxCoeff() + 1e-300));
    const L1Record r = l1_record(forms, u, est);
    rep.min_slack = std::min(rep.min_slack, r.slack);
    rep.min_relative_slack = std::min(rep.min_relative_slack, r.relative_slack);
    rep.min_holder_relative_slack = std::min(rep.min_holder_relative_slack, r.holder_relative_slack);
    rep.min_l1e1_slack = std::min(rep.min_l1e1_slack, r.l1e1_slack);
    rep.min_l1e2_slack = std::min(rep.min_l1e2_slack, r.l1e2_slack);
    rep.records.push_back(r);
  }
  return rep;
}

// Sobolev quotient of a grid function (samples at every node).
inline double sobolev_quotient(const WeightedGeometry& g, const std::vector<double>& u, double nu,
                               double alpha) {
  const SpectralProblem prob = assemble_drift_laplacian(g, 0);
  const detail::SobolevForms forms(prob);
  Eigen::VectorXd v(prob.size());
  for (std::size_t d = 0; d < prob.dof_nodes.size(); ++d)
    v[static_cast<Eigen::Index>(d)] = u.at(static_cast<std::size_t>(prob.dof_nodes[d]));
  return detail::sobolev_ratio(forms, v, nu, alpha);
}

}  // namespace driftlab
