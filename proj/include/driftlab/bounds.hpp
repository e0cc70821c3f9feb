#pragma once

// Closed-form first-eigenvalue lower bounds, Cheng-type upper bounds and the
// gradient estimate behind them, evaluated against computed spectra.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "driftlab/eigensolve.hpp"
#include "driftlab/error.hpp"
#include "driftlab/geometry.hpp"

namespace driftlab {

enum class Direction { Lower, Upper };
enum class Verdict { Satisfied, Violated, NotApplicable, Advisory };

inline const char* to_string(Direction d) { return d == Direction::Lower ? "lower" : "upper"; }

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Satisfied: return "Satisfied";
    case Verdict::Violated: return "Violated";
    case Verdict::NotApplicable: return "NotApplicable";
    case Verdict::Advisory: return "Advisory";
  }
  return "?";
}

struct BoundReport {
  std::string geometry_id;
  std::string bound_name;
  std::string hypothesis;  // precondition with the numbers that decided it
  double bound_value = std::nan("");
  std::size_t target_index = 1;
  double computed = std::nan("");
  double tolerance = 0.0;
  Direction direction = Direction::Lower;
  Verdict verdict = Verdict::NotApplicable;
  double margin = std::nan("");  // positive when the bound holds
  std::string note;
};

// Slack used for curvature hypotheses: Ric >= k - kHypothesisSlack counts as Ric >= k.
inline constexpr double kHypothesisSlack = 1e-8;

inline double zhong_yang_value(double d) {
  detail::require(d > 0, "diameter must be positive");
  return std::numbers::pi * std::numbers::pi / (d * d);
}

inline double yang_eq16_bound(int n, double k, double d) {
  detail::require(n >= 1, "yang_eq16_bound: n must be >= 1");
  detail::require(k >= 0, "yang_eq16_bound: k must be >= 0");
  detail::require(d > 0, "yang_eq16_bound: d must be positive");
  const double nk = (n - 1) * k;
  if (nk == 0.0) return zhong_yang_value(d);
  const double pi = std::numbers::pi;
  const double c = std::max(std::sqrt(n - 1.0), std::sqrt(2.0));
  const double den = std::expm1(0.5 * c * std::sqrt(nk * d * d));
  return pi * pi / 16.0 * std::max(n - 1.0, 2.0) * nk / (den * den);
}

// The (grad-1) right side is increasing in mu_1, so any lower bound mu0 on mu_1
// can be fed back in.
inline double yang_combined_bound(int n, double k, double d) {
  const double mu0 = yang_eq16_bound(n, k, d);
  const double nk = (n - 1) * k;
  if (nk == 0.0) return zhong_yang_value(d);
  return std::max(mu0, zhong_yang_value(d) / (1.0 + nk / mu0));
}

inline std::optional<double> ling_bound(int n, double k, double d) {
  detail::require(d > 0, "ling_bound: d must be positive");
  if (!(k > 0) || n < 2) return std::nullopt;
  const double c = n == 2 ? 3.0 / 8.0 : 31.0 / 100.0;
  return zhong_yang_value(d) + c * (n - 1) * k;
}

inline std::optional<double> andrews_ni_bound(int n, double k, double d) {
  detail::require(d > 0, "andrews_ni_bound: d must be positive");
  detail::require(n >= 1, "andrews_ni_bound: n must be >= 1");
  if (!(k > 0)) return std::nullopt;
  return zhong_yang_value(d) + 0.5 * (n - 1) * k;
}

enum class ChengRegime { RicNonneg, RicAtLeastNminus1, RicAtLeastMinusK };

inline const char* to_string(ChengRegime r) {
  switch (r) {
    case ChengRegime::RicNonneg: return "cheng_ric_nonneg";
    case ChengRegime::RicAtLeastNminus1: return "cheng_ric_n_minus_1";
    case ChengRegime::RicAtLeastMinusK: return "cheng_ric_minus_k";
  }
  return "?";
}

inline double cheng_upper_bound(int n, int j, double d, ChengRegime regime, double k = 0.0) {
  detail::require(j >= 1, "cheng_upper_bound: j must be >= 1");
  detail::require(d > 0, "cheng_upper_bound: d must be positive");
  const double jj = static_cast<double>(j) * j;
  switch (regime) {
    case ChengRegime::RicNonneg: return 8.0 * n * (n + 4) * jj / (d * d);
    case ChengRegime::RicAtLeastNminus1: return 4.0 * n * jj / (d * d);
    case ChengRegime::RicAtLeastMinusK:
      detail::require(k >= 0, "cheng_upper_bound: k must be >= 0");
      return 0.25 * k + 8.0 * n * (n + 4) * jj / (d * d);
  }
  return std::nan("");
}

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline void decide(BoundReport& r) {
  if (r.verdict == Verdict::NotApplicable) return;
  r.margin = r.direction == Direction::Lower ? r.computed - r.bound_value
                                             : r.bound_value - r.computed;
  if (r.verdict == Verdict::Advisory) return;
  r.verdict = r.margin >= -r.tolerance ? Verdict::Satisfied : Verdict::Violated;
}

}  // namespace detail

// Lower bounds on mu_1 and Cheng upper bounds on mu_j, j = 1..j_max, with
// hypotheses read off the curvature summary.  Computed values are the best
// available eigenvalues (extrapolated when present), tolerances their
// discretisation estimates.
inline std::vector<BoundReport> evaluate_bound_battery(const WeightedGeometry& g,
                                                       const Spectrum& s,
                                                       const CurvatureSummary& c,
                                                       int j_max = 5) {
  using detail::fmt;
  const int n = g.dimension_n;
  const double d = c.diameter_d;
  const double ric = c.ric_phi_inf;
  const bool closed_or_neumann = g.has_constant_mode();
  const auto& best = s.best_eigenvalues();
  auto value = [&](std::size_t j) { return best.at(j); };
  auto tol = [&](std::size_t j) {
    return s.discretization_estimate.empty() ? 0.0 : s.discretization_estimate.at(j);
  };
  std::vector<BoundReport> out;
  auto base = [&](const std::string& name, Direction dir, std::size_t j) {
    BoundReport r;
    r.geometry_id = g.id;
    r.bound_name = name;
    r.direction = dir;
    r.target_index = j;
    if (j < best.size()) {
      r.computed = value(j);
      r.tolerance = tol(j);
    }
    return r;
  };
  auto not_applicable = [](BoundReport& r, const std::string& why) {
    r.verdict = Verdict::NotApplicable;
    r.hypothesis = why;
  };
  const std::string dirichlet = "requires a closed manifold or Neumann boundary";

  // Yang: Ric_phi >= -(n-1)k with the smallest admissible k >= 0.
  const double k_yang = n >= 2 ? std::max(0.0, -ric / (n - 1)) : 0.0;
  const bool yang_ok = n >= 2 || ric >= -kHypothesisSlack;
  const std::string yang_hyp = "Ric_phi >= -(n-1)k: inf Ric_phi = " + fmt(ric) +
                               ", n = " + std::to_string(n) + ", k = " + fmt(k_yang);
  for (const char* name : {"yang_eq16", "yang_combined"}) {
    BoundReport r = base(name, Direction::Lower, 1);
    if (!closed_or_neumann) {
      not_applicable(r, dirichlet);
    } else if (!yang_ok) {
      not_applicable(r, yang_hyp + " (fails: n = 1 needs Ric_phi >= 0)");
    } else {
      r.hypothesis = yang_hyp;
      r.bound_value = std::string(name) == "yang_eq16" ? yang_eq16_bound(n, k_yang, d)
                                                       : yang_combined_bound(n, k_yang, d);
      r.verdict = Verdict::Satisfied;
      if (k_yang == 0.0) r.note = "k = 0: Zhong-Yang value pi^2/d^2";
    }
    out.push_back(r);
  }

  // Ling and Andrews-Ni: Ric_phi >= (n-1)k with k > 0.
  {
    BoundReport r = base("ling", Direction::Lower, 1);
    const std::string hyp = "Ric_phi >= (n-1)k, k > 0, n >= 2: inf Ric_phi = " + fmt(ric) +
                            ", n = " + std::to_string(n);
    if (!closed_or_neumann) {
      not_applicable(r, dirichlet);
    } else if (n < 2 || !(ric > kHypothesisSlack)) {
      not_applicable(r, hyp + " (fails)");
    } else {
      r.hypothesis = hyp + ", k = " + fmt(ric / (n - 1));
      r.bound_value = *ling_bound(n, ric / (n - 1), d);
      r.verdict = Verdict::Satisfied;
    }
    out.push_back(r);
  }
  {
    BoundReport r = base("andrews_ni", Direction::Lower, 1);
    const double k = n >= 2 ? ric / (n - 1) : (ric > kHypothesisSlack ? ric : 0.0);
    const std::string hyp = "Ric_phi >= (n-1)k, k > 0: inf Ric_phi = " + fmt(ric) +
                            ", n = " + std::to_string(n);
    if (!closed_or_neumann) {
      not_applicable(r, dirichlet);
    } else if (!(ric > kHypothesisSlack)) {
      not_applicable(r, hyp + " (fails)");
    } else {
      r.hypothesis = hyp + ", k = " + fmt(k);
      r.bound_value = *andrews_ni_bound(n, k, d);
      r.verdict = Verdict::Satisfied;
      r.note = g.topology == Topology::Interval
                   ? "convex domain: the interval itself"
                   : "closed manifold: domain taken as M, d its diameter";
    }
    out.push_back(r);
  }

  // Cheng is a Riemannian statement: it bounds the drift spectrum only when
  // phi is constant, with the hypotheses on the unweighted Ricci curvature.
  // Under a genuine weight only C(n, eps) (k + j^2/d^2) survives, constant unknown.
  const double ric_riem = g.topology == Topology::SphereSymmetric
                              ? (n - 1) / (g.radius * g.radius) : 0.0;
  const bool flat_weight = c.max_grad_phi <= kHypothesisSlack;
  const std::string weighted =
      "phi is not constant (sup |grad phi| = " + fmt(c.max_grad_phi) +
      "); the weighted analogue has an unspecified constant";
  const double k_cheng = n >= 2 ? std::max(0.0, -ric_riem / (n - 1)) : 0.0;
  const int jmax = std::min<int>(j_max, static_cast<int>(best.size()) - 1);
  for (int j = 1; j <= jmax; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    auto cheng = [&](ChengRegime regime, const std::string& hyp, bool holds) {
      BoundReport r = base(to_string(regime), Direction::Upper, jj);
      if (!closed_or_neumann) not_applicable(r, dirichlet);
      else if (!flat_weight) not_applicable(r, hyp + " (" + weighted + ")");
      else if (!holds) not_applicable(r, hyp + " (fails)");
      else {
        r.hypothesis = hyp;
        r.bound_value = cheng_upper_bound(n, j, d, regime, k_cheng);
        r.verdict = Verdict::Satisfied;
      }
      return r;
    };
    out.push_back(cheng(ChengRegime::RicNonneg, "Ric >= 0: Ric = " + fmt(ric_riem),
                        ric_riem >= -kHypothesisSlack));
    BoundReport r2 = cheng(ChengRegime::RicAtLeastNminus1,
                           "Ric >= n-1: Ric = " + fmt(ric_riem) + ", n-1 = " + std::to_string(n - 1),
                           ric_riem >= (n - 1) - kHypothesisSlack);
    if (r2.verdict == Verdict::Satisfied) {
      r2.verdict = Verdict::Advisory;
      r2.note = "as stated this case is violated by the round sphere (mu_1 = 2 > 8/pi^2); "
                "reported without a verdict";
    }
    out.push_back(r2);
    out.push_back(cheng(ChengRegime::RicAtLeastMinusK,
                        "Ric >= -(n-1)k: Ric = " + fmt(ric_riem) + ", k = " + fmt(k_cheng), true));
  }
  for (auto& r : out) detail::decide(r);
  return out;
}

struct GradientCheck {
  double slack = std::numeric_limits<double>::infinity();  // min RHS - LHS
  double worst_coordinate = std::nan("");
  long points_used = 0;
  double mu1 = 0.0;
  double k = 0.0;
};

// |grad f| / sqrt(1 - f^2) <= sqrt(mu_1) + 1/2 max(sqrt(n-1), sqrt 2) sqrt((n-1)k) sqrt(1 - f^2)
// on interior points with 1 - f^2 >= 1e-4.  On the sphere an m >= 1 profile
// is evaluated on a (theta, varphi) grid as f(theta) cos(m varphi).
inline GradientCheck gradient_estimate_check(const FirstEigenfunction& f, double mu1, int n,
                                             double k, const WeightedGeometry& g) {
  detail::require(f.f.size() == g.size(), "gradient_estimate_check: samples do not match grid");
  detail::require(k >= 0, "gradient_estimate_check: k must be >= 0");
  GradientCheck out;
  out.mu1 = mu1;
  out.k = k;
  const auto d = grid_derivatives(g, f.f);
  const double scale = std::sqrt(g.metric_factor());
  const double c = 0.5 * std::max(std::sqrt(n - 1.0), std::sqrt(2.0)) * std::sqrt((n - 1) * k);
  const std::size_t lo = g.periodic() ? 0 : 1;
  const std::size_t hi = g.periodic() ? g.size() : g.size() - 1;
  auto visit = [&](double value, double grad, double where) {
    const double w = 1.0 - value * value;
    if (w < 1e-4) return;
    const double lhs = grad / std::sqrt(w);
    const double rhs = std::sqrt(mu1) + c * std::sqrt(w);
    ++out.points_used;
    if (rhs - lhs < out.slack) {
      out.slack = rhs - lhs;
      out.worst_coordinate = where;
    }
  };
  const int m = f.azimuthal_mode;
  const int nphi = m > 0 ? 16 * m : 1;
  for (std::size_t i = lo; i < hi; ++i) {
    const double fp = d.first[i] / scale;
    if (m == 0) {
      visit(f.f[i], std::abs(fp), g.grid[i]);
      continue;
    }
    const double st = std::sin(g.grid[i]) * scale;
    for (int q = 0; q < nphi; ++q) {
      const double vphi = 2.0 * std::numbers::pi * q / nphi;
      const double cs = std::cos(m * vphi), sn = std::sin(m * vphi);
      const double gth = fp * cs, gph = m * f.f[i] * sn / st;
      visit(f.f[i] * cs, std::hypot(gth, gph), g.grid[i]);
    }
  }
  if (out.points_used == 0)
    throw InvalidArgument("gradient_estimate_check: every point excluded by the 1 - f^2 floor");
  return out;
}

struct RatioDiagnostics {
  std::vector<double> ratios;  // mu_j / mu_1, j = 1..j_max
  double weyl_constant = 0.0;  // least-squares C in mu_j ~ C (j / V_phi)^(2/n)
  double max_grad_phi = 0.0;
};

inline RatioDiagnostics ratio_diagnostics(const Spectrum& s, int j_max, const WeightedGeometry& g,
                                          const CurvatureSummary& c) {
  const auto& mu = s.best_eigenvalues();
  const std::size_t first = s.has_constant_mode ? 1 : 0;
  detail::require(mu.size() > first && mu[first] > 0,
                  "ratio_diagnostics: lambda_1 must be resolved and positive");
  RatioDiagnostics r;
  r.max_grad_phi = c.max_grad_phi;
  double num = 0.0, den = 0.0;
  for (int j = 1; j <= j_max && first + static_cast<std::size_t>(j) - 1 < mu.size(); ++j) {
    const double v = mu[first + static_cast<std::size_t>(j) - 1];
    r.ratios.push_back(v / mu[first]);
    const double w = std::pow(j / c.weighted_volume_V_phi, 2.0 / g.dimension_n);
    num += v * w;
    den += w * w;
  }
  r.weyl_constant = den > 0 ? num / den : 0.0;
  return r;
}

}  // namespace driftlab
