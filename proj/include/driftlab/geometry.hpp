#pragma once

// Model weighted manifolds: the circle, a segment, and the round sphere with a
// rotationally invariant weight.  Every geometry is reduced to a 1-D
// parameter grid carrying the weight phi, the Riemannian density in that
// coordinate and the finite-volume control cells used by the assemblies.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "driftlab/error.hpp"

namespace driftlab {

enum class Topology { Circle, Interval, SphereSymmetric };
enum class BoundaryCondition { Neumann, Dirichlet };

using ScalarFunction = std::function<double(double)>;

inline const char* to_string(Topology t) {
  switch (t) {
    case Topology::Circle: return "circle";
    case Topology::Interval: return "interval";
    case Topology::SphereSymmetric: return "sphere";
  }
  return "?";
}

struct WeightedGeometry {
  Topology topology = Topology::Interval;
  double radius = 1.0;  // Circle, SphereSymmetric
  double a = 0.0;       // Interval
  double b = 1.0;
  BoundaryCondition bc = BoundaryCondition::Neumann;
  int azimuthal_mode_cap = 0;
  int dimension_n = 1;
  std::string id;

  double spacing = 0.0;                 // uniform coordinate step
  std::vector<double> grid;             // node coordinates
  std::vector<double> weight_phi;       // phi at nodes
  std::vector<double> metric_density;   // Riemannian density at nodes
  std::vector<double> cell_width;       // control-volume width per node

  // Face k joins nodes face_left[k] and face_right[k] at coordinate face_coord[k].
  std::vector<int> face_left;
  std::vector<int> face_right;
  std::vector<double> face_coord;
  std::vector<double> face_density;

  ScalarFunction phi_fn;  // analytic weight when known

  std::size_t size() const { return grid.size(); }
  bool periodic() const { return topology == Topology::Circle; }
  bool has_constant_mode() const {
    return !(topology == Topology::Interval && bc == BoundaryCondition::Dirichlet);
  }

  // Coordinate metric coefficient g_xx (angles carry radius^2).
  double metric_factor() const {
    return topology == Topology::Interval ? 1.0 : radius * radius;
  }

  // Azimuthal integral folded into the reduced sphere measure.
  double azimuthal_factor() const {
    return topology == Topology::SphereSymmetric ? 2.0 * std::numbers::pi : 1.0;
  }

  // Analytic Riemannian diameter of the model.
  double diameter() const {
    return topology == Topology::Interval ? b - a : std::numbers::pi * radius;
  }

  double coordinate_length() const {
    switch (topology) {
      case Topology::Circle: return 2.0 * std::numbers::pi;
      case Topology::Interval: return b - a;
      case Topology::SphereSymmetric: return std::numbers::pi;
    }
    return 1.0;
  }

  // phi at an arbitrary coordinate: analytic when available, else linear
  // interpolation of the node samples.
  double phi_at(double x) const {
    if (phi_fn) return phi_fn(x);
    const std::size_t n = size();
    if (periodic()) {
      const double period = 2.0 * std::numbers::pi;
      double u = std::fmod(x, period);
      if (u < 0) u += period;
      const double pos = u / spacing;
      const auto i = static_cast<std::size_t>(std::floor(pos)) % n;
      const double t = pos - std::floor(pos);
      return (1 - t) * weight_phi[i] + t * weight_phi[(i + 1) % n];
    }
    if (x <= grid.front()) return weight_phi.front();
    if (x >= grid.back()) return weight_phi.back();
    auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
    const std::size_t lo = hi - 1;
    const double t = (x - grid[lo]) / (grid[hi] - grid[lo]);
    return (1 - t) * weight_phi[lo] + t * weight_phi[hi];
  }
};

// ---------------------------------------------------------------------------
// Weight specifications

struct PhiSpec {
  std::string builtin = "zero";        // zero | cos | quadratic | gaussian-well | linear
  std::vector<double> coefficients;    // builtin parameters, see make_phi
  std::vector<double> table_x;         // tabulated samples (used when non-empty)
  std::vector<double> table_phi;
};

namespace detail {

inline double coef(const std::vector<double>& c, std::size_t i, double fallback) {
  return i < c.size() ? c[i] : fallback;
}

// Cubic Hermite interpolant with finite-difference slopes.
inline ScalarFunction hermite_table(std::vector<double> x, std::vector<double> y,
                                    bool periodic) {
  const std::size_t n = x.size();
  std::vector<double> slope(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      slope[i] = (y[1] - y[0]) / (x[1] - x[0]);
    } else if (i + 1 == n) {
      slope[i] = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
    } else {
      slope[i] = (y[i + 1] - y[i - 1]) / (x[i + 1] - x[i - 1]);
    }
  }
  if (periodic) {
    const double s = 0.5 * ((y[1] - y[0]) / (x[1] - x[0]) +
                            (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]));
    slope.front() = slope.back() = s;
  }
  return [x = std::move(x), y = std::move(y), slope = std::move(slope),
          periodic](double q) {
    const double lo = x.front(), hi = x.back();
    if (periodic) {
      const double p = hi - lo;
      q = lo + std::fmod(q - lo, p);
      if (q < lo) q += p;
    }
    q = std::clamp(q, lo, hi);
    auto it = std::upper_bound(x.begin(), x.end(), q);
    std::size_t k = static_cast<std::size_t>(it - x.begin());
    if (k == 0) k = 1;
    if (k >= x.size()) k = x.size() - 1;
    const std::size_t j = k - 1;
    const double h = x[k] - x[j];
    const double t = (q - x[j]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y[j] + (t3 - 2 * t2 + t) * h * slope[j] +
           (-2 * t3 + 3 * t2) * y[k] + (t3 - t2) * h * slope[k];
  };
}

}  // namespace detail

// Builds the weight function.  Builtins and their coefficients:
//   zero
//   cos            c0*cos(x)                       [c0 = 1]
//   quadratic      c0*(x - c1)^2 / 2               [c0 = 1, c1 = 0]
//   gaussian-well  -c0*exp(-(x - c2)^2 / (2 c1^2)) [c0 = 1, c1 = 1, c2 = 0]
//   linear         c0*x                            [c0 = 1]
inline ScalarFunction make_phi(const PhiSpec& spec, bool periodic = false) {
  if (!spec.table_x.empty()) {
    const auto& x = spec.table_x;
    detail::require(x.size() == spec.table_phi.size(),
                    "phi table: coordinate and value columns differ in length");
    detail::require(x.size() >= 8, "phi table: need at least 8 samples");
    double hmin = std::numeric_limits<double>::infinity(), hmax = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
      const double h = x[i] - x[i - 1];
      detail::require(h > 0, "phi table: coordinates must be strictly increasing");
      hmin = std::min(hmin, h);
      hmax = std::max(hmax, h);
    }
    detail::require(hmax / hmin <= 10.0,
                    "phi table: spacing ratio max/min exceeds 10");
    for (double v : spec.table_phi)
      detail::require(std::isfinite(v), "phi table: non-finite phi sample");
    return detail::hermite_table(spec.table_x, spec.table_phi, periodic);
  }
  const auto& c = spec.coefficients;
  const std::string& name = spec.builtin;
  if (name == "zero") return [](double) { return 0.0; };
  if (name == "cos") {
    const double amp = detail::coef(c, 0, 1.0);
    return [amp](double x) { return amp * std::cos(x); };
  }
  if (name == "quadratic") {
    const double k = detail::coef(c, 0, 1.0), x0 = detail::coef(c, 1, 0.0);
    return [k, x0](double x) { return 0.5 * k * (x - x0) * (x - x0); };
  }
  if (name == "gaussian-well") {
    const double depth = detail::coef(c, 0, 1.0), w = detail::coef(c, 1, 1.0),
                 x0 = detail::coef(c, 2, 0.0);
    detail::require(w > 0, "gaussian-well: width must be positive");
    return [depth, w, x0](double x) {
      return -depth * std::exp(-(x - x0) * (x - x0) / (2 * w * w));
    };
  }
  if (name == "linear") {
    const double s = detail::coef(c, 0, 1.0);
    return [s](double x) { return s * x; };
  }
  throw InvalidArgument("unknown phi builtin '" + name + "'");
}

// ---------------------------------------------------------------------------
// Builders

namespace detail {

inline void check_phi_finite(const WeightedGeometry& g) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g.weight_phi[i]))
      throw InvalidArgument("phi is not finite at grid point " + std::to_string(i) +
                            " (coordinate " + std::to_string(g.grid[i]) + ")");
  }
}

}  // namespace detail

inline WeightedGeometry build_circle(double radius, const ScalarFunction& phi, int n_points,
                                     std::string id = "circle") {
  detail::require(radius > 0, "circle: radius must be positive");
  detail::require(n_points >= 8, "circle: need at least 8 grid points");
  const double period = 2.0 * std::numbers::pi;
  const double p0 = phi(0.0), p1 = phi(period);
  if (!(std::abs(p0 - p1) <= 1e-9 * (1.0 + std::abs(p0))))
    throw InvalidArgument("circle: phi is not periodic (phi(0) = " + std::to_string(p0) +
                          ", phi(2pi) = " + std::to_string(p1) + ")");
  WeightedGeometry g;
  g.topology = Topology::Circle;
  g.radius = radius;
  g.dimension_n = 1;
  g.id = std::move(id);
  g.phi_fn = phi;
  const auto n = static_cast<std::size_t>(n_points);
  g.spacing = period / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = g.spacing * static_cast<double>(i);
    g.grid.push_back(x);
    g.weight_phi.push_back(phi(x));
    g.metric_density.push_back(radius);
    g.cell_width.push_back(g.spacing);
    g.face_left.push_back(static_cast<int>(i));
    g.face_right.push_back(static_cast<int>((i + 1) % n));
    g.face_coord.push_back(x + 0.5 * g.spacing);
    g.face_density.push_back(radius);
  }
  detail::check_phi_finite(g);
  return g;
}

// Samples with the periodic endpoint repeated: phi_closed.front() and
// phi_closed.back() are the same point of the circle.
inline WeightedGeometry build_circle_from_samples(double radius,
                                                  const std::vector<double>& phi_closed,
                                                  std::string id = "circle") {
  detail::require(phi_closed.size() >= 9, "circle: need at least 8 distinct samples");
  const double p0 = phi_closed.front(), p1 = phi_closed.back();
  if (!(std::abs(p0 - p1) <= 1e-9 * (1.0 + std::abs(p0))))
    throw InvalidArgument("circle: phi samples are not periodic (first " +
                          std::to_string(p0) + ", last " + std::to_string(p1) + ")");
  const std::size_t n = phi_closed.size() - 1;
  const double h = 2.0 * std::numbers::pi / static_cast<double>(n);
  std::vector<double> x(phi_closed.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = h * static_cast<double>(i);
  WeightedGeometry g = build_circle(radius, detail::hermite_table(x, phi_closed, true),
                                    static_cast<int>(n), std::move(id));
  for (std::size_t i = 0; i < n; ++i) g.weight_phi[i] = phi_closed[i];
  g.phi_fn = nullptr;
  return g;
}

inline WeightedGeometry build_interval(double a, double b, BoundaryCondition bc,
                                       const ScalarFunction& phi, int n_points,
                                       std::string id = "interval") {
  detail::require(a < b, "interval: require a < b");
  detail::require(n_points >= 8, "interval: need at least 8 grid points");
  WeightedGeometry g;
  g.topology = Topology::Interval;
  g.a = a;
  g.b = b;
  g.bc = bc;
  g.dimension_n = 1;
  g.id = std::move(id);
  g.phi_fn = phi;
  const auto n = static_cast<std::size_t>(n_points);
  g.spacing = (b - a) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (i + 1 == n) ? b : a + g.spacing * static_cast<double>(i);
    g.grid.push_back(x);
    g.weight_phi.push_back(phi(x));
    g.metric_density.push_back(1.0);
    g.cell_width.push_back((i == 0 || i + 1 == n) ? 0.5 * g.spacing : g.spacing);
    if (i + 1 < n) {
      g.face_left.push_back(static_cast<int>(i));
      g.face_right.push_back(static_cast<int>(i + 1));
      g.face_coord.push_back(x + 0.5 * g.spacing);
      g.face_density.push_back(1.0);
    }
  }
  detail::check_phi_finite(g);
  return g;
}

// Cell-centred colatitude grid theta_i = (i + 1/2) pi / n; the pole faces
// carry zero density, which is the natural regularity condition there.
inline WeightedGeometry build_sphere_symmetric(double radius, const ScalarFunction& phi,
                                               int n_points, int azimuthal_mode_cap,
                                               std::string id = "sphere") {
  detail::require(radius > 0, "sphere: radius must be positive");
  detail::require(n_points >= 8, "sphere: need at least 8 grid points");
  detail::require(azimuthal_mode_cap >= 0, "sphere: azimuthal_mode_cap must be >= 0");
  WeightedGeometry g;
  g.topology = Topology::SphereSymmetric;
  g.radius = radius;
  g.azimuthal_mode_cap = azimuthal_mode_cap;
  g.dimension_n = 2;
  g.id = std::move(id);
  g.phi_fn = phi;
  const auto n = static_cast<std::size_t>(n_points);
  g.spacing = std::numbers::pi / static_cast<double>(n);
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < n; ++i) {
    const double th = g.spacing * (static_cast<double>(i) + 0.5);
    g.grid.push_back(th);
    g.weight_phi.push_back(phi(th));
    g.metric_density.push_back(r2 * std::sin(th));
    g.cell_width.push_back(g.spacing);
    if (i + 1 < n) {
      const double tf = g.spacing * static_cast<double>(i + 1);
      g.face_left.push_back(static_cast<int>(i));
      g.face_right.push_back(static_cast<int>(i + 1));
      g.face_coord.push_back(tf);
      g.face_density.push_back(r2 * std::sin(tf));
    }
  }
  detail::check_phi_finite(g);
  return g;
}

// The same model at another resolution.  Tabulated weights are resampled
// through the geometry's own interpolant.
inline WeightedGeometry rebuild(const WeightedGeometry& g, int n_points) {
  ScalarFunction f = g.phi_fn;
  if (!f) {
    auto copy = std::make_shared<WeightedGeometry>(g);
    f = [copy](double x) { return copy->phi_at(x); };
  }
  switch (g.topology) {
    case Topology::Circle: return build_circle(g.radius, f, n_points, g.id);
    case Topology::Interval: return build_interval(g.a, g.b, g.bc, f, n_points, g.id);
    case Topology::SphereSymmetric:
      return build_sphere_symmetric(g.radius, f, n_points, g.azimuthal_mode_cap, g.id);
  }
  throw InvalidArgument("unknown topology");
}

// Companion grid with twice the spacing (odd interval node counts keep the
// nodes nested; otherwise the spacing ratio is only close to 2).
inline WeightedGeometry coarsen(const WeightedGeometry& g) {
  const int n = static_cast<int>(g.size());
  return rebuild(g, g.topology == Topology::Interval ? (n + 1) / 2 : n / 2);
}

// Everything needed to rebuild a geometry at another resolution.
struct GeometrySpec {
  std::string id = "geometry";
  Topology topology = Topology::Circle;
  double radius = 1.0;
  double a = 0.0;
  double b = std::numbers::pi;
  BoundaryCondition bc = BoundaryCondition::Neumann;
  int azimuthal_mode_cap = 0;
  int n_points = 1024;
  PhiSpec phi;

  WeightedGeometry build(int n) const {
    const ScalarFunction f = make_phi(phi, topology == Topology::Circle);
    switch (topology) {
      case Topology::Circle: return build_circle(radius, f, n, id);
      case Topology::Interval: return build_interval(a, b, bc, f, n, id);
      case Topology::SphereSymmetric:
        return build_sphere_symmetric(radius, f, n, azimuthal_mode_cap, id);
    }
    throw InvalidArgument("unknown topology");
  }
  WeightedGeometry build() const { return build(n_points); }
};

// ---------------------------------------------------------------------------
// Grid calculus

struct GridDerivatives {
  std::vector<double> first;   // d/dx in the grid coordinate
  std::vector<double> second;  // d^2/dx^2
};

// Centred second-order differences; one-sided second-order stencils at the
// ends of non-periodic grids.
inline GridDerivatives grid_derivatives(const WeightedGeometry& g,
                                        const std::vector<double>& f) {
  const std::size_t n = g.size();
  detail::require(f.size() == n, "grid_derivatives: sample count mismatch");
  const double h = g.spacing;
  GridDerivatives d{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    if (g.periodic()) {
      const double fm = f[(i + n - 1) % n], fp = f[(i + 1) % n];
      d.first[i] = (fp - fm) / (2 * h);
      d.second[i] = (fp - 2 * f[i] + fm) / (h * h);
    } else if (i == 0) {
      d.first[i] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h);
      d.second[i] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / (h * h);
    } else if (i + 1 == n) {
      d.first[i] = (3 * f[n - 1] - 4 * f[n - 2] + f[n - 3]) / (2 * h);
      d.second[i] = (2 * f[n - 1] - 5 * f[n - 2] + 4 * f[n - 3] - f[n - 4]) / (h * h);
    } else {
      d.first[i] = (f[i + 1] - f[i - 1]) / (2 * h);
      d.second[i] = (f[i + 1] - 2 * f[i] + f[i - 1]) / (h * h);
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Curvature and volume

struct CurvatureSummary {
  double ric_phi_inf = 0.0;
  double q = std::numeric_limits<double>::infinity();
  double ric_q_inf = 0.0;  // for the stored q
  double diameter_d = 0.0;
  double weighted_volume_V_phi = 0.0;
  double max_grad_phi = 0.0;  // sup |grad phi|
};

inline double weighted_volume(const WeightedGeometry& g) {
  double v = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    v += g.metric_density[i] * g.cell_width[i] * std::exp(-g.weight_phi[i]);
  return v * g.azimuthal_factor();
}

inline double unweighted_volume(const WeightedGeometry& g) {
  double v = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) v += g.metric_density[i] * g.cell_width[i];
  return v * g.azimuthal_factor();
}

// Relative disagreement between the h and 2h second differences that marks
// phi as under-resolved.
inline constexpr double kCurvatureNoiseThreshold = 0.05;

inline CurvatureSummary curvature_summary(const WeightedGeometry& g, double q) {
  detail::require(q > 0, "curvature_summary: q must be positive");
  const std::size_t n = g.size();
  const auto d = grid_derivatives(g, g.weight_phi);

  // Resolution check: compare h and 2h second differences at interior nodes.
  {
    double diff = 0.0, scale = 0.0;
    const double h = g.spacing;
    const double l = g.coordinate_length();
    for (std::size_t i = 0; i < n; ++i) {
      const bool ok = g.periodic() || (i >= 2 && i + 2 < n);
      if (!ok) continue;
      const double fm = g.weight_phi[(i + n - 2) % n], fp = g.weight_phi[(i + 2) % n];
      const double coarse = (fp - 2 * g.weight_phi[i] + fm) / (4 * h * h);
      diff = std::max(diff, std::abs(coarse - d.second[i]));
      scale = std::max(scale, std::abs(d.second[i]));
    }
    scale = std::max(scale, 1.0 / (l * l));
    if (diff > kCurvatureNoiseThreshold * scale)
      throw UnderResolved("curvature_summary: grid does not resolve phi on '" + g.id +
                          "' (h/2h second-difference gap " + std::to_string(diff) +
                          " vs scale " + std::to_string(scale) + ")");
  }

  CurvatureSummary s;
  s.q = q;
  s.diameter_d = g.diameter();
  s.weighted_volume_V_phi = weighted_volume(g);
  double ric = std::numeric_limits<double>::infinity();
  double ricq = std::numeric_limits<double>::infinity();
  double grad = 0.0;
  const double gxx = g.metric_factor();
  for (std::size_t i = 0; i < n; ++i) {
    const double p1 = d.first[i], p2 = d.second[i];
    grad = std::max(grad, std::abs(p1) / std::sqrt(gxx));
    if (g.topology == Topology::SphereSymmetric) {
      const double r2 = g.radius * g.radius;
      const double th = g.grid[i];
      const double radial = 1.0 / r2 + p2 / r2;
      const double tangential = 1.0 / r2 + (std::cos(th) / std::sin(th)) * p1 / r2;
      ric = std::min({ric, radial, tangential});
      ricq = std::min({ricq, radial - p1 * p1 / (q * r2), tangential});
    } else {
      const double hess = p2 / gxx;
      ric = std::min(ric, hess);
      ricq = std::min(ricq, hess - p1 * p1 / (q * gxx));
    }
  }
  s.ric_phi_inf = ric;
  s.ric_q_inf = ricq;
  s.max_grad_phi = grad;
  return s;
}

// ---------------------------------------------------------------------------
// Volume-form comparison (V_R)

struct VolumeComparisonOptions {
  std::vector<double> basepoints;  // coordinates; empty -> 16 evenly spaced samples
  std::vector<double> directions;  // +-1 in 1-D, angle in [0, 2pi) on the sphere
  int radius_samples = 24;
};

struct VolumeComparisonReport {
  bool pass = true;
  double worst_margin = std::numeric_limits<double>::infinity();  // log(bound) - log(ratio)
  long pairs_checked = 0;
  bool truncated = false;
  std::string warning;
};

inline VolumeComparisonReport verify_volume_comparison(const WeightedGeometry& g,
                                                       double R, double a, double A_R,
                                                       VolumeComparisonOptions opt = {}) {
  detail::require(R > 0, "verify_volume_comparison: R must be positive");
  VolumeComparisonReport rep;
  const double pi = std::numbers::pi;
  double r_cap = R;
  if (g.topology != Topology::Interval) {
    const double inj = pi * g.radius;
    if (R > inj) {
      rep.truncated = true;
      rep.warning = "R exceeds the injectivity radius " + std::to_string(inj) +
                    "; radius pairs truncated";
      r_cap = inj;
    }
  }
  if (opt.basepoints.empty()) {
    const int m = 16;
    for (int i = 0; i < m; ++i) {
      const double t = (i + 0.5) / m;
      switch (g.topology) {
        case Topology::Circle: opt.basepoints.push_back(2 * pi * t); break;
        case Topology::Interval: opt.basepoints.push_back(g.a + (g.b - g.a) * t); break;
        case Topology::SphereSymmetric: opt.basepoints.push_back(pi * t); break;
      }
    }
  }
  if (opt.directions.empty()) {
    if (g.topology == Topology::SphereSymmetric) {
      for (int k = 0; k < 8; ++k) opt.directions.push_back(2 * pi * k / 8.0);
    } else {
      opt.directions = {1.0, -1.0};
    }
  }

  // Log of J_phi along the geodesic from x in direction xi at distance r.
  auto log_j = [&](double x, double xi, double r) {
    switch (g.topology) {
      case Topology::Circle: return -g.phi_at(x + xi * r / g.radius);
      case Topology::Interval: return -g.phi_at(x + xi * r);
      case Topology::SphereSymmetric: {
        const double s = r / g.radius;
        const double c = std::cos(x) * std::cos(s) + std::sin(x) * std::sin(s) * std::cos(xi);
        const double th = std::acos(std::clamp(c, -1.0, 1.0));
        return -g.phi_at(th) + std::log(g.radius * std::sin(s));
      }
    }
    return 0.0;
  };

  const int m = std::max(opt.radius_samples, 3);
  for (double x : opt.basepoints) {
    for (double xi : opt.directions) {
      double rmax = r_cap;
      if (g.topology == Topology::Interval) rmax = std::min(rmax, xi > 0 ? g.b - x : x - g.a);
      if (!(rmax > 0)) continue;
      // Geometric radius samples in (0, rmax), staying off the cut point.
      std::vector<double> rs;
      for (int k = 0; k < m; ++k)
        rs.push_back(rmax * std::pow(1e-3, 1.0 - (k + 0.5) / m) * (1.0 - 1e-9));
      for (std::size_t i = 0; i < rs.size(); ++i) {
        for (std::size_t j = i + 1; j < rs.size(); ++j) {
          const double log_ratio = log_j(x, xi, rs[j]) - log_j(x, xi, rs[i]);
          const double log_bound = a * std::log(rs[j] / rs[i]) + A_R;
          rep.worst_margin = std::min(rep.worst_margin, log_bound - log_ratio);
          ++rep.pairs_checked;
        }
      }
    }
  }
  rep.pass = rep.pairs_checked > 0 && rep.worst_margin >= -1e-12;
  return rep;
}

}  // namespace driftlab
