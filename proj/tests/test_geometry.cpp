#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "driftlab/geometry.hpp"
#include "oracles.hpp"

using namespace driftlab;
using std::numbers::pi;

namespace {

const ScalarFunction zero = [](double) { return 0.0; };

// 2 pi I_0(1), frozen from std::cyl_bessel_i and Gauss quadrature.
constexpr double kCircleCosVolume = 7.9549265210128439;
// sqrt(2 pi) erf(3 / sqrt 2)
constexpr double kOuVolume = 2.4998608894830947;
// 4 pi sinh(0.1) / 0.1
constexpr double kSphereCosVolume = 12.58732503985229;

}  // namespace

TEST(OracleValues, VolumesReproduce) {
  EXPECT_NEAR(2 * pi * std::cyl_bessel_i(0.0, 1.0), kCircleCosVolume, 1e-13);
  EXPECT_NEAR(oracle::integrate([](double x) { return std::exp(-std::cos(x)); }, 0, 2 * pi),
              kCircleCosVolume, 1e-12);
  EXPECT_NEAR(std::sqrt(2 * pi) * std::erf(3 / std::sqrt(2.0)), kOuVolume, 1e-14);
  EXPECT_NEAR(oracle::integrate([](double x) { return std::exp(-x * x / 2); }, -3, 3), kOuVolume, 1e-12);
  EXPECT_NEAR(2 * pi * oracle::integrate([](double t) { return std::exp(-0.1 * std::cos(t)) * std::sin(t); }, 0, pi),
              kSphereCosVolume, 1e-12);
}

TEST(BuildCircle, FlatVolumeIsCircumference) {
  const auto g = build_circle(1.0, zero, 2048);
  EXPECT_NEAR(weighted_volume(g), 2 * pi, 1e-10);
  EXPECT_EQ(g.dimension_n, 1);
  for (double m : g.metric_density) EXPECT_EQ(m, 1.0);
}

TEST(BuildCircle, CosineWeightVolume) {
  const auto g = build_circle(1.0, [](double x) { return std::cos(x); }, 2048);
  // Periodic trapezoid rule: spectrally accurate.
  EXPECT_NEAR(weighted_volume(g), kCircleCosVolume, 1e-12);
}

TEST(BuildCircle, RadiusTwo) {
  const auto g = build_circle(2.0, zero, 256);
  EXPECT_NEAR(weighted_volume(g), 4 * pi, 1e-12);
  EXPECT_DOUBLE_EQ(g.diameter(), 2 * pi);
}

TEST(BuildCircle, RejectsNonPeriodicWeight) {
  EXPECT_THROW(build_circle(1.0, [](double x) { return x; }, 64), InvalidArgument);
}

TEST(BuildCircle, RejectsTooFewPoints) {
  EXPECT_THROW(build_circle(1.0, zero, 7), InvalidArgument);
}

TEST(BuildCircle, FromSamplesIdentifiesEndpoints) {
  std::vector<double> closed;
  for (int i = 0; i <= 64; ++i) closed.push_back(std::cos(2 * pi * i / 64));
  const auto g = build_circle_from_samples(1.0, closed);
  EXPECT_EQ(g.size(), 64u);
  closed.back() += 0.1;
  EXPECT_THROW(build_circle_from_samples(1.0, closed), InvalidArgument);
}

TEST(BuildInterval, FlatNeumann) {
  const auto g = build_interval(0, pi, BoundaryCondition::Neumann, zero, 513);
  EXPECT_DOUBLE_EQ(g.diameter(), pi);
  EXPECT_NEAR(weighted_volume(g), pi, 1e-13);
}

TEST(BuildInterval, GaussianWeightVolume) {
  const auto g = build_interval(-3, 3, BoundaryCondition::Neumann, [](double x) { return 0.5 * x * x; }, 1025);
  // Trapezoid error h^2/12 |f'(3) - f'(-3)| ~ 2e-7.
  EXPECT_NEAR(weighted_volume(g), kOuVolume, 1e-6);
  const auto fine = rebuild(g, 4097);
  EXPECT_NEAR(weighted_volume(fine), kOuVolume, 1e-7);
}

TEST(BuildInterval, DirichletIsValid) {
  const auto g = build_interval(0, 1, BoundaryCondition::Dirichlet, zero, 64);
  EXPECT_DOUBLE_EQ(g.diameter(), 1.0);
  EXPECT_FALSE(g.has_constant_mode());
}

TEST(BuildInterval, RejectsEmptyRange) {
  EXPECT_THROW(build_interval(1, 1, BoundaryCondition::Neumann, zero, 64), InvalidArgument);
  EXPECT_THROW(build_interval(2, 1, BoundaryCondition::Neumann, zero, 64), InvalidArgument);
}

TEST(BuildSphere, Volumes) {
  const auto flat = build_sphere_symmetric(1.0, zero, 2048, 5);
  EXPECT_NEAR(weighted_volume(flat), 4 * pi, 1e-5);
  EXPECT_EQ(flat.dimension_n, 2);
  const auto w = build_sphere_symmetric(1.0, [](double t) { return 0.1 * std::cos(t); }, 2048, 3);
  EXPECT_NEAR(weighted_volume(w), kSphereCosVolume, 1e-5);
}

TEST(BuildSphere, GridAvoidsPoles) {
  const auto g = build_sphere_symmetric(1.0, zero, 16, 0);
  EXPECT_GT(g.grid.front(), 0.0);
  EXPECT_LT(g.grid.back(), pi);
  for (double m : g.metric_density) EXPECT_GT(m, 0.0);
}

TEST(BuildSphere, RejectsNegativeCap) {
  EXPECT_THROW(build_sphere_symmetric(1.0, zero, 64, -1), InvalidArgument);
}

TEST(Curvature, FlatCircle) {
  const auto g = build_circle(1.0, zero, 256);
  for (double q : {0.5, 1.0, 10.0}) {
    const auto c = curvature_summary(g, q);
    EXPECT_EQ(c.ric_phi_inf, 0.0);
    EXPECT_EQ(c.ric_q_inf, 0.0);
    EXPECT_DOUBLE_EQ(c.diameter_d, pi);
  }
}

TEST(Curvature, OrnsteinUhlenbeck) {
  const auto g = build_interval(-3, 3, BoundaryCondition::Neumann, [](double x) { return 0.5 * x * x; }, 601);
  const auto c = curvature_summary(g, 1.0);
  EXPECT_NEAR(c.ric_phi_inf, 1.0, 1e-9);
  // min(1 - x^2) at x = +-3, one-sided first difference there is exact for a quadratic.
  EXPECT_NEAR(c.ric_q_inf, -8.0, 1e-9);
}

TEST(Curvature, RoundSphere) {
  const auto g = build_sphere_symmetric(1.0, zero, 256, 2);
  const auto c = curvature_summary(g, 3.0);
  EXPECT_DOUBLE_EQ(c.ric_phi_inf, 1.0);
  EXPECT_DOUBLE_EQ(c.diameter_d, pi);
}

TEST(Curvature, RejectsUnresolvedWeight) {
  const auto g = build_circle(1.0, [](double x) { return std::cos(20 * x); }, 64);
  EXPECT_THROW(curvature_summary(g, 1.0), UnderResolved);
}

TEST(Curvature, RejectsNonPositiveQ) {
  const auto g = build_circle(1.0, zero, 64);
  EXPECT_THROW(curvature_summary(g, 0.0), InvalidArgument);
}

TEST(GeometryProperties, VolumeDecreasesWhenWeightIncreases) {
  const auto bump = [](double x) { return std::exp(-(x - 1.0) * (x - 1.0)); };
  for (double s : {0.1, 0.5, 2.0}) {
    const auto lo = build_interval(0, pi, BoundaryCondition::Neumann, [&](double x) { return std::cos(x); }, 257);
    const auto hi = build_interval(0, pi, BoundaryCondition::Neumann,
                                   [&](double x) { return std::cos(x) + s * bump(x); }, 257);
    EXPECT_LT(weighted_volume(hi), weighted_volume(lo));
    const auto slo = build_sphere_symmetric(1.0, [](double t) { return 0.2 * std::cos(t); }, 128, 1);
    const auto shi = build_sphere_symmetric(1.0, [&](double t) { return 0.2 * std::cos(t) + s; }, 128, 1);
    EXPECT_LT(weighted_volume(shi), weighted_volume(slo));
  }
}

TEST(GeometryProperties, ConstantWeightHasUnweightedCurvature) {
  for (double c0 : {-2.0, 0.0, 3.5}) {
    const ScalarFunction f = [c0](double) { return c0; };
    const auto s = curvature_summary(build_sphere_symmetric(1.0, f, 128, 1), 2.0);
    EXPECT_DOUBLE_EQ(s.ric_phi_inf, 1.0);
    EXPECT_DOUBLE_EQ(s.ric_q_inf, 1.0);
    const auto c = curvature_summary(build_circle(1.0, f, 128), 2.0);
    EXPECT_EQ(c.ric_phi_inf, 0.0);
  }
}

TEST(GeometryProperties, RicQMonotoneInQ) {
  const auto g = build_circle(1.0, [](double x) { return 0.7 * std::cos(x); }, 512);
  const auto s = build_sphere_symmetric(1.0, [](double t) { return 0.3 * std::cos(t); }, 512, 1);
  double prev_c = -INFINITY, prev_s = -INFINITY;
  for (double q : {0.25, 0.5, 1.0, 2.0, 4.0, 16.0, 1e6}) {
    const double rc = curvature_summary(g, q).ric_q_inf;
    const double rs = curvature_summary(s, q).ric_q_inf;
    EXPECT_GE(rc, prev_c);
    EXPECT_GE(rs, prev_s);
    EXPECT_LE(rc, curvature_summary(g, q).ric_phi_inf);
    EXPECT_LE(rs, curvature_summary(s, q).ric_phi_inf);
    prev_c = rc;
    prev_s = rs;
  }
}

TEST(GeometryProperties, RadiusScaling) {
  const ScalarFunction phi = [](double x) { return 0.3 * std::cos(x); };
  for (double r : {0.5, 3.0}) {
    const auto c1 = build_circle(1.0, phi, 512), cr = build_circle(r, phi, 512);
    EXPECT_NEAR(cr.diameter(), r * c1.diameter(), 1e-14);
    EXPECT_NEAR(weighted_volume(cr), r * weighted_volume(c1), 1e-12);
    const auto s1 = build_sphere_symmetric(1.0, phi, 512, 1), sr = build_sphere_symmetric(r, phi, 512, 1);
    EXPECT_NEAR(sr.diameter(), r * s1.diameter(), 1e-14);
    EXPECT_NEAR(weighted_volume(sr), r * r * weighted_volume(s1), 1e-11);
  }
}

TEST(VolumeComparison, FlatCircle) {
  const auto g = build_circle(1.0, zero, 128);
  for (double a : {0.0, 1.0, 3.0}) {
    const auto rep = verify_volume_comparison(g, 2.0, a, 0.0);
    EXPECT_TRUE(rep.pass) << a;
    EXPECT_GT(rep.pairs_checked, 0);
  }
}

TEST(VolumeComparison, RoundSphereWithLinearGrowth) {
  const auto g = build_sphere_symmetric(1.0, zero, 128, 0);
  const auto rep = verify_volume_comparison(g, pi / 2, 1.0, 0.0);
  EXPECT_TRUE(rep.pass);
  // sin r2 / sin r1 > 1 for r1 < r2 < pi/2, so a = 0 must fail.
  EXPECT_FALSE(verify_volume_comparison(g, pi / 2, 0.0, 0.0).pass);
}

TEST(VolumeComparison, LinearWeightOnInterval) {
  const auto g = build_interval(-2, 2, BoundaryCondition::Neumann, [](double x) { return x; }, 128);
  VolumeComparisonOptions opt;
  opt.basepoints = {0.0};
  opt.directions = {1.0};
  const auto rep = verify_volume_comparison(g, 1.5, 0.0, 0.0, opt);
  EXPECT_TRUE(rep.pass);
  // Closed form: log ratio = -(r2 - r1), so the worst margin sits at the closest pair.
  EXPECT_GE(rep.worst_margin, 0.0);
  opt.directions = {-1.0};
  EXPECT_FALSE(verify_volume_comparison(g, 1.5, 0.0, 0.0, opt).pass);
}

TEST(VolumeComparison, TruncatesBeyondInjectivityRadius) {
  const auto g = build_circle(1.0, zero, 128);
  const auto rep = verify_volume_comparison(g, 10.0, 0.0, 0.0);
  EXPECT_TRUE(rep.truncated);
  EXPECT_FALSE(rep.warning.empty());
}
