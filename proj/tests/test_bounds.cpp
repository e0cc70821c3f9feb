#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "driftlab/bounds.hpp"
#include "driftlab/suite.hpp"

using namespace driftlab;
using std::numbers::pi;

namespace {

const ScalarFunction zero = [](double) { return 0.0; };

// Independent evaluation of the closed-form lower bound.
double eq16_oracle(int n, double k, double d) {
  const double a = std::max(std::sqrt(n - 1.0), std::sqrt(2.0));
  const double e = std::exp(0.5 * a * std::sqrt((n - 1) * k * d * d)) - 1.0;
  return pi * pi / 16.0 * std::max(n - 1.0, 2.0) * (n - 1) * k / (e * e);
}

const BoundReport& find(const std::vector<BoundReport>& all, const std::string& name, std::size_t j = 1) {
  for (const auto& r : all)
    if (r.bound_name == name && r.target_index == j) return r;
  throw std::runtime_error("missing bound " + name);
}

struct Analysed {
  WeightedGeometry g;
  Spectrum s;
  CurvatureSummary c;
  std::vector<BoundReport> bounds;
};

Analysed analyse(const WeightedGeometry& g, int k = 8) {
  Analysed a{g, spectrum_with_estimate(g, k, {}), curvature_summary(g, g.dimension_n + 1.0), {}};
  a.bounds = evaluate_bound_battery(a.g, a.s, a.c, 5);
  return a;
}

}  // namespace

TEST(YangEq16, ZeroCurvatureIsZhongYang) {
  EXPECT_DOUBLE_EQ(yang_eq16_bound(2, 0.0, pi), 1.0);
  EXPECT_DOUBLE_EQ(yang_eq16_bound(5, 0.0, 2.0), pi * pi / 4.0);
}

TEST(YangEq16, ClosedFormValues) {
  EXPECT_NEAR(eq16_oracle(2, 1.0, pi), pi * pi / 8.0 / std::pow(std::exp(pi / std::sqrt(2.0)) - 1.0, 2), 1e-15);
  EXPECT_NEAR(yang_eq16_bound(2, 1.0, pi), eq16_oracle(2, 1.0, pi), 1e-15);
  EXPECT_NEAR(yang_eq16_bound(2, 1.0, pi), 0.018256, 5e-6);
  EXPECT_NEAR(yang_eq16_bound(3, 1.0, 1.0), pi * pi / 4.0 / std::pow(std::numbers::e - 1.0, 2), 1e-14);
  EXPECT_NEAR(yang_eq16_bound(3, 1.0, 1.0), 0.8357, 1e-4);
  for (int n : {2, 3, 4, 7})
    for (double k : {0.01, 0.3, 2.0})
      for (double d : {0.5, pi, 7.0}) EXPECT_NEAR(yang_eq16_bound(n, k, d), eq16_oracle(n, k, d), 1e-13 * eq16_oracle(n, k, d));
}

TEST(YangCombined, Values) {
  EXPECT_DOUBLE_EQ(yang_combined_bound(2, 0.0, pi), 1.0);
  const double mu0 = eq16_oracle(2, 1.0, pi);
  const double grad1 = 1.0 / (1.0 + 1.0 / mu0);
  EXPECT_NEAR(grad1, 0.01793, 1e-5);
  EXPECT_DOUBLE_EQ(yang_combined_bound(2, 1.0, pi), std::max(mu0, grad1));
  double prev = 1.0;
  for (double k : {0.005, 0.01, 0.02}) {
    const double v = yang_combined_bound(2, k, pi);
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Ling, Values) {
  EXPECT_DOUBLE_EQ(*ling_bound(2, 1.0, pi), 1.375);
  EXPECT_NEAR(*ling_bound(3, 1.0, pi), 1.62, 1e-15);
  EXPECT_NEAR(*ling_bound(2, 1e-12, pi), 1.0, 1e-11);
  EXPECT_FALSE(ling_bound(2, 0.0, pi).has_value());
  EXPECT_FALSE(ling_bound(2, -1.0, pi).has_value());
}

TEST(AndrewsNi, Values) {
  EXPECT_DOUBLE_EQ(*andrews_ni_bound(2, 1.0, pi), 1.5);
  EXPECT_DOUBLE_EQ(*andrews_ni_bound(1, 1.0, pi), 1.0);
  EXPECT_GE(*andrews_ni_bound(2, 1.0, pi), *ling_bound(2, 1.0, pi));
  EXPECT_FALSE(andrews_ni_bound(2, 0.0, pi).has_value());
}

TEST(Cheng, Values) {
  EXPECT_NEAR(cheng_upper_bound(2, 1, pi, ChengRegime::RicNonneg), 96.0 / (pi * pi), 1e-14);
  EXPECT_NEAR(cheng_upper_bound(2, 1, pi, ChengRegime::RicNonneg), 9.727, 1e-3);
  EXPECT_DOUBLE_EQ(cheng_upper_bound(2, 2, pi, ChengRegime::RicNonneg),
                   4 * cheng_upper_bound(2, 1, pi, ChengRegime::RicNonneg));
  EXPECT_NEAR(cheng_upper_bound(2, 1, pi, ChengRegime::RicAtLeastNminus1), 8.0 / (pi * pi), 1e-15);
  EXPECT_DOUBLE_EQ(cheng_upper_bound(2, 3, pi, ChengRegime::RicAtLeastMinusK, 2.0),
                   0.5 + cheng_upper_bound(2, 3, pi, ChengRegime::RicNonneg));
  EXPECT_THROW(cheng_upper_bound(2, 0, pi, ChengRegime::RicNonneg), InvalidArgument);
}

TEST(BoundProperties, Eq16MonotoneAndContinuousInK) {
  for (int n : {2, 3, 5}) {
    // k = 0 is pinned to the flat value pi^2/d^2, above the k -> 0+ limit.
    EXPECT_GT(yang_eq16_bound(n, 0.0, pi), yang_eq16_bound(n, 1e-6, pi));
    double prev = yang_eq16_bound(n, 1e-6, pi);
    for (int i = 1; i <= 16000; ++i) {
      const double k = 1e-6 * std::pow(1.001, i);
      const double v = yang_eq16_bound(n, k, pi);
      EXPECT_LE(v, prev * (1 + 1e-12)) << n << " " << k;
      EXPECT_LE(prev - v, 0.05 * prev + 1e-12) << n << " " << k;  // no jumps on a fine grid
      prev = v;
    }
  }
}

TEST(BoundProperties, Eq16SmallCurvatureLimit) {
  // (e^x - 1)^2 ~ x^2 with x = c sqrt(nk) d / 2 and c^2 = max(n-1, 2).
  for (int n : {2, 3, 5, 9})
    for (double d : {0.5, 1.0, pi}) {
      const double limit = pi * pi / (4 * d * d);
      const double k = 1e-12;
      const double x = std::sqrt(std::max(n - 1.0, 2.0) * (n - 1) * k) * d / 2;
      EXPECT_NEAR(yang_eq16_bound(n, k, d), limit * (1 - x), 1e-9 * limit) << n << " " << d;
    }
}

TEST(BoundProperties, CombinedAtZeroCurvature) {
  for (int n : {2, 3, 8})
    for (double d : {0.3, 1.0, pi, 10.0}) EXPECT_EQ(yang_combined_bound(n, 0.0, d), pi * pi / (d * d));
}

TEST(BoundProperties, LingBelowAndrewsNi) {
  for (int n : {2, 3, 4, 10})
    for (double k : {1e-6, 0.1, 1.0, 50.0})
      for (double d : {0.5, pi}) EXPECT_LT(*ling_bound(n, k, d), *andrews_ni_bound(n, k, d));
}

TEST(BoundProperties, PureFunctions) {
  const auto a = analyse(build_sphere_symmetric(1.0, [](double t) { return 0.1 * std::cos(t); }, 256, 2));
  const auto again = evaluate_bound_battery(a.g, a.s, a.c, 5);
  ASSERT_EQ(a.bounds.size(), again.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(std::memcmp(&a.bounds[i].bound_value, &again[i].bound_value, sizeof(double)), 0);
    EXPECT_EQ(a.bounds[i].verdict, again[i].verdict);
  }
  EXPECT_EQ(yang_eq16_bound(3, 0.7, 2.0), yang_eq16_bound(3, 0.7, 2.0));
}

TEST(Battery, RoundSphere) {
  const auto a = analyse(build_sphere_symmetric(1.0, zero, 512, 3), 10);
  const auto& ling = find(a.bounds, "ling");
  EXPECT_DOUBLE_EQ(ling.bound_value, 1.375);
  EXPECT_EQ(ling.verdict, Verdict::Satisfied);
  EXPECT_NEAR(ling.computed, 2.0, 1e-6);
  EXPECT_EQ(find(a.bounds, "andrews_ni").verdict, Verdict::Satisfied);
  EXPECT_DOUBLE_EQ(find(a.bounds, "andrews_ni").bound_value, 1.5);
  for (std::size_t j = 1; j <= 5; ++j) {
    EXPECT_EQ(find(a.bounds, "cheng_ric_n_minus_1", j).verdict, Verdict::Advisory);
    EXPECT_EQ(find(a.bounds, "cheng_ric_nonneg", j).verdict, Verdict::Satisfied);
  }
  EXPECT_LT(find(a.bounds, "cheng_ric_n_minus_1").margin, 0.0);
}

TEST(Battery, VerdictsFollowMargins) {
  for (const auto& g : {build_circle(1.0, zero, 1024), build_circle(1.0, [](double x) { return std::cos(x); }, 1024),
                        build_interval(-3, 3, BoundaryCondition::Neumann, [](double x) { return 0.5 * x * x; }, 513),
                        build_interval(0, pi, BoundaryCondition::Dirichlet, zero, 513),
                        build_sphere_symmetric(1.0, [](double t) { return 0.1 * std::cos(t); }, 512, 3)}) {
    const auto a = analyse(g);
    for (const auto& r : a.bounds) {
      if (r.verdict == Verdict::NotApplicable) {
        EXPECT_FALSE(r.hypothesis.empty()) << r.bound_name;
        continue;
      }
      const bool holds = r.direction == Direction::Lower ? r.computed >= r.bound_value - r.tolerance
                                                         : r.computed <= r.bound_value + r.tolerance;
      if (r.verdict == Verdict::Advisory) {
        EXPECT_EQ(r.bound_name, "cheng_ric_n_minus_1");
        continue;
      }
      EXPECT_EQ(r.verdict == Verdict::Satisfied, holds) << g.id << " " << r.bound_name;
      EXPECT_EQ(r.verdict, Verdict::Satisfied) << g.id << " " << r.bound_name << " j=" << r.target_index;
    }
  }
}

TEST(Battery, HypothesesOnWeightedModels) {
  // n = 1 with Ric_phi < 0: no admissible k.
  const auto c = analyse(build_circle(1.0, [](double x) { return std::cos(x); }, 1024));
  EXPECT_EQ(find(c.bounds, "yang_eq16").verdict, Verdict::NotApplicable);
  EXPECT_EQ(find(c.bounds, "ling").verdict, Verdict::NotApplicable);
  // Cheng is stated for constant weights only.
  const auto ou = analyse(build_interval(-6, 6, BoundaryCondition::Neumann, [](double x) { return 0.5 * x * x; }, 1025));
  EXPECT_EQ(find(ou.bounds, "cheng_ric_nonneg").verdict, Verdict::NotApplicable);
  EXPECT_EQ(find(ou.bounds, "andrews_ni").verdict, Verdict::Satisfied);
  const auto d = analyse(build_interval(0, pi, BoundaryCondition::Dirichlet, zero, 257));
  for (const auto& r : d.bounds) EXPECT_EQ(r.verdict, Verdict::NotApplicable);
}

TEST(Battery, ZhongYangSharpOnFlatModels) {
  for (const auto& g : {build_circle(1.0, zero, 2048), build_interval(0, pi, BoundaryCondition::Neumann, zero, 1025)}) {
    const auto a = analyse(g, 4);
    const auto& r = find(a.bounds, "yang_eq16");
    EXPECT_EQ(r.verdict, Verdict::Satisfied);
    EXPECT_DOUBLE_EQ(r.bound_value, 1.0);
    EXPECT_NEAR(r.computed, 1.0, 1e-5);
    EXPECT_NEAR(r.margin, 0.0, 1e-5);
  }
}

namespace {

GradientCheck gradient(const WeightedGeometry& g) {
  const auto s = solve_lowest(assemble_drift_laplacian(g), 3);
  return gradient_estimate_check(first_eigenfunction_normalized(s), s.eigenvalues[1], g.dimension_n, 0.0, g);
}

}  // namespace

TEST(GradientEstimate, EqualityCases) {
  EXPECT_LE(std::abs(gradient(build_circle(1.0, zero, 2048)).slack), 1e-3);
  EXPECT_LE(std::abs(gradient(build_interval(0, pi, BoundaryCondition::Neumann, zero, 1025)).slack), 2e-3);
}

TEST(GradientEstimate, OrnsteinUhlenbeck) {
  const auto r = gradient(build_interval(-6, 6, BoundaryCondition::Neumann, [](double x) { return 0.5 * x * x; }, 1025));
  EXPECT_GE(r.slack, 0.0);
  EXPECT_GT(r.points_used, 0);
}

TEST(GradientEstimate, RejectsWhenEveryPointExcluded) {
  const auto g = build_circle(1.0, zero, 128);
  FirstEigenfunction f;
  f.f.assign(g.size(), 1.0);
  EXPECT_THROW(gradient_estimate_check(f, 1.0, 1, 0.0, g), InvalidArgument);
}

TEST(RatioDiagnostics, ModelSpectra) {
  {
    const auto g = build_circle(1.0, zero, 2048);
    const auto a = analyse(g, 7);
    const auto r = ratio_diagnostics(a.s, 6, g, a.c);
    const double expect[] = {1, 1, 4, 4, 9, 9};
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(r.ratios[j], expect[j], 1e-6);
  }
  {
    const auto g = build_sphere_symmetric(1.0, zero, 1024, 4);
    const auto a = analyse(g, 10);
    const auto r = ratio_diagnostics(a.s, 8, g, a.c);
    const double expect[] = {1, 1, 1, 3, 3, 3, 3, 3};
    for (int j = 0; j < 8; ++j) EXPECT_NEAR(r.ratios[j], expect[j], 1e-4);
  }
  {
    // Frozen OU oracle on [-6, 6]: ratios mu_j / mu_1.
    const double mu[] = {1.0000000707524395, 2.0000023905045259, 3.0000378031024293, 4.0003698749969514};
    const auto g = build_interval(-6, 6, BoundaryCondition::Neumann, [](double x) { return 0.5 * x * x; }, 1025);
    const auto a = analyse(g, 6);
    const auto r = ratio_diagnostics(a.s, 4, g, a.c);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(r.ratios[j], mu[j] / mu[0], 1e-5);
    EXPECT_NEAR(r.max_grad_phi, 6.0, 1e-9);
  }
}
