#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "driftlab/eigensolve.hpp"
#include "driftlab/suite.hpp"

using namespace driftlab;
using std::numbers::pi;

namespace {

const ScalarFunction zero = [](double) { return 0.0; };
const ScalarFunction ou = [](double x) { return 0.5 * x * x; };

double b_orthonormality_error(const Spectrum& s, const SparseMatrix& b) {
  const Eigen::MatrixXd g = s.eigenvectors.transpose() * (b * s.eigenvectors);
  return (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(SolveLowest, FlatCircle) {
  const auto g = build_circle(1.0, zero, 4096);
  const auto s = spectrum_with_estimate(g, 5, {});
  const double expect[] = {0, 1, 1, 4, 4};
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(s.extrapolated[i], expect[i], 1e-6) << i;
    // Raw discrete value: 2(1 - cos(m h)) / h^2 = m^2 - m^4 h^2 / 12 + ...
    const double m = std::sqrt(expect[i]);
    const double exact_discrete = 2 * (1 - std::cos(m * g.spacing)) / (g.spacing * g.spacing);
    EXPECT_NEAR(s.eigenvalues[i], exact_discrete, 1e-8) << i;
  }
}

TEST(SolveLowest, RoundSphereMerged) {
  const auto g = build_sphere_symmetric(1.0, zero, 1024, 5);
  const auto s = spectrum_with_estimate(g, 9, {});
  const double expect[] = {0, 2, 2, 2, 6, 6, 6, 6, 6};
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(s.extrapolated[i], expect[i], 1e-4) << i;
  for (int i = 0; i < 9; ++i)
    EXPECT_NEAR(s.eigenvalues[i], expect[i], std::max(1e-9, 2 * expect[i] * g.spacing * g.spacing)) << i;
}

TEST(SolveLowest, ZonalSphereOnly) {
  const auto g = build_sphere_symmetric(1.0, zero, 1024, 0);
  const auto s = spectrum_with_estimate(g, 4, {});
  for (int l = 0; l < 4; ++l) EXPECT_NEAR(s.extrapolated[static_cast<std::size_t>(l)], l * (l + 1), 1e-4);
}

TEST(SolveLowest, DirichletInterval) {
  const auto g = build_interval(0, pi, BoundaryCondition::Dirichlet, zero, 2049);
  const auto s = spectrum_with_estimate(g, 3, {});
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.extrapolated[i], (i + 1) * (i + 1), 1e-6) << i;
}

TEST(SolveLowest, RejectsTooManyPairs) {
  const auto p = assemble_drift_laplacian(build_circle(1.0, zero, 16));
  EXPECT_THROW(solve_lowest(p, 15), InvalidArgument);
  EXPECT_THROW(solve_lowest(p, 0), InvalidArgument);
  EXPECT_NO_THROW(solve_lowest(p, 14));
}

TEST(SolveLowest, ReportsNonConvergence) {
  const auto p = assemble_drift_laplacian(build_circle(1.0, [](double x) { return std::cos(x); }, 2000));
  SolverOptions opt;
  opt.max_iterations = 1;
  try {
    solve_lowest(p, 6, opt);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_EQ(e.ritz_values.size(), 6u);
    EXPECT_EQ(e.residual_norms.size(), 6u);
  }
}

TEST(SolveLowest, SparseAndDensePathsAgree) {
  const auto p = assemble_drift_laplacian(
      build_interval(-3, 3, BoundaryCondition::Neumann, ou, 401));
  SolverOptions sparse;
  sparse.dense_threshold = 0;
  const auto a = solve_lowest(p, 8), b = solve_lowest(p, 8, sparse);
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(a.eigenvalues[i], b.eigenvalues[i], 1e-9 * std::max(1.0, a.eigenvalues[i]));
}

TEST(SolveLowest, DeterministicForSeed) {
  const auto p = assemble_drift_laplacian(build_circle(1.0, [](double x) { return 0.5 * std::cos(x); }, 3000));
  SolverOptions opt;
  opt.seed = 42;
  const auto a = solve_lowest(p, 6, opt), b = solve_lowest(p, 6, opt);
  EXPECT_EQ(a.eigenvalues, b.eigenvalues);
  EXPECT_EQ((a.eigenvectors - b.eigenvectors).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SpectrumInvariants, HoldOnModelProblems) {
  const std::vector<WeightedGeometry> gs{
      build_circle(1.0, [](double x) { return std::cos(x); }, 2048),
      build_interval(-3, 3, BoundaryCondition::Neumann, ou, 1025),
      build_interval(0, 1, BoundaryCondition::Dirichlet, zero, 1000),
      build_sphere_symmetric(1.0, [](double t) { return 0.1 * std::cos(t); }, 700, 2)};
  for (const auto& g : gs) {
    for (const auto& p : assemble_drift_modes(g)) {
      SolverOptions opt;
      const auto s = solve_lowest(p, 6, opt);
      EXPECT_GE(s.eigenvalues[0], -1e-9) << g.id;
      if (p.has_constant_mode) {
        EXPECT_LE(s.eigenvalues[0], 1e-9) << g.id;
      }
      EXPECT_LE(b_orthonormality_error(s, p.mass), 1e-8) << g.id;
      for (double r : s.residual_norms) EXPECT_LE(r, opt.tol) << g.id;
      for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s.eigenvalues[i - 1], s.eigenvalues[i]);
    }
  }
}

TEST(SpectrumInvariants, DirichletAboveNeumann) {
  const std::vector<ScalarFunction> ws{[](double x) { return 0.3 * std::cos(x); },
                                       [](double x) { return 0.3 * std::cos(2 * x); },
                                       [](double x) { return std::exp(-4 * (x - 1) * (x - 1)); },
                                       [](double x) { return 2 * (x - 1) * (x - 1); }};
  std::vector<Spectrum> dirs, neus;
  for (const auto& w : ws) {
    dirs.push_back(spectrum_with_estimate(build_interval(0, pi, BoundaryCondition::Dirichlet, w, 801), 5, {}));
    neus.push_back(spectrum_with_estimate(build_interval(0, pi, BoundaryCondition::Neumann, w, 801), 6, {}));
    for (int j = 0; j < 5; ++j) EXPECT_GT(dirs.back().extrapolated[j], neus.back().extrapolated[j]) << j;
  }
  // u' of a Neumann eigenfunction is a Dirichlet eigenfunction for the drift
  // -phi; 0.3 cos x maps to itself under x -> pi - x, so the spectra shift by one.
  for (int j = 0; j < 5; ++j) EXPECT_NEAR(dirs[0].extrapolated[j], neus[0].extrapolated[j + 1], 1e-9) << j;
  // With phi'' = 4 the same map lowers every positive Neumann value by 4.
  for (int j = 0; j < 5; ++j) EXPECT_NEAR(dirs[3].extrapolated[j], neus[3].extrapolated[j + 1] - 4, 1e-7) << j;
  // Flat case interlaces with the analytic values j^2 on both sides.
  const auto dflat = spectrum_with_estimate(build_interval(0, pi, BoundaryCondition::Dirichlet, zero, 801), 4, {});
  const auto nflat = spectrum_with_estimate(build_interval(0, pi, BoundaryCondition::Neumann, zero, 801), 5, {});
  for (int j = 0; j < 4; ++j) {
    EXPECT_NEAR(dflat.extrapolated[j], (j + 1) * (j + 1), 1e-6);
    EXPECT_NEAR(nflat.extrapolated[j + 1], (j + 1) * (j + 1), 1e-6);
  }
}

TEST(SpectrumInvariants, SecondOrderRefinement) {
  const ScalarFunction w = [](double x) { return 0.5 * std::cos(x); };
  std::vector<std::vector<double>> lam;
  for (int n : {256, 512, 1024}) lam.push_back(solve_lowest(assemble_drift_laplacian(build_circle(1.0, w, n)), 6).eigenvalues);
  for (int j = 1; j < 6; ++j) {
    const double r = (lam[0][j] - lam[1][j]) / (lam[1][j] - lam[2][j]);
    EXPECT_NEAR(r, 4.0, 0.2) << j;
  }
}

TEST(SpectrumInvariants, WeylScale) {
  // lambda_k ~ (k pi / |M|)^2 on 1-D models.  On the circle the pairing
  // m^2 against ((2m - 1) / 2)^2 keeps the ratio above 1.5 until k = 5.
  for (const auto& g : {build_interval(0, pi, BoundaryCondition::Neumann, zero, 1025),
                        build_interval(0, pi, BoundaryCondition::Neumann, [](double x) { return 0.3 * std::cos(x); }, 1025),
                        build_circle(1.0, [](double x) { return 0.2 * std::cos(x); }, 2048)}) {
    const auto s = solve_lowest(assemble_drift_laplacian(g), 21);
    const double len = g.periodic() ? 2 * pi * g.radius : g.b - g.a;
    for (int k = g.periodic() ? 5 : 1; k <= 20; ++k) {
      const double weyl = std::pow(k * pi / len, 2);
      EXPECT_LE(s.eigenvalues[k] / weyl, 1.5) << g.id << " k=" << k;
      EXPECT_GE(s.eigenvalues[k] / weyl, 1 / 1.5) << g.id << " k=" << k;
    }
  }
}

TEST(Richardson, EstimateAndExtrapolation) {
  Spectrum fine, coarse;
  fine.eigenvalues = {0.0, 0.999, 3.99};
  coarse.eigenvalues = {0.0, 0.996, 3.96, 8.0};
  richardson(fine, coarse);
  EXPECT_NEAR(fine.discretization_estimate[1], 0.001, 1e-15);
  EXPECT_NEAR(fine.extrapolated[2], 4.0, 1e-14);
  coarse.eigenvalues.resize(2);
  EXPECT_THROW(richardson(fine, coarse), InvalidArgument);
}

TEST(FirstEigenfunction, FlatCircleIsShiftedCosine) {
  const auto g = build_circle(1.0, zero, 1024);
  const auto s = solve_lowest(assemble_drift_laplacian(g), 3);
  const auto f = first_eigenfunction_normalized(s);
  EXPECT_NEAR(f.beta, 1.0, 1e-5);
  const double top = *std::max_element(f.f.begin(), f.f.end());
  EXPECT_LE(top, 1.0 + 1e-12);
  EXPECT_GE(top, 1.0 - g.spacing * g.spacing);
  // f = cos(theta - theta0): f^2 + (f')^2 = 1.
  const auto d = grid_derivatives(g, f.f);
  for (std::size_t i = 0; i < g.size(); i += 37) EXPECT_NEAR(f.f[i] * f.f[i] + d.first[i] * d.first[i], 1.0, 1e-4);
}

TEST(FirstEigenfunction, FlatIntervalIsCosine) {
  const auto g = build_interval(0, pi, BoundaryCondition::Neumann, zero, 513);
  const auto f = first_eigenfunction_normalized(solve_lowest(assemble_drift_laplacian(g), 3));
  EXPECT_NEAR(f.beta, 1.0, 1e-9);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(f.f[i], std::cos(g.grid[i]), 1e-5);
}

TEST(FirstEigenfunction, OrnsteinUhlenbeckIsOdd) {
  const auto g = build_interval(-6, 6, BoundaryCondition::Neumann, ou, 1025);
  const auto f = first_eigenfunction_normalized(solve_lowest(assemble_drift_laplacian(g), 3));
  // The end cells carry mass e^{-18}, so the solver only pins them loosely.
  EXPECT_NEAR(f.beta, 1.0, 1e-4);
  const std::size_t n = g.size();
  const std::size_t mid = n / 2;
  // Away from the ends f is proportional to x; the Neumann layer at x = +-6
  // bends it, so the slope is not exactly 1/6.
  const double slope = f.f[mid + 128] / g.grid[mid + 128];
  EXPECT_GT(slope, 1.0 / 6.0);
  EXPECT_LT(slope, 1.0 / 5.5);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(g.grid[i]) > 4.0) continue;
    EXPECT_NEAR(f.f[i], -f.f[n - 1 - i], 1e-6) << g.grid[i];
    EXPECT_NEAR(f.f[i], slope * g.grid[i], 1e-4) << g.grid[i];
  }
}

TEST(FirstEigenfunction, NeedsTwoPairs) {
  const auto s = solve_lowest(assemble_drift_laplacian(build_circle(1.0, zero, 64)), 1);
  EXPECT_THROW(first_eigenfunction_normalized(s), InvalidArgument);
}
