#pragma once

// Lowest eigenpairs of symmetric-definite pencils A v = lambda B v.
//
// Small pencils use a dense solve.  Larger ones use block shift-invert
// subspace iteration: a block of p > k vectors is pushed through
// (A - sigma B)^{-1} B (sparse LDLT, factored once), B-orthonormalised and
// Rayleigh-Ritz projected each sweep.  The block captures multiple
// eigenvalues (circle and sphere degeneracies) without relying on rounding.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "driftlab/error.hpp"
#include "driftlab/operators.hpp"

namespace driftlab {

struct SolverOptions {
  double tol = 1e-10;                  // normwise backward error per pair
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
  int max_iterations = 4000;
  Eigen::Index dense_threshold = 600;  // dense solve at or below this dimension
  double shift = -1.0;                 // sigma, below the spectrum
  int guard_vectors = 12;
};

struct Spectrum {
  std::vector<double> eigenvalues;              // discrete, ascending
  Eigen::MatrixXd eigenvectors;                 // dof x k, B-orthonormal per mode
  std::vector<double> residual_norms;
  std::vector<double> discretization_estimate;  // filled by richardson()
  std::vector<double> extrapolated;             // filled by richardson()
  std::vector<int> azimuthal_mode;
  std::vector<int> azimuthal_parity;            // 0: cos(m varphi), 1: sin(m varphi)
  std::vector<int> dof_nodes;
  std::size_t grid_size = 0;
  bool has_constant_mode = false;
  bool periodic = false;
  std::string geometry_ref;
  ProblemLabel label = ProblemLabel::DriftLaplacian;
  int iterations = 0;
  std::string method;

  std::size_t size() const { return eigenvalues.size(); }

  // Extrapolated values when a companion resolution was supplied.
  const std::vector<double>& best_eigenvalues() const {
    return extrapolated.empty() ? eigenvalues : extrapolated;
  }

  // Eigenvector i on the full grid, zero at eliminated (Dirichlet) nodes.
  std::vector<double> grid_samples(std::size_t i) const {
    std::vector<double> out(grid_size, 0.0);
    for (std::size_t d = 0; d < dof_nodes.size(); ++d)
      out[static_cast<std::size_t>(dof_nodes[d])] =
          eigenvectors(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i));
    return out;
  }
};

namespace detail {

inline bool is_diagonal(const SparseMatrix& m) {
  for (Eigen::Index c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it)
      if (it.row() != it.col() && it.value() != 0.0) return false;
  return true;
}

inline double norm1(const SparseMatrix& m) {
  double best = 0.0;
  for (Eigen::Index c = 0; c < m.outerSize(); ++c) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

inline std::vector<double> backward_errors(const SparseMatrix& a, const SparseMatrix& b,
                                           const Eigen::VectorXd& lambda,
                                           const Eigen::MatrixXd& x, Eigen::Index count) {
  const double na = norm1(a), nb = norm1(b);
  const Eigen::MatrixXd ax = a * x.leftCols(count);
  const Eigen::MatrixXd bx = b * x.leftCols(count);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    const double r = (ax.col(i) - lambda[i] * bx.col(i)).norm();
    out[static_cast<std::size_t>(i)] = r / ((na + std::abs(lambda[i]) * nb) * x.col(i).norm());
  }
  return out;
}

// B-orthonormalise the columns of y in place (Cholesky QR, applied twice).
// Returns false when the Gram matrix is numerically singular.
inline bool b_orthonormalize(Eigen::MatrixXd& y, const SparseMatrix& b) {
  for (int pass = 0; pass < 2; ++pass) {
    Eigen::MatrixXd gram = y.transpose() * (b * y);
    gram = 0.5 * (gram + gram.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::MatrixXd l = llt.matrixL();
    y = l.triangularView<Eigen::Lower>().solve(y.transpose()).transpose();
  }
  return true;
}

// Modified Gram-Schmidt in the B inner product with reorthogonalisation;
// nearly dependent columns are replaced by fresh random directions.
inline void b_gram_schmidt(Eigen::MatrixXd& y, const SparseMatrix& b, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    for (int attempt = 0; attempt < 4; ++attempt) {
      const double before = std::sqrt(y.col(j).dot(b * y.col(j)));
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index i = 0; i < j; ++i) {
          const Eigen::VectorXd bi = b * y.col(i);
          y.col(j) -= bi.dot(y.col(j)) * y.col(i);
        }
      }
      const double nrm = std::sqrt(y.col(j).dot(b * y.col(j)));
      if (nrm > 1e-10 * before && nrm > 0) {
        y.col(j) /= nrm;
        break;
      }
      for (Eigen::Index r = 0; r < y.rows(); ++r) y(r, j) = normal(rng);
    }
  }
}

inline Spectrum make_spectrum_shell(const SpectralProblem& p) {
  Spectrum s;
  s.dof_nodes = p.dof_nodes;
  s.grid_size = p.grid_size;
  s.has_constant_mode = p.has_constant_mode;
  s.periodic = p.periodic;
  s.geometry_ref = p.geometry_ref;
  s.label = p.label;
  return s;
}

inline Spectrum solve_dense(const SpectralProblem& p, Eigen::Index k) {
  const Eigen::MatrixXd a = Eigen::MatrixXd(p.stiffness);
  Eigen::VectorXd lambda;
  Eigen::MatrixXd x;
  if (is_diagonal(p.mass)) {
    const Eigen::VectorXd d = Eigen::VectorXd(p.mass.diagonal()).cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd c = d.asDiagonal() * a * d.asDiagonal();
    c = 0.5 * (c + c.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    if (es.info() != Eigen::Success) throw Error("dense eigensolver failed");
    lambda = es.eigenvalues().head(k);
    x = d.asDiagonal() * es.eigenvectors().leftCols(k);
  } else {
    const Eigen::MatrixXd b = Eigen::MatrixXd(p.mass);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, b);
    if (es.info() != Eigen::Success) throw Error("dense generalized eigensolver failed");
    lambda = es.eigenvalues().head(k);
    x = es.eigenvectors().leftCols(k);
  }
  Spectrum s = make_spectrum_shell(p);
  s.eigenvalues.assign(lambda.data(), lambda.data() + k);
  s.eigenvectors = x;
  s.residual_norms = backward_errors(p.stiffness, p.mass, lambda, x, k);
  s.method = "dense";
  return s;
}

}  // namespace detail

inline Spectrum solve_lowest(const SpectralProblem& p, int k, const SolverOptions& opt = {}) {
  const Eigen::Index n = p.size();
  detail::require(k >= 1, "solve_lowest: k must be >= 1");
  if (static_cast<Eigen::Index>(k) > n - 2)
    throw InvalidArgument("solve_lowest: requested k = " + std::to_string(k) +
                          " eigenpairs but the problem dimension is " + std::to_string(n) +
                          " (need k <= dimension - 2)");
  const Eigen::Index kk = k;
  if (n <= opt.dense_threshold) {
    Spectrum s = detail::solve_dense(p, kk);
    s.azimuthal_mode.assign(static_cast<std::size_t>(k), p.azimuthal_mode);
    s.azimuthal_parity.assign(static_cast<std::size_t>(k), 0);
    return s;
  }

  const Eigen::Index block = std::min<Eigen::Index>(
      n - 1, std::max<Eigen::Index>(2 * kk, kk + opt.guard_vectors));
  const SparseMatrix shifted = p.stiffness - opt.shift * p.mass;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success)
    throw Error("solve_lowest: factorisation of A - sigma B failed");

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, block);
  for (Eigen::Index j = 0; j < block; ++j)
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = normal(rng);
  if (!detail::b_orthonormalize(x, p.mass)) detail::b_gram_schmidt(x, p.mass, rng);

  // Ritz values carry rounding noise of order eps * |A| / min diag(B); once
  // the backward error is met, stop when successive sweeps agree to that level.
  const double bmin = Eigen::VectorXd(p.mass.diagonal()).minCoeff();
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * detail::norm1(p.stiffness) /
                       std::max(bmin, std::numeric_limits<double>::min());
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(block);
  Eigen::VectorXd previous = Eigen::VectorXd::Constant(block, std::nan(""));
  std::vector<double> res;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    Eigen::MatrixXd y = ldlt.solve(p.mass * x);
    if (!detail::b_orthonormalize(y, p.mass)) detail::b_gram_schmidt(y, p.mass, rng);
    Eigen::MatrixXd h = y.transpose() * (p.stiffness * y);
    h = 0.5 * (h + h.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    lambda = es.eigenvalues();
    x = y * es.eigenvectors();
    res = detail::backward_errors(p.stiffness, p.mass, lambda, x, kk);
    bool done = true;
    for (Eigen::Index i = 0; i < kk; ++i) {
      const double scale = std::max(1.0, std::abs(lambda[i]));
      if (res[static_cast<std::size_t>(i)] > opt.tol ||
          !(std::abs(lambda[i] - previous[i]) <= std::max(1e-13 * scale, noise)))
        done = false;
    }
    previous = lambda;
    if (done) {
      Spectrum s = detail::make_spectrum_shell(p);
      s.eigenvalues.assign(lambda.data(), lambda.data() + kk);
      s.eigenvectors = x.leftCols(kk);
      s.residual_norms = res;
      s.azimuthal_mode.assign(static_cast<std::size_t>(k), p.azimuthal_mode);
      s.azimuthal_parity.assign(static_cast<std::size_t>(k), 0);
      s.iterations = it;
      s.method = "shift-invert subspace iteration";
      return s;
    }
  }
  throw NonConvergence("solve_lowest: no convergence within " +
                           std::to_string(opt.max_iterations) + " iterations",
                       std::vector<double>(lambda.data(), lambda.data() + kk), res);
}

// Solves every azimuthal problem and merges the spectra; m >= 1 pairs enter
// twice (cos and sin partners).  Ties are ordered by (m, parity).
inline Spectrum solve_lowest_modes(const std::vector<SpectralProblem>& modes, int k,
                                   const SolverOptions& opt = {}) {
  detail::require(!modes.empty(), "solve_lowest_modes: no problems");
  if (modes.size() == 1) return solve_lowest(modes.front(), k, opt);
  struct Entry {
    double value;
    int mode, parity;
    std::size_t spectrum, column;
  };
  std::vector<Spectrum> parts;
  std::vector<Entry> entries;
  for (const auto& p : modes) {
    const int want = p.azimuthal_mode == 0 ? k : (k + 1) / 2;
    const int kk = static_cast<int>(std::min<Eigen::Index>(want, p.size() - 2));
    parts.push_back(solve_lowest(p, kk, opt));
    const auto& s = parts.back();
    for (std::size_t c = 0; c < s.size(); ++c) {
      entries.push_back({s.eigenvalues[c], p.azimuthal_mode, 0, parts.size() - 1, c});
      if (p.azimuthal_mode > 0)
        entries.push_back({s.eigenvalues[c], p.azimuthal_mode, 1, parts.size() - 1, c});
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& l, const Entry& r) {
    if (l.value != r.value) return l.value < r.value;
    if (l.mode != r.mode) return l.mode < r.mode;
    return l.parity < r.parity;
  });
  detail::require(entries.size() >= static_cast<std::size_t>(k),
                  "solve_lowest_modes: not enough eigenpairs across modes");
  Spectrum out = parts.front();
  out.eigenvalues.clear();
  out.residual_norms.clear();
  out.azimuthal_mode.clear();
  out.azimuthal_parity.clear();
  out.eigenvectors.resize(parts.front().eigenvectors.rows(), k);
  out.iterations = 0;
  for (const auto& s : parts) out.iterations = std::max(out.iterations, s.iterations);
  for (int i = 0; i < k; ++i) {
    const auto& e = entries[static_cast<std::size_t>(i)];
    const auto& s = parts[e.spectrum];
    out.eigenvalues.push_back(e.value);
    out.residual_norms.push_back(s.residual_norms[e.column]);
    out.azimuthal_mode.push_back(e.mode);
    out.azimuthal_parity.push_back(e.parity);
    out.eigenvectors.col(i) = s.eigenvectors.col(static_cast<Eigen::Index>(e.column));
  }
  out.method = "per-mode " + parts.front().method;
  return out;
}

// Richardson step for a second-order scheme: `fine` on spacing h, `coarse`
// on spacing r h.  Fills the error estimate |l_h - l_rh| / (r^2 - 1) and the
// extrapolated value l_h + (l_h - l_rh) / (r^2 - 1).
inline void richardson(Spectrum& fine, const Spectrum& coarse, double ratio = 2.0) {
  detail::require(coarse.size() >= fine.size(),
                  "richardson: coarse spectrum has fewer eigenpairs than the fine one");
  detail::require(ratio > 1.0, "richardson: spacing ratio must exceed 1");
  const double q = ratio * ratio - 1.0;
  fine.discretization_estimate.resize(fine.size());
  fine.extrapolated.resize(fine.size());
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const double d = fine.eigenvalues[i] - coarse.eigenvalues[i];
    fine.discretization_estimate[i] = std::abs(d) / q;
    fine.extrapolated[i] = fine.eigenvalues[i] + d / q;
  }
}

struct FirstEigenfunction {
  std::vector<double> f;  // grid samples; for m >= 1 the theta profile of f cos(m varphi)
  double beta = 1.0;
  double eigenvalue = 0.0;
  std::size_t index = 1;
  int azimuthal_mode = 0;
};

namespace detail {

// Extreme value of the parabola through f[i-1], f[i], f[i+1]; the sample
// itself at an open end or when the vertex falls outside the cell pair.
inline double parabolic_peak(const std::vector<double>& f, std::size_t i, bool periodic) {
  const std::size_t n = f.size();
  if (!periodic && (i == 0 || i + 1 == n)) return f[i];
  const double l = f[(i + n - 1) % n], c = f[i], r = f[(i + 1) % n];
  const double curv = l - 2 * c + r;
  if (curv == 0.0) return c;
  const double t = 0.5 * (l - r) / curv;
  if (std::abs(t) > 1.0) return c;
  return c - 0.25 * (l - r) * t;
}

}  // namespace detail

// First nonconstant eigenfunction scaled so that max f = 1; beta = -min f.
// Extremes are read off the local parabola, so an off-grid peak does not
// leave max f short of 1 by O(h^2).
inline FirstEigenfunction first_eigenfunction_normalized(const Spectrum& s) {
  detail::require(s.size() >= 2, "first_eigenfunction_normalized: need >= 2 eigenpairs");
  detail::require(s.eigenvalues[1] > s.eigenvalues[0] + 1e-9 || !s.has_constant_mode,
                  "first_eigenfunction_normalized: lambda_1 is not separated from lambda_0");
  FirstEigenfunction out;
  out.index = s.has_constant_mode ? 1 : 0;
  out.eigenvalue = s.eigenvalues[out.index];
  out.azimuthal_mode = s.azimuthal_mode.empty() ? 0 : s.azimuthal_mode[out.index];
  std::vector<double> f = s.grid_samples(out.index);
  const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
  const double vmax = *hi, vmin = *lo;
  const double scale = std::max(std::abs(vmax), std::abs(vmin));
  bool flip = false;
  if (std::abs(std::abs(vmax) - std::abs(vmin)) <= 1e-9 * scale) {
    flip = f.front() < 0;
  } else {
    flip = std::abs(vmin) > std::abs(vmax);
  }
  if (flip)
    for (auto& v : f) v = -v;
  const auto imax = static_cast<std::size_t>(std::max_element(f.begin(), f.end()) - f.begin());
  const auto imin = static_cast<std::size_t>(std::min_element(f.begin(), f.end()) - f.begin());
  const double top = detail::parabolic_peak(f, imax, s.periodic);
  if (!(top > 0)) throw Error("first_eigenfunction_normalized: max f <= 0 after sign fix");
  const double bottom = detail::parabolic_peak(f, imin, s.periodic);
  for (auto& v : f) v /= top;
  out.beta = out.azimuthal_mode > 0 ? 1.0 : -bottom / top;
  out.f = std::move(f);
  return out;
}

}  // namespace driftlab
