#pragma once

// Unmixing estimation: whitening by the inverse symmetric square root of
// the covariance, then orthogonal approximate joint diagonalization of the
// whitened local covariance matrices by cyclic Jacobi rotations. Each
// rotation angle solves a closed-form 2x2 problem (principal eigenvector of
// the accumulated [alpha, beta] Gram matrix), so the off-diagonal objective
// never increases. Rows of the unmixing matrix are ordered by descending
// pseudo-eigenvalue and sign-fixed.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sbss/errors.hpp"
#include "sbss/kernels.hpp"
#include "sbss/sample.hpp"
#include "sbss/scatter.hpp"

namespace sbss {

// Inverse symmetric square root of a covariance matrix. The smallest
// eigenvalue must exceed 1e-12 times the largest.
inline Matrix whiten(const Matrix& cov) {
  if (cov.rows() != cov.cols()) throw ValidationError("whiten: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  if (es.info() != Eigen::Success) throw SingularScatter("whiten: eigendecomposition failed");
  const Vector& ev = es.eigenvalues();
  const double largest = ev(ev.size() - 1);
  if (!(largest > 0.0) || ev(0) <= 1e-12 * largest) {
    throw SingularScatter("whiten: covariance is numerically singular (eigenvalue range [" +
                          std::to_string(ev(0)) + ", " + std::to_string(largest) + "])");
  }
  return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

inline Matrix whiten(const ScatterMatrix& cov) { return whiten(cov.m); }

struct JointDiagOptions {
  int max_sweeps = 200;
  double angle_tol = 1e-12;
};

// Orthogonal U maximizing sum_l ||diag(U^T M_l U)||^2 over the given
// symmetric matrices. Initialized at the eigenbasis of the matrix sum
// (eigenvalues descending) so the result does not depend on the input
// basis; with a single matrix this reduces to exact diagonalization.
inline Matrix joint_diagonalize(const std::vector<Matrix>& mats,
                                const JointDiagOptions& opt = {}) {
  if (mats.empty()) throw ValidationError("joint_diagonalize: at least one matrix required");
  const Index p = mats[0].rows();
  for (const Matrix& m : mats) {
    if (m.rows() != p || m.cols() != p) {
      throw ValidationError("joint_diagonalize: matrices must be square and same size");
    }
  }

  Matrix total = Matrix::Zero(p, p);
  for (const Matrix& m : mats) total += m;
  total = ((total + total.transpose()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(total);
  if (es.info() != Eigen::Success) {
    throw NoConvergence("joint_diagonalize: initial eigendecomposition failed");
  }
  Matrix u = es.eigenvectors().rowwise().reverse();  // descending eigenvalues

  std::vector<Matrix> work;
  work.reserve(mats.size());
  for (const Matrix& m : mats) {
    Matrix a = u.transpose() * ((m + m.transpose()) / 2.0) * u;
    work.push_back(((a + a.transpose()) / 2.0).eval());
  }

  if (p < 2) return u;

  double max_angle = 0.0;
  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    max_angle = 0.0;
    for (Index i = 0; i < p - 1; ++i) {
      for (Index j = i + 1; j < p; ++j) {
        // Gram matrix of the per-matrix vectors (alpha, beta) with
        // alpha = A_ii - A_jj, beta = 2 A_ij.
        double gaa = 0.0, gab = 0.0, gbb = 0.0;
        for (const Matrix& a : work) {
          const double alpha = a(i, i) - a(j, j);
          const double beta = a(i, j) + a(j, i);
          gaa += alpha * alpha;
          gab += alpha * beta;
          gbb += beta * beta;
        }
        // Principal eigenvector (cos 2t, sin 2t) with cos 2t >= 0 keeps the
        // rotation inside [-pi/4, pi/4].
        const double lam =
            0.5 * (gaa + gbb) + std::sqrt(0.25 * (gaa - gbb) * (gaa - gbb) + gab * gab);
        double vx, vy;
        if (gaa >= gbb) {
          vx = lam - gbb;
          vy = gab;
        } else {
          vx = gab;
          vy = lam - gaa;
        }
        if (vx < 0.0) {
          vx = -vx;
          vy = -vy;
        }
        const double vn = std::hypot(vx, vy);
        if (vn == 0.0) continue;
        const double theta = 0.5 * std::atan2(vy, vx);
        max_angle = std::max(max_angle, std::abs(theta));
        if (std::abs(theta) <= opt.angle_tol) continue;

        const double c = std::cos(theta);
        const double s = std::sin(theta);
        for (Matrix& a : work) {
          for (Index t = 0; t < p; ++t) {
            const double ri = a(i, t), rj = a(j, t);
            a(i, t) = c * ri + s * rj;
            a(j, t) = -s * ri + c * rj;
          }
          for (Index t = 0; t < p; ++t) {
            const double ci = a(t, i), cj = a(t, j);
            a(t, i) = c * ci + s * cj;
            a(t, j) = -s * ci + c * cj;
          }
        }
        for (Index t = 0; t < p; ++t) {
          const double ui = u(t, i), uj = u(t, j);
          u(t, i) = c * ui + s * uj;
          u(t, j) = -s * ui + c * uj;
        }
      }
    }
    if (max_angle <= opt.angle_tol) return u;
  }
  throw NoConvergence("joint_diagonalize: no convergence after " +
                      std::to_string(opt.max_sweeps) + " sweeps (last rotation " +
                      std::to_string(max_angle) + ")");
}

// Fitted unmixing solution.
struct SbssSolution {
  Matrix gamma;                    // p x p unmixing matrix, rows ordered and sign-fixed
  Matrix whitener;                 // inverse symmetric square root of M(f0)
  std::vector<Matrix> d_matrices;  // D_l = gamma M(f_l) gamma^T
  Vector pseudo_eigenvalues;       // lambda_j = sum_l D_l(j,j)^2, descending
  Matrix latent;                   // n x p, z_i = gamma (x_i - mean)
  Vector mean;                     // column means of the data
  Index n = 0;
  std::vector<double> kernel_normalizations;  // F_{n,f_l}
  bool centered = true;
  bool renormalized = true;

  Index p() const { return gamma.rows(); }
};

struct FitOptions {
  bool centered = true;      // empirically centered local covariances
  bool renormalized = true;  // include the 1/sqrt(F_{n,f}) factor
  JointDiagOptions jd{};
};

// Fit against a precomputed scatter plan (values live on the plan's
// location set). Used directly by bootstrap refits.
inline SbssSolution fit(const ScatterPlan& plan, const Matrix& values,
                        const FitOptions& opt = {}) {
  if (values.rows() != plan.n()) {
    throw ValidationError("fit: values have " + std::to_string(values.rows()) +
                          " rows, expected " + std::to_string(plan.n()));
  }
  if (values.cols() < 1) throw ValidationError("fit: needs at least one field");
  const Index p = values.cols();
  const int k = plan.k();

  Matrix w = whiten(plan.identity_scatter(values, opt.centered).m);

  std::vector<Matrix> whitened;
  whitened.reserve(static_cast<std::size_t>(k));
  for (int l = 0; l < k; ++l) {
    Matrix s = plan.scatter(values, l, opt.centered).m;
    if (!opt.renormalized) s *= std::sqrt(plan.normalizations()[static_cast<std::size_t>(l)]);
    Matrix a = w * s * w;
    whitened.push_back(((a + a.transpose()) / 2.0).eval());
  }

  Matrix u = joint_diagonalize(whitened, opt.jd);

  std::vector<Matrix> d(whitened.size());
  for (std::size_t l = 0; l < whitened.size(); ++l) {
    Matrix a = u.transpose() * whitened[l] * u;
    d[l] = ((a + a.transpose()) / 2.0).eval();
  }

  Vector lambda = Vector::Zero(p);
  for (const Matrix& dm : d) lambda += dm.diagonal().cwiseAbs2();

  // Descending pseudo-eigenvalues; ties keep the pre-rotation column order.
  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return lambda(a) > lambda(b); });

  Matrix u_sorted(p, p);
  Vector lambda_sorted(p);
  for (Index t = 0; t < p; ++t) {
    u_sorted.col(t) = u.col(order[static_cast<std::size_t>(t)]);
    lambda_sorted(t) = lambda(order[static_cast<std::size_t>(t)]);
  }

  Matrix gamma = u_sorted.transpose() * w;

  // Sign convention: the largest-magnitude entry of each row is positive.
  for (Index r = 0; r < p; ++r) {
    Index arg = 0;
    gamma.row(r).cwiseAbs().maxCoeff(&arg);
    if (gamma(r, arg) < 0.0) {
      gamma.row(r) *= -1.0;
      u_sorted.col(r) *= -1.0;
    }
  }

  for (std::size_t l = 0; l < d.size(); ++l) {
    Matrix a = u_sorted.transpose() * whitened[l] * u_sorted;
    d[l] = ((a + a.transpose()) / 2.0).eval();
  }

  SbssSolution sol;
  sol.mean = values.colwise().mean().transpose();
  sol.latent = (values.rowwise() - sol.mean.transpose()) * gamma.transpose();
  sol.gamma = std::move(gamma);
  sol.whitener = std::move(w);
  sol.d_matrices = std::move(d);
  sol.pseudo_eigenvalues = std::move(lambda_sorted);
  sol.n = plan.n();
  sol.kernel_normalizations = plan.normalizations();
  sol.centered = opt.centered;
  sol.renormalized = opt.renormalized;
  return sol;
}

inline SbssSolution fit(const SpatialSample& sample, const KernelSet& kernels,
                        const FitOptions& opt = {}) {
  ScatterPlan plan(sample.loc, kernels.kernels);
  return fit(plan, sample.values, opt);
}

}  // namespace sbss
