#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "coarsemp/graph.hpp"

namespace coarsemp {

// Eigenvalues at or below kEigZeroRelTol * lambda_max count as exact zeros.
inline constexpr double kEigZeroRelTol = 1e-8;
// Eigenvalues below -kPsdRelTol * lambda_max reject the matrix as not p.s.d.
inline constexpr double kPsdRelTol = 1e-8;

// Cached spectral data for one p.s.d. matrix L. Everything needed to evaluate
// the L-seminorm of vectors and operators. Immutable after construction.
struct SemiNormContext {
  SpMat L;
  Vec eigenvalues;    // increasing; kernel entries are exact 0
  Mat eigenvectors;   // orthonormal columns, first nonzero component positive
  Mat kernel_basis;   // columns spanning ker(L)
  Mat sqrt_L;
  Mat pinv_sqrt_L;
  double lambda_min = 0.0;  // smallest nonzero eigenvalue, 0 when L = 0
  double lambda_max = 0.0;

  int dim() const { return static_cast<int>(L.rows()); }
  int kernel_dim() const { return static_cast<int>(kernel_basis.cols()); }
};

// Flips each column so its first component of nonnegligible magnitude is
// positive. Keeps eigenbases reproducible across platforms.
inline void fix_column_signs(Mat& V) {
  for (int j = 0; j < V.cols(); ++j) {
    double scale = V.col(j).cwiseAbs().maxCoeff();
    if (scale <= 0.0) continue;
    for (int i = 0; i < V.rows(); ++i) {
      double v = V(i, j);
      if (std::abs(v) > 1e-12 * scale) {
        if (v < 0.0) V.col(j) = -V.col(j);
        break;
      }
    }
  }
}

inline SemiNormContext make_context(const SpMat& L) {
  if (L.rows() != L.cols()) throw std::invalid_argument("make_context: L must be square");
  Mat Ld = Mat(L);
  double scale = Ld.cwiseAbs().maxCoeff();
  if ((Ld - Ld.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (scale + 1.0))
    throw std::invalid_argument("make_context: L is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(Ld);
  if (es.info() != Eigen::Success) throw std::runtime_error("make_context: eigensolver failed");

  SemiNormContext ctx;
  ctx.L = L;
  ctx.eigenvalues = es.eigenvalues();
  ctx.eigenvectors = es.eigenvectors();
  fix_column_signs(ctx.eigenvectors);

  const int n = static_cast<int>(Ld.rows());
  ctx.lambda_max = std::max(ctx.eigenvalues(n - 1), 0.0);
  const double zero_tol = kEigZeroRelTol * ctx.lambda_max;
  if (ctx.eigenvalues(0) < -kPsdRelTol * ctx.lambda_max)
    throw std::invalid_argument("make_context: L is not p.s.d. (eigenvalue " +
                                std::to_string(ctx.eigenvalues(0)) + ")");

  int kernel = 0;
  for (int i = 0; i < n; ++i) {
    if (ctx.eigenvalues(i) <= zero_tol) {
      ctx.eigenvalues(i) = 0.0;
      ++kernel;
    }
  }
  ctx.kernel_basis = ctx.eigenvectors.leftCols(kernel);
  ctx.lambda_min = kernel < n ? ctx.eigenvalues(kernel) : 0.0;

  Vec sqrt_vals(n), pinv_vals(n);
  for (int i = 0; i < n; ++i) {
    sqrt_vals(i) = std::sqrt(ctx.eigenvalues(i));
    pinv_vals(i) = ctx.eigenvalues(i) > 0.0 ? 1.0 / sqrt_vals(i) : 0.0;
  }
  ctx.sqrt_L = ctx.eigenvectors * sqrt_vals.asDiagonal() * ctx.eigenvectors.transpose();
  ctx.pinv_sqrt_L = ctx.eigenvectors * pinv_vals.asDiagonal() * ctx.eigenvectors.transpose();
  return ctx;
}

// sqrt(x' L x) with tiny negative quadratic forms clamped to 0.
inline double seminorm(const Vec& x, const SemiNormContext& ctx) {
  if (x.size() != ctx.dim())
    throw std::invalid_argument("seminorm: vector length " + std::to_string(x.size()) +
                                " does not match dimension " + std::to_string(ctx.dim()));
  double q = x.dot(ctx.L * x);
  return std::sqrt(std::max(q, 0.0));
}

// Largest singular value of a dense matrix, via the symmetric eigenproblem of
// the smaller Gram matrix.
inline double spectral_norm(const Mat& B) {
  if (B.size() == 0) return 0.0;
  Mat G = B.rows() <= B.cols() ? Mat(B * B.transpose()) : Mat(B.transpose() * B);
  Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
}

// ||M||_L = || L^{1/2} M L^{-1/2} || with the pseudo-inverse square root.
inline double operator_seminorm(const Mat& M, const SemiNormContext& ctx) {
  if (M.rows() != ctx.dim() || M.cols() != ctx.dim())
    throw std::invalid_argument("operator_seminorm: dimension mismatch");
  return spectral_norm(ctx.sqrt_L * (M * ctx.pinv_sqrt_L));
}

inline double operator_seminorm(const SpMat& M, const SemiNormContext& ctx) {
  if (M.rows() != ctx.dim() || M.cols() != ctx.dim())
    throw std::invalid_argument("operator_seminorm: dimension mismatch");
  return spectral_norm(ctx.sqrt_L * (M * ctx.pinv_sqrt_L));
}

// Sum of the per-column seminorms of X.
inline double columns_seminorm(const Mat& X, const SemiNormContext& ctx) {
  double total = 0.0;
  for (int j = 0; j < X.cols(); ++j) total += seminorm(X.col(j), ctx);
  return total;
}

// K eigenvectors of L, smallest eigenvalues first.
struct SpectralBasis {
  Mat V;            // dim x K, orthonormal columns
  Vec eigenvalues;  // length K, increasing

  int K() const { return static_cast<int>(V.cols()); }
};

inline SpectralBasis spectral_subspace(const SemiNormContext& ctx, int K) {
  if (K < 1 || K > ctx.dim())
    throw std::invalid_argument("spectral_subspace: K = " + std::to_string(K) +
                                " must be in [1, " + std::to_string(ctx.dim()) + "]");
  SpectralBasis basis;
  basis.V = ctx.eigenvectors.leftCols(K);
  basis.eigenvalues = ctx.eigenvalues.head(K);
  return basis;
}

// Leakage ||(I - B B') M B|| of M outside the span of the orthonormal basis B.
// Zero means span(B) is invariant under M.
inline double check_preserving(const Mat& M, const Mat& B) {
  if (B.cols() == 0) return 0.0;
  if (M.cols() != B.rows()) throw std::invalid_argument("check_preserving: dimension mismatch");
  Mat T = M * B;
  T -= B * (B.transpose() * T);
  return spectral_norm(T);
}

inline double check_preserving(const SpMat& M, const Mat& B) {
  if (B.cols() == 0) return 0.0;
  if (M.cols() != B.rows()) throw std::invalid_argument("check_preserving: dimension mismatch");
  Mat T = M * B;
  T -= B * (B.transpose() * T);
  return spectral_norm(T);
}

}  // namespace coarsemp
