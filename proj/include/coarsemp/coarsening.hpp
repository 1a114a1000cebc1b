#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "coarsemp/graph.hpp"
#include "coarsemp/seminorm.hpp"

namespace coarsemp {

// Well-mapped surjective coarsening. Q has exactly one nonzero per column and
// no empty row; Q_plus = Q'(QQ')^{-1}; Pi = Q_plus * Q. For uniform
// coarsenings Q entries are 1/n_k and Q_plus entries are exact 0/1.
struct Coarsening {
  SpMat Q;       // n x N
  SpMat Q_plus;  // N x n
  SpMat Pi;      // N x N, idempotent
  std::vector<int> assignment;     // length N, supernode per node
  std::vector<double> weights;     // length N, Q entry per node
  std::vector<int> cluster_sizes;  // length n
  bool uniform = false;

  int n() const { return static_cast<int>(Q.rows()); }
  int N() const { return static_cast<int>(Q.cols()); }
};

namespace detail {

inline std::vector<int> cluster_sizes_of(const std::vector<int>& assignment) {
  int n = 0;
  for (int k : assignment) {
    if (k < 0) throw std::invalid_argument("assignment contains negative supernode index");
    n = std::max(n, k + 1);
  }
  if (n == 0) throw std::invalid_argument("assignment is empty");
  std::vector<int> sizes(static_cast<size_t>(n), 0);
  for (int k : assignment) ++sizes[static_cast<size_t>(k)];
  for (int k = 0; k < n; ++k)
    if (sizes[static_cast<size_t>(k)] == 0)
      throw std::invalid_argument("not surjective: supernode " + std::to_string(k) + " is empty");
  return sizes;
}

}  // namespace detail

inline Coarsening from_partition(const std::vector<int>& assignment,
                                 const std::vector<double>& node_weights = {}) {
  const int N = static_cast<int>(assignment.size());
  std::vector<int> sizes = detail::cluster_sizes_of(assignment);
  const int n = static_cast<int>(sizes.size());

  Coarsening c;
  c.assignment = assignment;
  c.cluster_sizes = sizes;
  c.weights.resize(static_cast<size_t>(N));

  const bool given = !node_weights.empty();
  if (given && static_cast<int>(node_weights.size()) != N)
    throw std::invalid_argument("weights length does not match assignment length");

  bool uniform = true;
  for (int i = 0; i < N; ++i) {
    int k = assignment[static_cast<size_t>(i)];
    double w = given ? node_weights[static_cast<size_t>(i)]
                     : 1.0 / static_cast<double>(sizes[static_cast<size_t>(k)]);
    if (!(w > 0.0)) throw std::invalid_argument("coarsening weights must be positive");
    c.weights[static_cast<size_t>(i)] = w;
    if (std::abs(w - 1.0 / static_cast<double>(sizes[static_cast<size_t>(k)])) > 1e-12)
      uniform = false;
  }
  c.uniform = uniform;

  std::vector<Triplet> q_trips, qp_trips, pi_trips;
  q_trips.reserve(static_cast<size_t>(N));
  qp_trips.reserve(static_cast<size_t>(N));
  for (int i = 0; i < N; ++i) {
    int k = assignment[static_cast<size_t>(i)];
    q_trips.emplace_back(k, i, c.weights[static_cast<size_t>(i)]);
  }
  c.Q.resize(n, N);
  c.Q.setFromTriplets(q_trips.begin(), q_trips.end());

  if (uniform) {
    // Q_plus entries are exact 0/1 in the uniform case.
    for (int i = 0; i < N; ++i) qp_trips.emplace_back(i, assignment[static_cast<size_t>(i)], 1.0);
  } else {
    // Q_plus = Q'(QQ')^{-1}; QQ' is diagonal with entries sum_i w_i^2.
    std::vector<double> diag(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < N; ++i) {
      double w = c.weights[static_cast<size_t>(i)];
      diag[static_cast<size_t>(assignment[static_cast<size_t>(i)])] += w * w;
    }
    for (int i = 0; i < N; ++i) {
      int k = assignment[static_cast<size_t>(i)];
      qp_trips.emplace_back(i, k, c.weights[static_cast<size_t>(i)] / diag[static_cast<size_t>(k)]);
    }
  }
  c.Q_plus.resize(N, n);
  c.Q_plus.setFromTriplets(qp_trips.begin(), qp_trips.end());

  c.Pi = c.Q_plus * c.Q;
  return c;
}

inline Coarsening identity_coarsening(int N) {
  std::vector<int> assignment(static_cast<size_t>(N));
  std::iota(assignment.begin(), assignment.end(), 0);
  return from_partition(assignment);
}

inline Vec coarsen_signal(const Coarsening& c, const Vec& x) {
  if (x.size() != c.N()) throw std::invalid_argument("coarsen_signal: length mismatch");
  return c.Q * x;
}

inline Vec lift_signal(const Coarsening& c, const Vec& x_c) {
  if (x_c.size() != c.n()) throw std::invalid_argument("lift_signal: length mismatch");
  return c.Q_plus * x_c;
}

inline Mat coarsen_features(const Coarsening& c, const Mat& X) {
  if (X.rows() != c.N()) throw std::invalid_argument("coarsen_features: row mismatch");
  return c.Q * X;
}

// A_c = (Q_plus)' A Q_plus. Keeps the diagonal; for uniform coarsenings entry
// (k,l) with k != l is the total edge weight between clusters k and l.
inline SpMat coarsen_adjacency(const Coarsening& c, const SpMat& A) {
  if (A.rows() != c.N() || A.cols() != c.N())
    throw std::invalid_argument("coarsen_adjacency: dimension mismatch");
  SpMat QpT = SpMat(c.Q_plus.transpose());
  return QpT * A * c.Q_plus;
}

// Residual || (D(A_c) - A_c) - (Q_plus)' L Q_plus ||_inf for a uniform
// coarsening of a combinatorial Laplacian. A is reconstructed from L.
inline double coarse_laplacian_check(const Coarsening& c, const SemiNormContext& ctx) {
  if (!c.uniform)
    throw std::invalid_argument("coarse_laplacian_check requires a uniform coarsening");
  const int N = ctx.dim();
  if (N != c.N()) throw std::invalid_argument("coarse_laplacian_check: dimension mismatch");

  // A combinatorial Laplacian has zero row sums and nonpositive off-diagonals.
  double row_sum_tol = 1e-8 * (ctx.lambda_max + 1.0);
  Vec row_sums = ctx.L * Vec::Ones(N);
  if (row_sums.cwiseAbs().maxCoeff() > row_sum_tol)
    throw std::invalid_argument("coarse_laplacian_check requires a combinatorial Laplacian");
  std::vector<Triplet> trips;
  for (int k = 0; k < ctx.L.outerSize(); ++k)
    for (SpMat::InnerIterator it(ctx.L, k); it; ++it) {
      if (it.row() == it.col()) continue;
      if (it.value() > row_sum_tol)
        throw std::invalid_argument("coarse_laplacian_check requires a combinatorial Laplacian");
      if (it.value() != 0.0) trips.emplace_back(it.row(), it.col(), -it.value());
    }
  SpMat A(N, N);
  A.setFromTriplets(trips.begin(), trips.end());

  SpMat A_c = coarsen_adjacency(c, A);
  Mat lhs = Mat(Vec(degrees(A_c)).asDiagonal()) - Mat(A_c);
  SpMat QpT = SpMat(c.Q_plus.transpose());
  Mat rhs = Mat(QpT * ctx.L * c.Q_plus);
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

struct RsaReport {
  double epsilon = 0.0;
  int K = 0;
  double finite_bound = 0.0;  // sqrt(lambda_max / lambda_min)
};

// Worst-case ratio ||x - Pi x||_L / ||x||_L over the span of V, as the largest
// generalized eigenvalue of (W' L W, V' L V) with W = (I - Pi) V.
inline RsaReport rsa_constant(const Coarsening& c, const SpectralBasis& basis,
                              const SemiNormContext& ctx) {
  const int N = ctx.dim();
  if (basis.V.rows() != N || c.N() != N) throw std::invalid_argument("rsa_constant: dimension mismatch");
  const int K = basis.K();

  Mat V = basis.V;
  Mat W = V - c.Pi * V;
  Mat G = V.transpose() * (ctx.L * V);
  Mat M = W.transpose() * (ctx.L * W);
  G = 0.5 * (G + G.transpose());
  M = 0.5 * (M + M.transpose());

  Eigen::SelfAdjointEigenSolver<Mat> gs(G, Eigen::EigenvaluesOnly);
  double gmax = gs.eigenvalues().maxCoeff();
  double gmin = gs.eigenvalues().minCoeff();
  if (gmax <= 0.0 || gmin <= 1e-12 * gmax)
    throw std::runtime_error(
        "rsa_constant: V' L V is singular; use a positive-definite Laplacian "
        "(shifted propagation) or a basis that excludes ker(L)");

  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(M, G, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  if (ges.info() != Eigen::Success) throw std::runtime_error("rsa_constant: eigensolver failed");

  RsaReport report;
  report.K = K;
  report.epsilon = std::sqrt(std::max(ges.eigenvalues().maxCoeff(), 0.0));
  report.finite_bound =
      ctx.lambda_min > 0.0 ? std::sqrt(ctx.lambda_max / ctx.lambda_min) : 0.0;
  return report;
}

}  // namespace coarsemp
