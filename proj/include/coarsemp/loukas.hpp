#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "coarsemp/coarsening.hpp"
#include "coarsemp/graph.hpp"
#include "coarsemp/seminorm.hpp"

namespace coarsemp {

inline int default_subspace_dim(int N) { return (N + 9) / 10; }
inline int default_merge_cap(int N) { return (N + 19) / 20; }

struct LoukasConfig {
  double ratio = 0.5;        // target supernode count is int(N - N*ratio)
  int n_e = -1;              // net merges per sweep: -1 auto = ceil(N/20), 0 = unbounded
  bool force_uniform = true; // row-normalize the accumulated Q to uniform weights
  int K = 0;                 // preserved subspace dim for per-component bases; 0 auto = ceil(N/10)
};

struct LoukasResult {
  Coarsening coarsening;
  SpMat s_coarse;            // Q S Q_plus for the propagation matrix passed in
  bool exhausted_early = false;  // ran out of edges before reaching the target size
  int sweeps = 0;
};

namespace detail {

struct ComponentRun {
  std::vector<int> assignment;   // per node, local supernode id
  std::vector<double> weights;   // per node, accumulated Q entry
  int n_final = 0;
  bool exhausted = false;
  int sweeps = 0;
};

// Greedy edge contraction on one connected component. Each sweep scores the
// current edges, sorts ascending by (cost, min id, max id), and merges
// non-overlapping pairs until min(n - n_obj, n_e) merges are accepted.
//
// The cost of contracting edge {a,b} is the local variation
//   || L_C^{1/2} (I - P_C) M_C || / (|C| - 1)
// with M = B (B' L B)^{-1/2}, B the current lifted subspace matrix, P_C the
// averaging projector over C and L_C the 2x2 principal submatrix of the
// current Laplacian. B factors as U * W with W = V' L0^{-1/2} fixed and U the
// sweep-averaged basis, which keeps every sweep at O(K^2) per edge.
inline ComponentRun loukas_component(const SpMat& A0, const Mat& V, const Mat& pinv_sqrt_L0,
                                     const LaplacianKind& lap, int n_obj, int n_e) {
  const int N = static_cast<int>(A0.rows());
  const int K = static_cast<int>(V.cols());
  if (K < 1) throw std::invalid_argument("loukas_coarsen: preserved basis is empty");

  ComponentRun run;
  run.assignment.resize(static_cast<size_t>(N));
  std::iota(run.assignment.begin(), run.assignment.end(), 0);
  run.weights.assign(static_cast<size_t>(N), 1.0);

  Mat W = V.transpose() * pinv_sqrt_L0;  // K x N, fixed across sweeps
  Mat U = V;                             // current supernode rows
  SpMat A = A0;
  int n_cur = N;

  while (n_cur > n_obj) {
    SpMat L = laplacian_from_adjacency(A, lap);
    Vec Ldiag = Vec::Zero(n_cur);
    for (int k = 0; k < L.outerSize(); ++k)
      for (SpMat::InnerIterator it(L, k); it; ++it)
        if (it.row() == it.col()) Ldiag(it.row()) = it.value();

    Mat G = U.transpose() * (L * U);
    G = 0.5 * (G + G.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> ges(G);
    Vec gval = ges.eigenvalues().cwiseMax(0.0);
    // U'LU at the rounding floor means span(U) lies in ker(L); the exact
    // pseudo-inverse of B'LB is zero there, and the zero must be exact so
    // the id tie-break decides between the equal-cost contractions.
    double g_floor = 1e-12 * std::max(Ldiag.cwiseAbs().maxCoeff() * U.squaredNorm(), 1e-300);
    Mat H = Mat::Zero(K, K);
    if (gval.maxCoeff() > g_floor) {
      Mat Ghalf =
          ges.eigenvectors() * gval.cwiseSqrt().asDiagonal() * ges.eigenvectors().transpose();
      // B' L B = E' E with E = G^{1/2} W; pseudo-invert with the relative 1e-8
      // eigenvalue cutoff (1e-4 on singular values).
      Mat E = Ghalf * W;
      Eigen::BDCSVD<Mat> svd(E, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Vec& sig = svd.singularValues();
      double smax = sig.size() > 0 ? sig(0) : 0.0;
      double cutoff = 1e-4 * smax;
      Vec sig_pinv = Vec::Zero(sig.size());
      for (int i = 0; i < sig.size(); ++i)
        if (sig(i) > cutoff) sig_pinv(i) = 1.0 / sig(i);
      Mat R = (W * svd.matrixV()) * sig_pinv.asDiagonal();  // K x K
      H = R * R.transpose();                                // Gram of the row map
    }

    struct Cand {
      double cost;
      int a, b;
    };
    std::vector<Cand> cands;
    for (int j = 0; j < A.outerSize(); ++j) {
      for (SpMat::InnerIterator it(A, j); it; ++it) {
        int i = static_cast<int>(it.row());
        if (i >= j || it.value() == 0.0) continue;
        double lij = L.coeff(i, j);
        double ell = std::max(Ldiag(i) + Ldiag(j) - 2.0 * lij, 0.0);
        Eigen::RowVectorXd du = U.row(i) - U.row(j);
        double q = std::max((du * H).dot(du), 0.0);
        cands.push_back({0.5 * std::sqrt(ell) * std::sqrt(q), i, j});
      }
    }
    if (cands.empty()) {
      run.exhausted = true;
      break;
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
      if (x.cost != y.cost) return x.cost < y.cost;
      if (x.a != y.a) return x.a < y.a;
      return x.b < y.b;
    });
    // Symmetric graphs produce mathematically equal costs that differ by
    // eigensolver rounding; runs of nearly equal costs fall back to the id
    // order so the selection stays deterministic across such noise.
    for (size_t lo = 0; lo < cands.size();) {
      size_t hi = lo + 1;
      while (hi < cands.size() &&
             cands[hi].cost - cands[hi - 1].cost <= 1e-9 * std::max(cands[hi].cost, 1e-300))
        ++hi;
      std::sort(cands.begin() + static_cast<std::ptrdiff_t>(lo),
                cands.begin() + static_cast<std::ptrdiff_t>(hi),
                [](const Cand& x, const Cand& y) { return x.a != y.a ? x.a < y.a : x.b < y.b; });
      lo = hi;
    }

    long long budget = n_cur - n_obj;
    if (n_e > 0) budget = std::min<long long>(budget, n_e);
    std::vector<char> used(static_cast<size_t>(n_cur), 0);
    std::vector<std::pair<int, int>> accepted;
    for (const Cand& cand : cands) {
      if (static_cast<long long>(accepted.size()) >= budget) break;
      if (used[static_cast<size_t>(cand.a)] || used[static_cast<size_t>(cand.b)]) continue;
      used[static_cast<size_t>(cand.a)] = used[static_cast<size_t>(cand.b)] = 1;
      accepted.emplace_back(cand.a, cand.b);
    }
    if (accepted.empty()) {
      run.exhausted = true;
      break;
    }
    ++run.sweeps;

    // New supernode ids ordered by smallest member id.
    std::vector<int> root(static_cast<size_t>(n_cur));
    std::iota(root.begin(), root.end(), 0);
    for (auto [a, b] : accepted) root[static_cast<size_t>(b)] = a;
    std::vector<int> remap(static_cast<size_t>(n_cur), -1);
    int n_new = 0;
    for (int i = 0; i < n_cur; ++i) {
      int r = root[static_cast<size_t>(i)];
      if (remap[static_cast<size_t>(r)] == -1) remap[static_cast<size_t>(r)] = n_new++;
      remap[static_cast<size_t>(i)] = remap[static_cast<size_t>(r)];
    }
    std::vector<int> gsize(static_cast<size_t>(n_new), 0);
    for (int i = 0; i < n_cur; ++i) ++gsize[static_cast<size_t>(remap[static_cast<size_t>(i)])];

    Mat U_new = Mat::Zero(n_new, K);
    for (int i = 0; i < n_cur; ++i) U_new.row(remap[static_cast<size_t>(i)]) += U.row(i);
    for (int g = 0; g < n_new; ++g) U_new.row(g) /= static_cast<double>(gsize[static_cast<size_t>(g)]);

    for (int p = 0; p < N; ++p) {
      int g = remap[static_cast<size_t>(run.assignment[static_cast<size_t>(p)])];
      run.weights[static_cast<size_t>(p)] /= static_cast<double>(gsize[static_cast<size_t>(g)]);
      run.assignment[static_cast<size_t>(p)] = g;
    }

    // A_l = (Q_l^+)' A Q_l^+ with the diagonal removed; intra-group entries
    // are exactly the new diagonal, so they are dropped here.
    std::vector<Triplet> trips;
    trips.reserve(static_cast<size_t>(A.nonZeros()));
    for (int j = 0; j < A.outerSize(); ++j)
      for (SpMat::InnerIterator it(A, j); it; ++it) {
        int gi = remap[static_cast<size_t>(it.row())];
        int gj = remap[static_cast<size_t>(j)];
        if (gi != gj) trips.emplace_back(gi, gj, it.value());
      }
    A = SpMat(n_new, n_new);
    A.setFromTriplets(trips.begin(), trips.end());
    U = std::move(U_new);
    n_cur = n_new;
  }
  run.n_final = n_cur;
  return run;
}

}  // namespace detail

// Greedy multi-sweep coarsening toward int(N - N*ratio) supernodes, then
// S_c = Q S Q_plus for the propagation matrix S. Connected inputs use the
// context and basis passed in; disconnected inputs are coarsened per
// component with proportional targets and per-component bases, and nodes of
// different components are never merged.
inline LoukasResult loukas_coarsen(const Graph& g, const SemiNormContext& ctx,
                                   const SpectralBasis& basis, const LoukasConfig& cfg,
                                   const LaplacianKind& lap, const SpMat& S) {
  const int N = g.num_nodes();
  if (N < 1) throw std::invalid_argument("loukas_coarsen: empty graph");
  if (cfg.ratio < 0.0 || cfg.ratio >= 1.0)
    throw std::invalid_argument("loukas_coarsen: ratio must be in [0, 1)");
  if (ctx.dim() != N || basis.V.rows() != N || S.rows() != N || S.cols() != N)
    throw std::invalid_argument("loukas_coarsen: dimension mismatch");
  const int n_obj = static_cast<int>(N - N * cfg.ratio);
  if (n_obj < 1)
    throw std::invalid_argument("loukas_coarsen: target supernode count is below 1");

  auto [comp, n_comp] = connected_components(g.adjacency);
  std::vector<int> assignment(static_cast<size_t>(N));
  std::vector<double> weights(static_cast<size_t>(N));
  bool exhausted = false;
  int sweeps = 0;

  if (n_comp == 1) {
    int n_e = cfg.n_e < 0 ? default_merge_cap(N) : cfg.n_e;
    detail::ComponentRun run =
        detail::loukas_component(g.adjacency, basis.V, ctx.pinv_sqrt_L, lap, n_obj, n_e);
    assignment = std::move(run.assignment);
    weights = std::move(run.weights);
    exhausted = run.exhausted;
    sweeps = run.sweeps;
  } else {
    const int K_full = cfg.K > 0 ? cfg.K : default_subspace_dim(N);
    std::vector<std::vector<int>> members(static_cast<size_t>(n_comp));
    for (int i = 0; i < N; ++i) members[static_cast<size_t>(comp[static_cast<size_t>(i)])].push_back(i);
    int offset = 0;
    for (int cid = 0; cid < n_comp; ++cid) {
      const std::vector<int>& nodes = members[static_cast<size_t>(cid)];
      const int n_c = static_cast<int>(nodes.size());
      std::vector<int> local(static_cast<size_t>(N), -1);
      for (int p = 0; p < n_c; ++p) local[static_cast<size_t>(nodes[static_cast<size_t>(p)])] = p;
      std::vector<Triplet> trips;
      for (int p = 0; p < n_c; ++p)
        for (SpMat::InnerIterator it(g.adjacency, nodes[static_cast<size_t>(p)]); it; ++it)
          trips.emplace_back(local[static_cast<size_t>(it.row())], p, it.value());
      SpMat sub(n_c, n_c);
      sub.setFromTriplets(trips.begin(), trips.end());

      int n_obj_c = std::max(1, static_cast<int>(n_c - n_c * cfg.ratio));
      int K_c = std::clamp((K_full * n_c + N - 1) / N, 1, n_c);
      int n_e_c = cfg.n_e < 0 ? default_merge_cap(n_c) : cfg.n_e;
      SemiNormContext ctx_c = make_context(laplacian_from_adjacency(sub, lap));
      SpectralBasis basis_c = spectral_subspace(ctx_c, K_c);
      detail::ComponentRun run =
          detail::loukas_component(sub, basis_c.V, ctx_c.pinv_sqrt_L, lap, n_obj_c, n_e_c);
      for (int p = 0; p < n_c; ++p) {
        assignment[static_cast<size_t>(nodes[static_cast<size_t>(p)])] =
            offset + run.assignment[static_cast<size_t>(p)];
        weights[static_cast<size_t>(nodes[static_cast<size_t>(p)])] =
            run.weights[static_cast<size_t>(p)];
      }
      offset += run.n_final;
      exhausted = exhausted || run.exhausted;
      sweeps += run.sweeps;
    }
  }

  LoukasResult res;
  res.coarsening = cfg.force_uniform ? from_partition(assignment) : from_partition(assignment, weights);
  res.s_coarse = res.coarsening.Q * S * res.coarsening.Q_plus;
  res.exhausted_early = exhausted;
  res.sweeps = sweeps;
  return res;
}

}  // namespace coarsemp
