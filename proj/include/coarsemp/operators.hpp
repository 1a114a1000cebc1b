#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "coarsemp/coarsening.hpp"
#include "coarsemp/graph.hpp"
#include "coarsemp/seminorm.hpp"

namespace coarsemp {

// MP is Q S Q_plus and may be asymmetric even for symmetric S. The other four
// are baselines: Naive applies the propagation rule to A_c, Diag normalizes
// A_c plus cluster-size self-loops, Diff is Q S Q', Sym is (Q_plus)' S Q_plus.
enum class CoarseOperatorKind { MP, Naive, Diag, Diff, Sym };

inline const char* name(CoarseOperatorKind k) {
  switch (k) {
    case CoarseOperatorKind::MP: return "mp";
    case CoarseOperatorKind::Naive: return "naive";
    case CoarseOperatorKind::Diag: return "diag";
    case CoarseOperatorKind::Diff: return "diff";
    case CoarseOperatorKind::Sym: return "sym";
  }
  return "?";
}

inline CoarseOperatorKind parse_operator(const std::string& s) {
  if (s == "mp") return CoarseOperatorKind::MP;
  if (s == "naive") return CoarseOperatorKind::Naive;
  if (s == "diag") return CoarseOperatorKind::Diag;
  if (s == "diff") return CoarseOperatorKind::Diff;
  if (s == "sym") return CoarseOperatorKind::Sym;
  throw std::invalid_argument("unknown coarse operator '" + s + "'");
}

inline SpMat coarse_operator(const SpMat& S, const SpMat& A, PropagationKind s_kind,
                             const Coarsening& c, CoarseOperatorKind kind) {
  const int N = c.N();
  if (S.rows() != N || S.cols() != N || A.rows() != N || A.cols() != N)
    throw std::invalid_argument("coarse_operator: dimension mismatch");
  switch (kind) {
    case CoarseOperatorKind::MP:
      return c.Q * S * c.Q_plus;
    case CoarseOperatorKind::Naive:
      return propagation_from_adjacency(coarsen_adjacency(c, A), s_kind);
    case CoarseOperatorKind::Diag: {
      SpMat M = coarsen_adjacency(c, A);
      const int n = c.n();
      std::vector<Triplet> trips;
      trips.reserve(static_cast<size_t>(M.nonZeros()) + static_cast<size_t>(n));
      for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it)
          trips.emplace_back(it.row(), it.col(), it.value());
      for (int k = 0; k < n; ++k)
        trips.emplace_back(k, k, static_cast<double>(c.cluster_sizes[static_cast<size_t>(k)]));
      SpMat AC(n, n);
      AC.setFromTriplets(trips.begin(), trips.end());
      Vec d = degrees(AC);
      std::vector<Triplet> strips;
      strips.reserve(static_cast<size_t>(AC.nonZeros()));
      for (int k = 0; k < AC.outerSize(); ++k)
        for (SpMat::InnerIterator it(AC, k); it; ++it)
          strips.emplace_back(it.row(), it.col(),
                              it.value() / std::sqrt(d(it.row()) * d(it.col())));
      SpMat out(n, n);
      out.setFromTriplets(strips.begin(), strips.end());
      return out;
    }
    case CoarseOperatorKind::Diff:
      if (!is_symmetric(S))
        throw std::invalid_argument("coarse_operator: diff requires a symmetric S");
      return c.Q * S * SpMat(c.Q.transpose());
    case CoarseOperatorKind::Sym: {
      if (!is_symmetric(S))
        throw std::invalid_argument("coarse_operator: sym requires a symmetric S");
      SpMat QpT = SpMat(c.Q_plus.transpose());
      return QpT * S * c.Q_plus;
    }
  }
  throw std::invalid_argument("unknown coarse operator kind");
}

// || S^k x - Q_plus (S_c)^k Q x ||_L evaluated with repeated sparse products.
inline double mp_error(const SpMat& S, const SpMat& S_c, const Coarsening& c, const Vec& x,
                       int k, const SemiNormContext& ctx) {
  if (k < 0) throw std::invalid_argument("mp_error: k must be nonnegative");
  if (x.size() != c.N()) throw std::invalid_argument("mp_error: signal length mismatch");
  Vec full = x;
  for (int i = 0; i < k; ++i) full = S * full;
  Vec coarse = c.Q * x;
  for (int i = 0; i < k; ++i) coarse = S_c * coarse;
  return seminorm(full - c.Q_plus * coarse, ctx);
}

// Measured leakages behind the bound hypotheses: Pi preserves ker(L), S
// preserves ker(L), S preserves the chosen subspace.
struct AssumptionFlags {
  double kernel_leak_Pi = 0.0;
  double kernel_leak_S = 0.0;
  double subspace_leak_S = 0.0;

  bool ok(double tol) const {
    return kernel_leak_Pi <= tol && kernel_leak_S <= tol && subspace_leak_S <= tol;
  }
};

inline AssumptionFlags check_assumptions(const SpMat& S, const Coarsening& c,
                                         const SpectralBasis& basis, const SemiNormContext& ctx) {
  AssumptionFlags flags;
  flags.kernel_leak_Pi = check_preserving(c.Pi, ctx.kernel_basis);
  flags.kernel_leak_S = check_preserving(S, ctx.kernel_basis);
  flags.subspace_leak_S = check_preserving(S, basis.V);
  return flags;
}

struct BoundConstants {
  double epsilon = 0.0;
  double C_S = 0.0;      // ||S||_L
  double C_Pi = 0.0;     // ||Pi S||_L
  double C_Pi_bar = 0.0; // ||Pi S Pi||_L
};

// ||S||_L does not depend on the coarsening; sweeps over many coarsenings of
// one graph may pass it precomputed.
inline BoundConstants bound_constants(const SpMat& S, const Coarsening& c,
                                      const SemiNormContext& ctx, double epsilon,
                                      double precomputed_C_S) {
  if (!is_symmetric(S))
    throw std::invalid_argument(
        "bound_constants: S is asymmetric (mean aggregation?); the L-operator "
        "norm guarantees are only computed for symmetric propagation matrices");
  BoundConstants bc;
  bc.epsilon = epsilon;
  bc.C_S = precomputed_C_S;
  SpMat PiS = c.Pi * S;
  bc.C_Pi = operator_seminorm(PiS, ctx);
  bc.C_Pi_bar = operator_seminorm(SpMat(PiS * c.Pi), ctx);
  return bc;
}

inline BoundConstants bound_constants(const SpMat& S, const Coarsening& c,
                                      const SemiNormContext& ctx, double epsilon) {
  return bound_constants(S, c, ctx, epsilon, operator_seminorm(S, ctx));
}

inline double single_step_bound(const BoundConstants& bc, double x_norm) {
  return bc.epsilon * x_norm * (bc.C_S + bc.C_Pi);
}

// epsilon * ||x||_L * (C_S + C_Pi) * sum_{l=1..k} C_Pi_bar^{k-l} C_S^{l-1}
inline double k_step_bound(const BoundConstants& bc, int k, double x_norm) {
  if (k < 1) throw std::invalid_argument("k_step_bound: k must be at least 1");
  double sum = 0.0;
  for (int l = 1; l <= k; ++l)
    sum += std::pow(bc.C_Pi_bar, k - l) * std::pow(bc.C_S, l - 1);
  return bc.epsilon * x_norm * (bc.C_S + bc.C_Pi) * sum;
}

// 2 C_J C_sigma^k C_Theta (C_S + C_Pi) sum_{l} C_Pi_bar^{k-l} C_S^{l-1}
// * epsilon * ||X||_{:,L}
inline double training_bound(const BoundConstants& bc, double C_J, double C_sigma,
                             double C_Theta, int k, double X_cols_norm) {
  if (k < 1) throw std::invalid_argument("training_bound: k must be at least 1");
  double sum = 0.0;
  for (int l = 1; l <= k; ++l)
    sum += std::pow(bc.C_Pi_bar, k - l) * std::pow(bc.C_S, l - 1);
  return 2.0 * C_J * std::pow(C_sigma, k) * C_Theta * (bc.C_S + bc.C_Pi) * sum * bc.epsilon *
         X_cols_norm;
}

// Max absolute row sum per layer and their running products.
struct ThetaConstants {
  std::vector<double> per_layer;   // C_{theta,l}
  std::vector<double> cumulative;  // prod_{j<=l} C_{theta,j}
};

inline ThetaConstants theta_constants(const std::vector<Mat>& layers) {
  ThetaConstants tc;
  double prod = 1.0;
  for (const Mat& theta : layers) {
    double c = theta.size() > 0 ? theta.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
    tc.per_layer.push_back(c);
    prod *= c;
    tc.cumulative.push_back(prod);
  }
  return tc;
}

// Per-layer drift between the full forward pass and the lifted coarse one,
// with the recursion that certifies it. error_bound uses the measured previous
// layer, signal_norm_bound is the closed form C_bar_{theta,l} C_S^l ||X||_{:,L}.
// guaranteed is false for ReLU; values are still reported.
struct LayerCertificate {
  std::vector<double> error;              // E_l, layers 1..k
  std::vector<double> error_bound;        // recursion value per layer
  std::vector<double> signal_norm;        // B_l = sum_i ||H^l_{:,i}||_L
  std::vector<double> signal_norm_bound;  // closed-form bound per layer
  double base_norm = 0.0;                 // ||X||_{:,L}
  bool guaranteed = true;
};

inline LayerCertificate layerwise_error_certificate(const SpMat& S, const SpMat& S_c,
                                                    const Coarsening& c, const Mat& X,
                                                    const std::vector<Mat>& layers,
                                                    const SemiNormContext& ctx,
                                                    const BoundConstants& bc, bool relu = false) {
  if (X.rows() != c.N()) throw std::invalid_argument("layerwise_error_certificate: row mismatch");
  LayerCertificate cert;
  cert.guaranteed = !relu;
  ThetaConstants tc = theta_constants(layers);

  Mat H = X;
  Mat Hc = c.Q * X;
  cert.base_norm = columns_seminorm(X, ctx);
  double prev_error = 0.0;
  double prev_norm = cert.base_norm;
  double norm_bound = cert.base_norm;

  for (size_t l = 0; l < layers.size(); ++l) {
    H = S * (H * layers[l]);
    Hc = S_c * (Hc * layers[l]);
    if (relu) {
      H = H.cwiseMax(0.0);
      Hc = Hc.cwiseMax(0.0);
    }
    Mat lifted = c.Q_plus * Hc;
    double err = 0.0;
    for (int j = 0; j < H.cols(); ++j) err += seminorm(H.col(j) - lifted.col(j), ctx);
    double norm = columns_seminorm(H, ctx);

    double c_theta = tc.per_layer[l];
    cert.error.push_back(err);
    cert.error_bound.push_back(
        c_theta * (bc.epsilon * (bc.C_S + bc.C_Pi) * prev_norm + bc.C_Pi_bar * prev_error));
    cert.signal_norm.push_back(norm);
    norm_bound *= c_theta * bc.C_S;
    cert.signal_norm_bound.push_back(norm_bound);

    prev_error = err;
    prev_norm = norm;
  }
  return cert;
}

}  // namespace coarsemp
