#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace coarsemp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

enum class PropagationKind { Adjacency, MeanAgg, GcnNorm };

enum class LaplacianFamily { Combinatorial, NormalizedSym, ShiftedPropagation };

// ShiftedPropagation is (1+delta)*I - S with S the GcnNorm propagation.
// It is positive definite for delta > 0.
struct LaplacianKind {
  LaplacianFamily family = LaplacianFamily::ShiftedPropagation;
  double delta = 1e-3;

  static LaplacianKind combinatorial() { return {LaplacianFamily::Combinatorial, 0.0}; }
  static LaplacianKind normalized_sym() { return {LaplacianFamily::NormalizedSym, 0.0}; }
  static LaplacianKind shifted(double delta = 1e-3) {
    if (delta <= 0.0) throw std::invalid_argument("shifted Laplacian requires delta > 0");
    return {LaplacianFamily::ShiftedPropagation, delta};
  }
};

inline const char* name(PropagationKind k) {
  switch (k) {
    case PropagationKind::Adjacency: return "adj";
    case PropagationKind::MeanAgg: return "mean";
    case PropagationKind::GcnNorm: return "gcn";
  }
  return "?";
}

inline const char* name(LaplacianFamily f) {
  switch (f) {
    case LaplacianFamily::Combinatorial: return "comb";
    case LaplacianFamily::NormalizedSym: return "norm";
    case LaplacianFamily::ShiftedPropagation: return "shifted";
  }
  return "?";
}

// Node id lists; the three lists are pairwise disjoint.
struct SplitMasks {
  std::vector<int> train, val, test;
  bool empty() const { return train.empty() && val.empty() && test.empty(); }
};

// Undirected weighted graph. The adjacency is symmetric with nonnegative
// weights and a zero diagonal. Features and labels are optional; when present
// their length equals the node count.
struct Graph {
  SpMat adjacency;
  Mat features;             // num_nodes x d, 0x0 when absent
  std::vector<int> labels;  // empty when absent
  SplitMasks splits;

  int num_nodes() const { return static_cast<int>(adjacency.rows()); }
  int num_edges() const { return static_cast<int>(adjacency.nonZeros()) / 2; }
  bool has_features() const { return features.size() > 0; }
  bool has_labels() const { return !labels.empty(); }
};

inline double max_abs_asymmetry(const SpMat& A) {
  SpMat diff = A - SpMat(A.transpose());
  double m = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SpMat::InnerIterator it(diff, k); it; ++it)
      m = std::max(m, std::abs(it.value()));
  return m;
}

inline bool is_symmetric(const SpMat& A, double tol = 0.0) {
  return A.rows() == A.cols() && max_abs_asymmetry(A) <= tol;
}

inline void validate_adjacency(const SpMat& A) {
  if (A.rows() != A.cols())
    throw std::invalid_argument("adjacency must be square, got " + std::to_string(A.rows()) +
                                "x" + std::to_string(A.cols()));
  for (int k = 0; k < A.outerSize(); ++k) {
    for (SpMat::InnerIterator it(A, k); it; ++it) {
      if (!std::isfinite(it.value()))
        throw std::invalid_argument("adjacency has non-finite weight at (" +
                                    std::to_string(it.row()) + "," + std::to_string(it.col()) + ")");
      if (it.value() < 0.0)
        throw std::invalid_argument("adjacency has negative weight at (" +
                                    std::to_string(it.row()) + "," + std::to_string(it.col()) + ")");
      if (it.row() == it.col() && it.value() != 0.0)
        throw std::invalid_argument("adjacency has nonzero diagonal at node " +
                                    std::to_string(it.row()));
    }
  }
  if (max_abs_asymmetry(A) > 0.0)
    throw std::invalid_argument("adjacency is not symmetric");
}

inline Graph make_graph(SpMat adjacency, Mat features = Mat(), std::vector<int> labels = {},
                        SplitMasks splits = {}) {
  validate_adjacency(adjacency);
  const int n = static_cast<int>(adjacency.rows());
  if (features.size() > 0 && features.rows() != n)
    throw std::invalid_argument("feature rows (" + std::to_string(features.rows()) +
                                ") do not match node count (" + std::to_string(n) + ")");
  if (!labels.empty()) {
    if (static_cast<int>(labels.size()) != n)
      throw std::invalid_argument("label count (" + std::to_string(labels.size()) +
                                  ") does not match node count (" + std::to_string(n) + ")");
    for (int y : labels)
      if (y < 0) throw std::invalid_argument("labels must be nonnegative class indices");
  }
  std::vector<char> seen(static_cast<size_t>(n), 0);
  auto check_mask = [&](const std::vector<int>& ids, const char* which) {
    for (int i : ids) {
      if (i < 0 || i >= n)
        throw std::invalid_argument(std::string(which) + " split id " + std::to_string(i) +
                                    " out of range");
      if (seen[static_cast<size_t>(i)])
        throw std::invalid_argument("node " + std::to_string(i) + " appears in more than one split");
      seen[static_cast<size_t>(i)] = 1;
    }
  };
  check_mask(splits.train, "train");
  check_mask(splits.val, "val");
  check_mask(splits.test, "test");
  Graph g;
  g.adjacency = std::move(adjacency);
  g.features = std::move(features);
  g.labels = std::move(labels);
  g.splits = std::move(splits);
  return g;
}

inline Vec degrees(const SpMat& A) { return A * Vec::Ones(A.cols()); }

// Propagation matrix from an arbitrary nonnegative symmetric matrix. The
// diagonal of A participates; GcnNorm adds self-loops on top of it.
inline SpMat propagation_from_adjacency(const SpMat& A, PropagationKind kind) {
  const int n = static_cast<int>(A.rows());
  switch (kind) {
    case PropagationKind::Adjacency:
      return A;
    case PropagationKind::MeanAgg: {
      Vec d = degrees(A);
      std::vector<Triplet> trips;
      trips.reserve(static_cast<size_t>(A.nonZeros()));
      for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) {
          if (d(it.row()) <= 0.0)
            throw std::invalid_argument("mean aggregation undefined for zero-degree node " +
                                        std::to_string(it.row()));
          trips.emplace_back(it.row(), it.col(), it.value() / d(it.row()));
        }
      for (int i = 0; i < n; ++i)
        if (d(i) <= 0.0)
          throw std::invalid_argument("mean aggregation undefined for zero-degree node " +
                                      std::to_string(i));
      SpMat S(n, n);
      S.setFromTriplets(trips.begin(), trips.end());
      return S;
    }
    case PropagationKind::GcnNorm: {
      std::vector<Triplet> trips;
      trips.reserve(static_cast<size_t>(A.nonZeros()) + static_cast<size_t>(n));
      for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it)
          trips.emplace_back(it.row(), it.col(), it.value());
      for (int i = 0; i < n; ++i) trips.emplace_back(i, i, 1.0);
      SpMat Ahat(n, n);
      Ahat.setFromTriplets(trips.begin(), trips.end());
      Vec dhat = degrees(Ahat);
      std::vector<Triplet> strips;
      strips.reserve(static_cast<size_t>(Ahat.nonZeros()));
      for (int k = 0; k < Ahat.outerSize(); ++k)
        for (SpMat::InnerIterator it(Ahat, k); it; ++it)
          strips.emplace_back(it.row(), it.col(),
                              it.value() / std::sqrt(dhat(it.row()) * dhat(it.col())));
      SpMat S(n, n);
      S.setFromTriplets(strips.begin(), strips.end());
      return S;
    }
  }
  throw std::invalid_argument("unknown propagation kind");
}

inline SpMat build_propagation(const Graph& g, PropagationKind kind) {
  return propagation_from_adjacency(g.adjacency, kind);
}

inline SpMat laplacian_from_adjacency(const SpMat& A, const LaplacianKind& kind) {
  const int n = static_cast<int>(A.rows());
  switch (kind.family) {
    case LaplacianFamily::Combinatorial: {
      Vec d = degrees(A);
      std::vector<Triplet> trips;
      trips.reserve(static_cast<size_t>(A.nonZeros()) + static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) trips.emplace_back(i, i, d(i));
      for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it)
          trips.emplace_back(it.row(), it.col(), -it.value());
      SpMat L(n, n);
      L.setFromTriplets(trips.begin(), trips.end());
      return L;
    }
    case LaplacianFamily::NormalizedSym: {
      Vec d = degrees(A);
      for (int i = 0; i < n; ++i)
        if (d(i) <= 0.0)
          throw std::invalid_argument("normalized Laplacian undefined for isolated node " +
                                      std::to_string(i));
      std::vector<Triplet> trips;
      trips.reserve(static_cast<size_t>(A.nonZeros()) + static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) trips.emplace_back(i, i, 1.0);
      for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it)
          trips.emplace_back(it.row(), it.col(),
                             -it.value() / std::sqrt(d(it.row()) * d(it.col())));
      SpMat L(n, n);
      L.setFromTriplets(trips.begin(), trips.end());
      return L;
    }
    case LaplacianFamily::ShiftedPropagation: {
      SpMat S = propagation_from_adjacency(A, PropagationKind::GcnNorm);
      std::vector<Triplet> trips;
      trips.reserve(static_cast<size_t>(S.nonZeros()) + static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) trips.emplace_back(i, i, 1.0 + kind.delta);
      for (int k = 0; k < S.outerSize(); ++k)
        for (SpMat::InnerIterator it(S, k); it; ++it)
          trips.emplace_back(it.row(), it.col(), -it.value());
      SpMat L(n, n);
      L.setFromTriplets(trips.begin(), trips.end());
      return L;
    }
  }
  throw std::invalid_argument("unknown Laplacian kind");
}

inline SpMat build_laplacian(const Graph& g, const LaplacianKind& kind) {
  return laplacian_from_adjacency(g.adjacency, kind);
}

// Component ids numbered by discovery order when scanning nodes in increasing
// id. Returns (component id per node, component count).
inline std::pair<std::vector<int>, int> connected_components(const SpMat& A) {
  const int n = static_cast<int>(A.rows());
  std::vector<int> comp(static_cast<size_t>(n), -1);
  int count = 0;
  for (int root = 0; root < n; ++root) {
    if (comp[static_cast<size_t>(root)] != -1) continue;
    comp[static_cast<size_t>(root)] = count;
    std::queue<int> frontier;
    frontier.push(root);
    while (!frontier.empty()) {
      int u = frontier.front();
      frontier.pop();
      for (SpMat::InnerIterator it(A, u); it; ++it) {
        int v = static_cast<int>(it.row());
        if (it.value() != 0.0 && comp[static_cast<size_t>(v)] == -1) {
          comp[static_cast<size_t>(v)] = count;
          frontier.push(v);
        }
      }
    }
    ++count;
  }
  return {comp, count};
}

}  // namespace coarsemp
